#include "wakerom/grid.hpp"

#include <algorithm>
#include <cmath>

#include "wakerom/errors.hpp"

namespace wakerom {

void GridSpec::validate() const {
    if (nx < 4 || ny < 4) throw ArgumentError("grid must have nx >= 4 and ny >= 4");
    if (!(dx > 0.0) || !(dy > 0.0)) throw ArgumentError("grid spacings must be positive");
    if (obstacle_mask.size() != static_cast<size_t>(nx * ny))
        throw ArgumentError("obstacle mask size does not match node count");
    if (!inflow_profile.empty() && inflow_profile.size() != static_cast<size_t>(ny))
        throw ArgumentError("inflow profile must have one value per y-node");
    const bool any_fluid =
        std::any_of(obstacle_mask.begin(), obstacle_mask.end(), [](uint8_t m) { return m == 0; });
    if (!any_fluid) throw ArgumentError("empty fluid domain");
}

void GridSpec::add_circle_obstacle(double cx, double cy, double radius) {
    const double r2 = radius * radius;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double px = x_of(i) - cx;
            const double py = y_of(j) - cy;
            if (px * px + py * py <= r2) obstacle_mask[node(i, j)] = 1;
        }
    }
}

GridSpec make_channel_grid(int nx, int ny, double lx, double ly, bool periodic_x,
                           bool periodic_y) {
    GridSpec g;
    g.nx = nx;
    g.ny = ny;
    // periodic directions tile [0, L); bounded ones include both ends
    g.dx = periodic_x ? lx / nx : lx / (nx - 1);
    g.dy = periodic_y ? ly / ny : ly / (ny - 1);
    g.periodic_x = periodic_x;
    g.periodic_y = periodic_y;
    g.obstacle_mask.assign(static_cast<size_t>(nx) * ny, 0);
    g.inflow_profile.assign(ny, 0.0);
    return g;
}

std::vector<double> parabolic_inflow(int ny, double ly, double peak) {
    std::vector<double> q(ny, 0.0);
    for (int j = 0; j < ny; ++j) {
        const double s = (ly > 0.0) ? (j * (ly / (ny - 1))) / ly : 0.0;
        q[j] = peak * 4.0 * s * (1.0 - s);
    }
    return q;
}

} // namespace wakerom
