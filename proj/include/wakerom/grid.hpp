#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wakerom {

/// Uniform collocated grid for the discrete flow operators.
///
/// Velocity states are stored as one flat vector: the x-components of all
/// nx*ny nodes first, then the y-components. Node (i, j) sits at
/// (x0 + i*dx, y0 + j*dy) and has flat index j*nx + i.
///
/// Boundaries: non-periodic directions carry a ring of Dirichlet nodes
/// (inflow profile on the x-ring, no-slip on the y-ring). Either direction
/// may instead be periodic, in which case the ring disappears and stencils
/// wrap. Obstacles are volume-penalized, so masked nodes keep their degrees
/// of freedom.
struct GridSpec {
    int nx = 0;
    int ny = 0;
    double dx = 0.0;
    double dy = 0.0;
    double x0 = 0.0;
    double y0 = 0.0;
    bool periodic_x = false;
    bool periodic_y = false;
    std::vector<uint8_t> obstacle_mask;  // nx*ny entries, nonzero = solid
    std::vector<double> inflow_profile;  // ny entries, x-velocity at the x-ring
    double body_force_x = 0.0;           // bulk driving force (periodic channels)
    double body_force_y = 0.0;

    int node_count() const { return nx * ny; }
    int node(int i, int j) const { return j * nx + i; }
    double x_of(int i) const { return x0 + i * dx; }
    double y_of(int j) const { return y0 + j * dy; }

    bool on_x_ring(int i) const { return !periodic_x && (i == 0 || i == nx - 1); }
    bool on_y_ring(int j) const { return !periodic_y && (j == 0 || j == ny - 1); }
    bool is_dirichlet(int i, int j) const { return on_x_ring(i) || on_y_ring(j); }
    bool is_masked(int i, int j) const { return obstacle_mask[node(i, j)] != 0; }

    /// Prescribed velocity at a Dirichlet node. Wall rings win over the
    /// inflow profile so corners stay at rest.
    void dirichlet_value(int i, int j, double& vx, double& vy) const {
        vx = 0.0;
        vy = 0.0;
        if (on_y_ring(j)) return;
        if (on_x_ring(i)) vx = inflow_profile.empty() ? 0.0 : inflow_profile[j];
    }

    int wrap_i(int i) const { return periodic_x ? (i % nx + nx) % nx : i; }
    int wrap_j(int j) const { return periodic_y ? (j % ny + ny) % ny : j; }

    /// Throws ArgumentError on malformed fields, including an all-solid mask.
    void validate() const;

    /// Marks every node inside the circle as solid.
    void add_circle_obstacle(double cx, double cy, double radius);
};

/// Plain rectangular grid with no obstacle, zero inflow, optional periodicity.
GridSpec make_channel_grid(int nx, int ny, double lx, double ly,
                           bool periodic_x = false, bool periodic_y = false);

/// Parabolic profile q(y) = peak * 4 s (1-s), s = y/ly, zero at the walls.
std::vector<double> parabolic_inflow(int ny, double ly, double peak);

} // namespace wakerom
