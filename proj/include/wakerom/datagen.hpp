#pragma once

#include <Eigen/Core>
#include <vector>

#include "wakerom/operators.hpp"
#include "wakerom/sparse.hpp"

namespace wakerom {

/// Column-per-snapshot velocity history on one grid.
struct SnapshotSet {
    GridSpec grid;
    Eigen::MatrixXd states;     // n_v x T
    std::vector<double> times;  // strictly increasing, size T

    int count() const { return static_cast<int>(states.cols()); }
    void validate() const;
};

struct SimulateOptions {
    double t_end = 1.0;
    double dt = 0.01;         // nominal step, clipped adaptively to CFL 0.5
    int sample_every = 1;     // snapshot spacing in units of dt
    double t_sample_start = 0.0;  // discarded startup window
    double cfl_limit = 0.5;
    double dt_floor_factor = 1e-4;  // error out below dt * this
};

/// Semi-implicit projection stepping of the discrete system from rest:
/// explicit skew-symmetric convection, backward-Euler diffusion, pressure
/// projection. Every returned snapshot satisfies the divergence bound
/// |J v| <= 1e-6 |v|.
SnapshotSet simulate_wake(const DiscreteOperators& ops, const SimulateOptions& opts);
SnapshotSet simulate_wake(const DiscreteOperators& ops, double t_end, double dt,
                          int sample_every);

/// Deterministic stream-function snapshots: psi = sum_j a_j sin(k_j x - w_j t
/// + theta_j) phi_j(y), sampled as v = (d psi / dy, -d psi / dx) and then
/// projected onto the discrete divergence-free subspace, so |J v| <= 1e-10 |v|
/// per column and the snapshot rank is at most 2 * modes.
SnapshotSet synthetic_wake(const GridSpec& grid, int modes, int t_samples,
                           uint64_t seed = 1);

/// Two-channel velocity image on the tensorized pixel lattice.
/// Layout: channel-major, then row (y), then column (x).
struct CnnImage {
    int height = 0;
    int width = 0;
    Eigen::VectorXd values;  // 2 * height * width

    double& at(int c, int py, int px) { return values[(c * height + py) * width + px]; }
    double at(int c, int py, int px) const { return values[(c * height + py) * width + px]; }
};

/// Bilinear interpolation pair between grid states and pixel images.
/// Rows are nonnegative partitions of unity; rows mapped to masked nodes are
/// zero. With h = ny and w = nx the pair is the identity on fluid nodes.
struct InterpPair {
    int height = 0;
    int width = 0;
    CsrMatrix state_to_image;  // I_c, (2 h w) x n_v
    CsrMatrix image_to_state;  // I_p, n_v x (2 h w)
};

InterpPair build_interp(const GridSpec& grid, int h, int w);

CnnImage to_image(const InterpPair& pair, const VelocityState& v);
VelocityState from_image(const InterpPair& pair, const CnnImage& img);

} // namespace wakerom
