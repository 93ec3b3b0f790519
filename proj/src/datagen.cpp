#include "wakerom/datagen.hpp"

#include <cmath>
#include <tuple>

#include "wakerom/errors.hpp"
#include "wakerom/rng.hpp"

namespace wakerom {

void SnapshotSet::validate() const {
    if (count() < 2) throw ArgumentError("snapshot set needs at least two snapshots");
    if (times.size() != static_cast<size_t>(count()))
        throw ArgumentError("snapshot times/states mismatch");
    for (size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw ArgumentError("snapshot times must increase");
    if (states.rows() != 2 * grid.node_count())
        throw ArgumentError("snapshot rows do not match grid");
}

namespace {

// CG for (M/dt + A) restricted to non-ring unknowns; ring values are held
// fixed at v_star_ring (already folded into the right-hand side).
class MomentumSolver {
public:
    MomentumSolver(const DiscreteOperators& ops, const std::vector<uint8_t>& is_ring)
        : ops_(ops), ring_(is_ring) {}

    void solve(double inv_dt, const Eigen::VectorXd& rhs, Eigen::VectorXd& x,
               double tol) const {
        const int n = ops_.n_v;
        Eigen::VectorXd r = rhs - apply(inv_dt, x);
        mask(r);
        Eigen::VectorXd z = r;
        Eigen::VectorXd q(n);
        double rr = r.dot(r);
        const double stop = tol * tol * std::max(rhs.dot(rhs), 1e-300);
        for (int it = 0; it < 10 * n && rr > stop; ++it) {
            q = apply(inv_dt, z);
            mask(q);
            const double alpha = rr / z.dot(q);
            x += alpha * z;
            r -= alpha * q;
            const double rr_new = r.dot(r);
            z = r + (rr_new / rr) * z;
            rr = rr_new;
        }
        if (rr > stop) throw SolverError("momentum solve did not converge", std::sqrt(rr));
    }

private:
    Eigen::VectorXd apply(double inv_dt, const Eigen::VectorXd& x) const {
        Eigen::VectorXd y = ops_.diffusion.multiply(x);
        y += inv_dt * ops_.mass.cwiseProduct(x);
        return y;
    }
    void mask(Eigen::VectorXd& v) const {
        for (int i = 0; i < v.size(); ++i)
            if (ring_[i]) v[i] = 0.0;
    }
    const DiscreteOperators& ops_;
    const std::vector<uint8_t>& ring_;
};

} // namespace

SnapshotSet simulate_wake(const DiscreteOperators& ops, const SimulateOptions& opts) {
    if (!(opts.dt > 0.0)) throw ArgumentError("simulate_wake: dt must be positive");
    if (!(opts.t_end > opts.dt)) throw ArgumentError("simulate_wake: t_end must exceed dt");
    if (opts.sample_every < 1) throw ArgumentError("simulate_wake: sample_every must be >= 1");

    const GridSpec& grid = ops.grid;
    const int n = ops.n_v;
    const int nn = grid.node_count();

    std::vector<uint8_t> is_ring(n, 0);
    for (int node : ops.dirichlet_nodes) {
        is_ring[ops.x_dof(node)] = 1;
        is_ring[ops.y_dof(node)] = 1;
    }
    // ring data and penalty diagonal, read back from the assembled operators
    Eigen::VectorXd ring_value = Eigen::VectorXd::Zero(n);
    const double kappa = ops.dirichlet_penalty * grid.dx * grid.dy;
    for (int i = 0; i < n; ++i)
        if (is_ring[i]) ring_value[i] = ops.forcing[i] / kappa;

    MomentumSolver momentum(ops, is_ring);
    ProjectorContext proj(ops);

    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd vstar = v;

    const double sample_dt = opts.sample_every * opts.dt;
    const double dt_floor = opts.dt * opts.dt_floor_factor;
    const double hmin = std::min(grid.dx, grid.dy);

    SnapshotSet out;
    out.grid = grid;
    std::vector<Eigen::VectorXd> samples;
    std::vector<double> times;

    double t = 0.0;
    double next_sample = std::max(opts.t_sample_start, sample_dt);
    const double t_eps = 1e-12 * std::max(1.0, opts.t_end);
    while (t < opts.t_end - t_eps) {
        double vmax = v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
        double dt = opts.dt;
        if (vmax > 0.0) dt = std::min(dt, opts.cfl_limit * hmin / vmax);
        if (dt < dt_floor)
            throw SolverError("CFL limit pushed the step below the dt floor", dt);
        dt = std::min(dt, next_sample - t);
        dt = std::min(dt, opts.t_end - t);

        // explicit convection, implicit diffusion
        Eigen::VectorXd rhs = (1.0 / dt) * ops.mass.cwiseProduct(v);
        rhs -= apply_convection(ops, v, v);
        rhs += ops.forcing;

        // penalty rows are diagonal: eliminate them first
        for (int i = 0; i < n; ++i)
            if (is_ring[i]) vstar[i] = rhs[i] / (ops.mass[i] / dt + kappa);
        Eigen::VectorXd ring_part = Eigen::VectorXd::Zero(n);
        for (int i = 0; i < n; ++i)
            if (is_ring[i]) ring_part[i] = vstar[i];
        Eigen::VectorXd coupled = ops.diffusion.multiply(ring_part);
        for (int i = 0; i < n; ++i) {
            if (is_ring[i])
                rhs[i] = 0.0;
            else
                rhs[i] -= coupled[i];
        }
        for (int i = 0; i < n; ++i)
            if (is_ring[i]) vstar[i] = 0.0;
        momentum.solve(1.0 / dt, rhs, vstar, 1e-12);
        vstar += ring_part;

        // projection onto J v = 0
        Eigen::VectorXd q = proj.solve_schur(ops.divergence.multiply(vstar));
        v = vstar - ops.divergence.multiply_transpose(q).cwiseQuotient(ops.mass);
        t += dt;

        if (t >= next_sample - t_eps) {
            if (t >= opts.t_sample_start - t_eps) {
                samples.push_back(v);
                times.push_back(t);
            }
            next_sample += sample_dt;
        }
    }

    if (samples.size() < 2)
        throw ArgumentError("simulate_wake: fewer than two snapshots were sampled");
    out.states.resize(n, static_cast<int>(samples.size()));
    for (size_t c = 0; c < samples.size(); ++c) out.states.col(static_cast<int>(c)) = samples[c];
    out.times = std::move(times);
    (void)nn;
    return out;
}

SnapshotSet simulate_wake(const DiscreteOperators& ops, double t_end, double dt,
                          int sample_every) {
    SimulateOptions opts;
    opts.t_end = t_end;
    opts.dt = dt;
    opts.sample_every = sample_every;
    return simulate_wake(ops, opts);
}

SnapshotSet synthetic_wake(const GridSpec& grid, int modes, int t_samples, uint64_t seed) {
    grid.validate();
    if (modes < 1) throw ArgumentError("synthetic_wake: modes must be >= 1");
    if (t_samples < 2) throw ArgumentError("synthetic_wake: need at least two samples");

    const double lx = grid.periodic_x ? grid.nx * grid.dx : (grid.nx - 1) * grid.dx;
    const double ly = grid.periodic_y ? grid.ny * grid.dy : (grid.ny - 1) * grid.dy;
    const double two_pi = 6.283185307179586477;

    Rng rng(seed);
    std::vector<double> amp(modes), kx(modes), omega(modes), phase(modes);
    std::vector<int> ky(modes);
    for (int m = 0; m < modes; ++m) {
        amp[m] = 1.0 / (m + 1.0);
        // integer wavenumbers keep periodic grids consistent
        kx[m] = two_pi * (m + 1.0) / lx;
        ky[m] = m + 1;
        omega[m] = 0.7 + 0.31 * m;
        phase[m] = rng.uniform(0.0, two_pi);
    }

    DiscreteOperators ops = assemble_operators(grid, 1.0);
    ProjectorContext proj(ops);
    const int nn = grid.node_count();

    SnapshotSet out;
    out.grid = grid;
    out.states.resize(2 * nn, t_samples);
    out.times.resize(t_samples);

    const double dt = 0.35;
    for (int s = 0; s < t_samples; ++s) {
        const double t = s * dt;
        out.times[s] = t;
        Eigen::VectorXd v(2 * nn);
        for (int j = 0; j < grid.ny; ++j) {
            for (int i = 0; i < grid.nx; ++i) {
                const double x = grid.x_of(i) - grid.x0;
                const double y = grid.y_of(j) - grid.y0;
                double vx = 0.0, vy = 0.0;
                for (int m = 0; m < modes; ++m) {
                    const double ay = two_pi * ky[m] / (2.0 * ly);  // half-wave stack
                    const double sx = std::sin(kx[m] * x - omega[m] * t + phase[m]);
                    const double cx_ = std::cos(kx[m] * x - omega[m] * t + phase[m]);
                    // psi = amp sin(kx x - w t + ph) sin(ay y)
                    vx += amp[m] * sx * ay * std::cos(ay * y);
                    vy -= amp[m] * kx[m] * cx_ * std::sin(ay * y);
                }
                const int node = grid.node(i, j);
                v[ops.x_dof(node)] = vx;
                v[ops.y_dof(node)] = vy;
            }
        }
        // zero the ring, then project onto the discrete constraint
        for (int node : ops.dirichlet_nodes) {
            v[ops.x_dof(node)] = 0.0;
            v[ops.y_dof(node)] = 0.0;
        }
        out.states.col(s) = apply_pi(proj, v);
    }
    return out;
}

namespace {

// bilinear weights of a continuous coordinate against an n-point lattice;
// periodic lattices wrap, bounded ones clamp
void lattice_weights(double s, int n, bool periodic, int& i0, int& i1, double& w0,
                     double& w1) {
    if (periodic) {
        double f = s - std::floor(s / n) * n;
        i0 = static_cast<int>(std::floor(f)) % n;
        i1 = (i0 + 1) % n;
        const double frac = f - std::floor(f);
        w0 = 1.0 - frac;
        w1 = frac;
        return;
    }
    if (s <= 0.0) {
        i0 = 0, i1 = 0, w0 = 1.0, w1 = 0.0;
        return;
    }
    if (s >= n - 1) {
        i0 = n - 1, i1 = n - 1, w0 = 1.0, w1 = 0.0;
        return;
    }
    i0 = static_cast<int>(std::floor(s));
    i1 = i0 + 1;
    w1 = s - i0;
    w0 = 1.0 - w1;
}

} // namespace

InterpPair build_interp(const GridSpec& grid, int h, int w) {
    grid.validate();
    if (h < 2 || w < 2) throw ArgumentError("build_interp: image must be at least 2x2");

    const int nn = grid.node_count();
    const int n_v = 2 * nn;
    const int npx = 2 * h * w;
    InterpPair pair;
    pair.height = h;
    pair.width = w;

    // pixel lattice in node-index coordinates
    const double sx = grid.periodic_x ? static_cast<double>(grid.nx) / w
                                      : static_cast<double>(grid.nx - 1) / (w - 1);
    const double sy = grid.periodic_y ? static_cast<double>(grid.ny) / h
                                      : static_cast<double>(grid.ny - 1) / (h - 1);

    std::vector<std::tuple<int, int, double>> tc;
    tc.reserve(static_cast<size_t>(npx) * 4);
    for (int c = 0; c < 2; ++c) {
        for (int py = 0; py < h; ++py) {
            for (int px = 0; px < w; ++px) {
                const int row = (c * h + py) * w + px;
                int i0, i1, j0, j1;
                double wx0, wx1, wy0, wy1;
                lattice_weights(px * sx, grid.nx, grid.periodic_x, i0, i1, wx0, wx1);
                lattice_weights(py * sy, grid.ny, grid.periodic_y, j0, j1, wy0, wy1);
                const std::pair<int, double> xs[2] = {{i0, wx0}, {i1, wx1}};
                const std::pair<int, double> ys[2] = {{j0, wy0}, {j1, wy1}};
                double total = 0.0;
                std::vector<std::pair<int, double>> entries;
                for (const auto& [j, wy] : ys) {
                    for (const auto& [i, wx] : xs) {
                        const double wgt = wx * wy;
                        if (wgt == 0.0) continue;
                        if (grid.is_masked(i, j)) continue;
                        const int node = grid.node(i, j);
                        entries.emplace_back(c == 0 ? node : nn + node, wgt);
                        total += wgt;
                    }
                }
                if (total <= 0.0) continue;  // pixel fully inside the mask: zero row
                for (const auto& [col, wgt] : entries) tc.emplace_back(row, col, wgt / total);
            }
        }
    }
    pair.state_to_image = CsrMatrix::from_triplets(npx, n_v, std::move(tc));

    std::vector<std::tuple<int, int, double>> tp;
    tp.reserve(static_cast<size_t>(n_v) * 4);
    for (int c = 0; c < 2; ++c) {
        for (int j = 0; j < grid.ny; ++j) {
            for (int i = 0; i < grid.nx; ++i) {
                if (grid.is_masked(i, j)) continue;  // masked rows stay zero
                const int node = grid.node(i, j);
                const int row = c == 0 ? node : nn + node;
                int p0, p1, q0, q1;
                double wx0, wx1, wy0, wy1;
                lattice_weights(i / sx, w, grid.periodic_x, p0, p1, wx0, wx1);
                lattice_weights(j / sy, h, grid.periodic_y, q0, q1, wy0, wy1);
                const std::pair<int, double> xs[2] = {{p0, wx0}, {p1, wx1}};
                const std::pair<int, double> ys[2] = {{q0, wy0}, {q1, wy1}};
                for (const auto& [py, wy] : ys)
                    for (const auto& [px, wx] : xs)
                        if (wx * wy != 0.0)
                            tp.emplace_back(row, (c * h + py) * w + px, wx * wy);
            }
        }
    }
    pair.image_to_state = CsrMatrix::from_triplets(n_v, npx, std::move(tp));
    return pair;
}

CnnImage to_image(const InterpPair& pair, const VelocityState& v) {
    if (v.size() != pair.state_to_image.cols())
        throw ArgumentError("to_image: state size mismatch");
    CnnImage img;
    img.height = pair.height;
    img.width = pair.width;
    img.values = pair.state_to_image.multiply(v);
    return img;
}

VelocityState from_image(const InterpPair& pair, const CnnImage& img) {
    if (img.values.size() != pair.image_to_state.cols())
        throw ArgumentError("from_image: image size mismatch");
    return pair.image_to_state.multiply(img.values);
}

} // namespace wakerom
