#include "wakerom/operators.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "wakerom/errors.hpp"

namespace wakerom {

namespace {

// slot collector for the convection stencil: per (row, col), a small list of
// (state index, coefficient) pairs
struct StencilBuilder {
    struct Slot {
        int row, col;
        std::vector<std::pair<int, double>> pairs;
    };
    std::vector<Slot> slots;

    void add(int row, int col, int widx, double coef) {
        if (!slots.empty() && slots.back().row == row && slots.back().col == col) {
            slots.back().pairs.emplace_back(widx, coef);
            return;
        }
        slots.push_back({row, col, {{widx, coef}}});
    }
};

} // namespace

DiscreteOperators assemble_operators(const GridSpec& grid, double reynolds) {
    grid.validate();
    if (!(reynolds > 0.0)) throw ArgumentError("reynolds must be positive");

    DiscreteOperators ops;
    ops.grid = grid;
    ops.reynolds = reynolds;
    const int nn = grid.node_count();
    ops.n_v = 2 * nn;
    const int ncx = grid.periodic_x ? grid.nx : grid.nx - 1;
    const int ncy = grid.periodic_y ? grid.ny : grid.ny - 1;
    ops.n_p = ncx * ncy;
    ops.cg_maxiter = 5 * ops.n_p;

    const double area = grid.dx * grid.dy;
    const double nu = 1.0 / reynolds;
    ops.mass = Eigen::VectorXd::Constant(ops.n_v, area);
    ops.forcing = Eigen::VectorXd::Zero(ops.n_v);

    // --- diffusion A and forcing f -----------------------------------------
    const double kappa = ops.dirichlet_penalty * area;
    const double cx = nu * area / (grid.dx * grid.dx);
    const double cy = nu * area / (grid.dy * grid.dy);
    std::vector<std::tuple<int, int, double>> a_trip;
    a_trip.reserve(static_cast<size_t>(ops.n_v) * 5);

    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            const int n = grid.node(i, j);
            const int dof[2] = {ops.x_dof(n), ops.y_dof(n)};
            if (grid.is_dirichlet(i, j)) {
                ops.dirichlet_nodes.push_back(n);
                double gx, gy;
                grid.dirichlet_value(i, j, gx, gy);
                a_trip.emplace_back(dof[0], dof[0], kappa);
                a_trip.emplace_back(dof[1], dof[1], kappa);
                ops.forcing[dof[0]] = kappa * gx;
                ops.forcing[dof[1]] = kappa * gy;
                continue;
            }
            const int e = grid.node(grid.wrap_i(i + 1), j);
            const int w = grid.node(grid.wrap_i(i - 1), j);
            const int no = grid.node(i, grid.wrap_j(j + 1));
            const int so = grid.node(i, grid.wrap_j(j - 1));
            double diag = 2.0 * cx + 2.0 * cy;
            if (grid.is_masked(i, j)) diag += ops.brinkman_drag * area;
            for (int c = 0; c < 2; ++c) {
                const int off = c == 0 ? 0 : nn;
                a_trip.emplace_back(dof[c], dof[c], diag);
                a_trip.emplace_back(dof[c], off + e, -cx);
                a_trip.emplace_back(dof[c], off + w, -cx);
                a_trip.emplace_back(dof[c], off + no, -cy);
                a_trip.emplace_back(dof[c], off + so, -cy);
            }
            if (!grid.is_masked(i, j)) {
                ops.forcing[dof[0]] += grid.body_force_x * area;
                ops.forcing[dof[1]] += grid.body_force_y * area;
            }
        }
    }
    ops.diffusion = CsrMatrix::from_triplets(ops.n_v, ops.n_v, std::move(a_trip));

    // --- divergence J -------------------------------------------------------
    // cell (ci, cj) averages the corner velocities of its two vertical and two
    // horizontal edges; ring nodes contribute no columns
    std::vector<std::tuple<int, int, double>> j_trip;
    j_trip.reserve(static_cast<size_t>(ops.n_p) * 8);
    const double hx = 1.0 / (2.0 * grid.dx);
    const double hy = 1.0 / (2.0 * grid.dy);
    for (int cj = 0; cj < ncy; ++cj) {
        for (int ci = 0; ci < ncx; ++ci) {
            const int cell = cj * ncx + ci;
            const int ii[2] = {ci, grid.wrap_i(ci + 1)};
            const int jj[2] = {cj, grid.wrap_j(cj + 1)};
            for (int b = 0; b < 2; ++b) {
                for (int a = 0; a < 2; ++a) {
                    const int i = ii[a];
                    const int j = jj[b];
                    if (grid.is_dirichlet(i, j)) continue;
                    const int n = grid.node(i, j);
                    j_trip.emplace_back(cell, ops.x_dof(n), a == 0 ? -hx : hx);
                    j_trip.emplace_back(cell, ops.y_dof(n), b == 0 ? -hy : hy);
                }
            }
        }
    }
    ops.divergence = CsrMatrix::from_triplets(ops.n_p, ops.n_v, std::move(j_trip));

    // --- convection stencil -------------------------------------------------
    // skew-symmetric central form: N(w)v = 1/2 (w . grad v + div(w v)),
    // entry (c,n)->(c,E) = (w_x(n) + w_x(E)) / (4 dx) and so on; rows on the
    // Dirichlet ring stay empty
    StencilBuilder sb;
    const double qx = 1.0 / (4.0 * grid.dx);
    const double qy = 1.0 / (4.0 * grid.dy);
    for (int c = 0; c < 2; ++c) {
        const int off = c == 0 ? 0 : nn;
        for (int j = 0; j < grid.ny; ++j) {
            for (int i = 0; i < grid.nx; ++i) {
                if (grid.is_dirichlet(i, j)) continue;
                const int n = grid.node(i, j);
                const int e = grid.node(grid.wrap_i(i + 1), j);
                const int w = grid.node(grid.wrap_i(i - 1), j);
                const int no = grid.node(i, grid.wrap_j(j + 1));
                const int so = grid.node(i, grid.wrap_j(j - 1));
                const int row = off + n;
                struct Nb {
                    int col, widx_center, widx_nbr;
                    double coef;
                };
                const Nb nbs[4] = {
                    {off + e, ops.x_dof(n), ops.x_dof(e), qx},
                    {off + w, ops.x_dof(n), ops.x_dof(w), -qx},
                    {off + no, ops.y_dof(n), ops.y_dof(no), qy},
                    {off + so, ops.y_dof(n), ops.y_dof(so), -qy},
                };
                for (const auto& nb : nbs) {
                    sb.add(row, nb.col, nb.widx_center, nb.coef);
                    sb.add(row, nb.col, nb.widx_nbr, nb.coef);
                }
            }
        }
    }
    std::sort(sb.slots.begin(), sb.slots.end(), [](const auto& a, const auto& b) {
        return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    ConvectionStencil& st = ops.convection;
    st.n = ops.n_v;
    st.offsets.assign(ops.n_v + 1, 0);
    st.pair_offsets.push_back(0);
    for (const auto& slot : sb.slots) {
        st.offsets[slot.row + 1]++;
        st.cols.push_back(slot.col);
        for (const auto& [idx, coef] : slot.pairs) {
            st.pair_index.push_back(idx);
            st.pair_coef.push_back(coef);
        }
        st.pair_offsets.push_back(static_cast<int>(st.pair_index.size()));
    }
    for (int r = 0; r < ops.n_v; ++r) st.offsets[r + 1] += st.offsets[r];

    return ops;
}

CsrMatrix assemble_convection(const DiscreteOperators& ops, const VelocityState& w) {
    if (w.size() != ops.n_v) throw ArgumentError("assemble_convection: state size mismatch");
    const ConvectionStencil& st = ops.convection;
    std::vector<std::tuple<int, int, double>> trip;
    trip.reserve(st.cols.size());
    for (int r = 0; r < st.n; ++r) {
        for (int s = st.offsets[r]; s < st.offsets[r + 1]; ++s) {
            double v = 0.0;
            for (int k = st.pair_offsets[s]; k < st.pair_offsets[s + 1]; ++k)
                v += st.pair_coef[k] * w[st.pair_index[k]];
            trip.emplace_back(r, st.cols[s], v);
        }
    }
    return CsrMatrix::from_triplets(ops.n_v, ops.n_v, std::move(trip));
}

VelocityState apply_convection(const DiscreteOperators& ops, const VelocityState& w,
                               const VelocityState& v) {
    if (w.size() != ops.n_v || v.size() != ops.n_v)
        throw ArgumentError("apply_convection: state size mismatch");
    const ConvectionStencil& st = ops.convection;
    VelocityState y = VelocityState::Zero(ops.n_v);
    for (int r = 0; r < st.n; ++r) {
        double acc = 0.0;
        for (int s = st.offsets[r]; s < st.offsets[r + 1]; ++s) {
            double entry = 0.0;
            for (int k = st.pair_offsets[s]; k < st.pair_offsets[s + 1]; ++k)
                entry += st.pair_coef[k] * w[st.pair_index[k]];
            acc += entry * v[st.cols[s]];
        }
        y[r] = acc;
    }
    return y;
}

double mnorm(const DiscreteOperators& ops, const Eigen::VectorXd& x) {
    if (x.size() != ops.n_v) throw ArgumentError("mnorm: size mismatch");
    return std::sqrt(x.cwiseProduct(ops.mass).dot(x));
}

double minv_norm(const DiscreteOperators& ops, const Eigen::VectorXd& x) {
    if (x.size() != ops.n_v) throw ArgumentError("minv_norm: size mismatch");
    return std::sqrt(x.cwiseQuotient(ops.mass).dot(x));
}

ProjectorContext::ProjectorContext(const DiscreteOperators& ops) : ops_(&ops) {
    r_.resize(ops.n_p);
    z_.resize(ops.n_p);
    p_.resize(ops.n_p);
    q_.resize(ops.n_p);
    vtmp_.resize(ops.n_v);

    // Schur matrix S = J M^-1 J^T, assembled once
    const CsrMatrix& j = ops.divergence;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(j.nnz());
    for (int r = 0; r < j.rows(); ++r)
        for (int k = j.offsets()[r]; k < j.offsets()[r + 1]; ++k)
            trip.emplace_back(r, j.col_indices()[k], j.values()[k]);
    Eigen::SparseMatrix<double> je(j.rows(), j.cols());
    je.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseMatrix<double> schur =
        je * ops.mass.cwiseInverse().asDiagonal() * Eigen::SparseMatrix<double>(je.transpose());

    const double dscale = schur.diagonal().maxCoeff();

    // verified nullspace directions: constants always, the cell checkerboard
    // when the pattern closes (it does on bounded grids and even periodic ones)
    auto add_null = [&](Eigen::VectorXd dir) {
        dir.normalize();
        if ((schur * dir).norm() < 1e-10 * dscale) null_dirs_.push_back(std::move(dir));
    };
    add_null(Eigen::VectorXd::Ones(ops.n_p));
    {
        const int ncx = ops.grid.periodic_x ? ops.grid.nx : ops.grid.nx - 1;
        Eigen::VectorXd cb(ops.n_p);
        for (int c = 0; c < ops.n_p; ++c) {
            const int ci = c % ncx;
            const int cj = c / ncx;
            cb[c] = ((ci + cj) % 2 == 0) ? 1.0 : -1.0;
        }
        add_null(std::move(cb));
    }

    // preconditioner: pin one entry per nullspace direction to make the
    // factorization definite; the deflation keeps the iteration exact
    Eigen::SparseMatrix<double> pinned = schur;
    for (size_t d = 0; d < null_dirs_.size(); ++d)
        pinned.coeffRef(static_cast<int>(d), static_cast<int>(d)) += dscale;
    precond_ = std::make_unique<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    precond_->compute(pinned);
    if (precond_->info() != Eigen::Success)
        throw SolverError("pressure preconditioner factorization failed", 0.0);
}

void ProjectorContext::apply_schur(const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    ops_->divergence.multiply_transpose_into(x, vtmp_);
    vtmp_.array() /= ops_->mass.array();
    ops_->divergence.multiply_into(vtmp_, y);
}

void ProjectorContext::deflate(Eigen::VectorXd& x) const {
    for (const Eigen::VectorXd& dir : null_dirs_) x -= dir.dot(x) * dir;
}

Eigen::VectorXd ProjectorContext::solve_schur(const Eigen::VectorXd& b, double tol_scale) {
    const DiscreteOperators& ops = *ops_;
    if (b.size() != ops.n_p) throw ArgumentError("solve_schur: rhs size mismatch");

    Eigen::VectorXd y = Eigen::VectorXd::Zero(ops.n_p);
    r_ = b;
    deflate(r_);
    const double bnorm = r_.norm();
    if (bnorm == 0.0) {
        last_iterations_ = 0;
        return y;
    }
    const double tol = ops.cg_tol * tol_scale * bnorm;

    z_ = precond_->solve(r_);
    deflate(z_);
    p_ = z_;
    double rz = r_.dot(z_);
    for (int it = 0; it < ops.cg_maxiter; ++it) {
        apply_schur(p_, q_);
        const double pq = p_.dot(q_);
        if (pq <= 0.0) throw SolverError("pressure solve lost positive definiteness", r_.norm());
        const double alpha = rz / pq;
        y += alpha * p_;
        r_ -= alpha * q_;
        deflate(r_);
        last_iterations_ = it + 1;
        if (r_.norm() <= tol) {
            deflate(y);  // gauge: mean-zero (and checkerboard-free) pressure
            return y;
        }
        z_ = precond_->solve(r_);
        deflate(z_);
        const double rz_new = r_.dot(z_);
        p_ = z_ + (rz_new / rz) * p_;
        rz = rz_new;
    }
    throw SolverError("pressure solve did not converge", r_.norm() / bnorm);
}

Eigen::VectorXd apply_pi(ProjectorContext& ctx, const Eigen::VectorXd& x, bool transpose) {
    const DiscreteOperators& ops = ctx.ops();
    if (x.size() != ops.n_v) throw ArgumentError("apply_pi: state size mismatch");
    if (!transpose) {
        // x - M^-1 J^T S^-1 (J x)
        Eigen::VectorXd q = ctx.solve_schur(ops.divergence.multiply(x));
        Eigen::VectorXd corr = ops.divergence.multiply_transpose(q);
        return x - corr.cwiseQuotient(ops.mass);
    }
    // x - J^T S^-1 J (M^-1 x)
    Eigen::VectorXd q = ctx.solve_schur(ops.divergence.multiply(x.cwiseQuotient(ops.mass)));
    return x - ops.divergence.multiply_transpose(q);
}

Eigen::VectorXd recover_pressure(ProjectorContext& ctx, const VelocityState& v) {
    const DiscreteOperators& ops = ctx.ops();
    if (v.size() != ops.n_v) throw ArgumentError("recover_pressure: state size mismatch");
    VelocityState rhs = apply_convection(ops, v, v);
    rhs += ops.diffusion.multiply(v);
    rhs -= ops.forcing;
    rhs.array() /= ops.mass.array();
    Eigen::VectorXd p = ctx.solve_schur(ops.divergence.multiply(rhs));
    p.array() -= p.mean();
    return p;
}

} // namespace wakerom
