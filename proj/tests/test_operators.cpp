#include <doctest.h>

#include <cmath>

#include "wakerom/errors.hpp"
#include "wakerom/operators.hpp"
#include "wakerom/rng.hpp"

using namespace wakerom;

namespace {

Eigen::VectorXd random_state(const DiscreteOperators& ops, Rng& rng) {
    Eigen::VectorXd v(ops.n_v);
    for (int i = 0; i < ops.n_v; ++i) v[i] = rng.normal();
    return v;
}

// independent dense evaluation of the skew-symmetric convection
// 1/2 (w . grad v + div(w v)), componentwise central differences
Eigen::VectorXd convection_oracle(const DiscreteOperators& ops, const Eigen::VectorXd& w,
                                  const Eigen::VectorXd& v) {
    const GridSpec& g = ops.grid;
    const int nn = g.node_count();
    Eigen::VectorXd y = Eigen::VectorXd::Zero(ops.n_v);
    for (int c = 0; c < 2; ++c) {
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                if (g.is_dirichlet(i, j)) continue;
                const int n = g.node(i, j);
                const int e = g.node(g.wrap_i(i + 1), j);
                const int wn = g.node(g.wrap_i(i - 1), j);
                const int no = g.node(i, g.wrap_j(j + 1));
                const int so = g.node(i, g.wrap_j(j - 1));
                auto vc = [&](int node) { return v[c * nn + node]; };
                auto wx = [&](int node) { return w[node]; };
                auto wy = [&](int node) { return w[nn + node]; };
                const double adv = wx(n) * (vc(e) - vc(wn)) / (2.0 * g.dx) +
                                   wy(n) * (vc(no) - vc(so)) / (2.0 * g.dy);
                const double div = (wx(e) * vc(e) - wx(wn) * vc(wn)) / (2.0 * g.dx) +
                                   (wy(no) * vc(no) - wy(so) * vc(so)) / (2.0 * g.dy);
                y[c * nn + n] = 0.5 * (adv + div);
            }
        }
    }
    return y;
}

} // namespace

TEST_CASE("assembly dimensions and row sums on the 8x4 grid") {
    GridSpec g = make_channel_grid(8, 4, 7.0, 3.0);
    DiscreteOperators ops = assemble_operators(g, 1.0);
    CHECK(ops.n_v == 64);
    CHECK(ops.n_p == 7 * 3);
    CHECK(ops.mass.minCoeff() > 0.0);

    // divergence of a constant field vanishes on interior stencils
    const CsrMatrix& j = ops.divergence;
    for (int ci = 1; ci < 6; ++ci) {
        for (int cj = 1; cj < 2; ++cj) {
            const int cell = cj * 7 + ci;
            double sx = 0.0, sy = 0.0;
            for (int k = j.offsets()[cell]; k < j.offsets()[cell + 1]; ++k) {
                if (j.col_indices()[k] < 32) sx += j.values()[k];
                else sy += j.values()[k];
            }
            CHECK(std::abs(sx) < 1e-14);
            CHECK(std::abs(sy) < 1e-14);
        }
    }
    ops.diffusion.check_invariants();
    ops.divergence.check_invariants();
}

TEST_CASE("assembly argument errors") {
    GridSpec g = make_channel_grid(8, 4, 7.0, 3.0);
    CHECK_THROWS_AS(assemble_operators(g, 0.0), ArgumentError);
    CHECK_THROWS_AS(assemble_operators(g, -1.0), ArgumentError);
    GridSpec solid = g;
    std::fill(solid.obstacle_mask.begin(), solid.obstacle_mask.end(), 1);
    CHECK_THROWS_WITH_AS(assemble_operators(solid, 1.0), "empty fluid domain", ArgumentError);
}

TEST_CASE("constant advection of a constant field vanishes") {
    GridSpec g = make_channel_grid(10, 6, 9.0, 6.0, false, true);  // periodic in y
    DiscreteOperators ops = assemble_operators(g, 1.0);
    Eigen::VectorXd v(ops.n_v);
    v.head(g.node_count()).setOnes();
    v.tail(g.node_count()).setZero();
    const Eigen::VectorXd y = apply_convection(ops, v, v);
    CHECK(y.norm() <= 1e-12);
}

TEST_CASE("assembled convection matches the dense stencil oracle") {
    GridSpec g = make_channel_grid(16, 8, 15.0, 7.0);
    DiscreteOperators ops = assemble_operators(g, 10.0);
    Rng rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::VectorXd w = random_state(ops, rng);
        const Eigen::VectorXd v = random_state(ops, rng);
        const Eigen::VectorXd direct = assemble_convection(ops, w).multiply(v);
        const Eigen::VectorXd oracle = convection_oracle(ops, w, v);
        CHECK((direct - oracle).norm() <= 1e-12 * oracle.norm());
        CHECK((apply_convection(ops, w, v) - oracle).norm() <= 1e-12 * oracle.norm());
    }
}

TEST_CASE("convection assembly is linear in the advecting field") {
    GridSpec g = make_channel_grid(16, 8, 15.0, 7.0);
    DiscreteOperators ops = assemble_operators(g, 1.0);
    Rng rng(7);
    const Eigen::VectorXd u = random_state(ops, rng);
    const Eigen::VectorXd w = random_state(ops, rng);

    CsrMatrix sum = assemble_convection(ops, u + w);
    CsrMatrix parts_u = assemble_convection(ops, u);
    CsrMatrix parts_w = assemble_convection(ops, w);
    for (double& val : parts_u.values()) val = 0.0;  // reuse pattern for the sum
    CsrMatrix acc = assemble_convection(ops, u);
    {
        const CsrMatrix nw = assemble_convection(ops, w);
        for (int k = 0; k < acc.nnz(); ++k) acc.values()[k] += nw.values()[k];
    }
    CHECK(sum.max_abs_difference(acc) <= 1e-13);

    // zero field gives the zero matrix with the pattern retained
    CsrMatrix zero = assemble_convection(ops, Eigen::VectorXd::Zero(ops.n_v));
    CHECK(zero.nnz() == sum.nnz());
    CHECK(zero.max_abs_entry() == 0.0);

    CHECK_THROWS_AS(assemble_convection(ops, Eigen::VectorXd::Zero(3)), ArgumentError);
}

TEST_CASE("projector identities") {
    GridSpec g = make_channel_grid(16, 8, 15.0, 7.0);
    DiscreteOperators ops = assemble_operators(g, 25.0);
    ProjectorContext ctx(ops);
    Rng rng(3);

    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd x = random_state(ops, rng);
        const Eigen::VectorXd px = apply_pi(ctx, x);
        CHECK(ops.divergence.multiply(px).norm() <= 1e-8 * x.norm());
        CHECK((apply_pi(ctx, px) - px).norm() <= 1e-8 * x.norm());
    }

    // identity on the divergence-free subspace
    const Eigen::VectorXd x = random_state(ops, rng);
    const Eigen::VectorXd px = apply_pi(ctx, x);
    CHECK((apply_pi(ctx, px) - px).norm() <= 1e-10 * px.norm());

    // transpose annihilates through M^-1 J^T
    const Eigen::VectorXd y = random_state(ops, rng);
    const Eigen::VectorXd pty = apply_pi(ctx, y, true);
    // Pi^T y satisfies J M^-1 (Pi^T y) = 0
    CHECK(ops.divergence.multiply(pty.cwiseQuotient(ops.mass)).norm() <= 1e-8 * y.norm());
}

TEST_CASE("projector identities hold on a periodic channel") {
    GridSpec g = make_channel_grid(12, 8, 11.0, 7.0, true, false);
    DiscreteOperators ops = assemble_operators(g, 25.0);
    ProjectorContext ctx(ops);
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::VectorXd x = random_state(ops, rng);
        const Eigen::VectorXd px = apply_pi(ctx, x);
        CHECK(ops.divergence.multiply(px).norm() <= 1e-8 * x.norm());
        CHECK((apply_pi(ctx, px) - px).norm() <= 1e-8 * x.norm());
    }
}

TEST_CASE("pressure recovery") {
    GridSpec g = make_channel_grid(16, 8, 15.0, 7.0);
    g.inflow_profile = parabolic_inflow(8, 7.0, 1.0);
    DiscreteOperators ops = assemble_operators(g, 30.0);
    ProjectorContext ctx(ops);
    Rng rng(5);

    SUBCASE("zero state with zero forcing gives zero pressure") {
        GridSpec g0 = make_channel_grid(16, 8, 15.0, 7.0);
        DiscreteOperators ops0 = assemble_operators(g0, 30.0);
        ProjectorContext ctx0(ops0);
        const Eigen::VectorXd p = recover_pressure(ctx0, Eigen::VectorXd::Zero(ops0.n_v));
        CHECK(p.norm() == 0.0);
    }

    SUBCASE("mean-zero and elimination residual") {
        for (int trial = 0; trial < 5; ++trial) {
            const Eigen::VectorXd v = random_state(ops, rng);
            const Eigen::VectorXd p = recover_pressure(ctx, v);
            CHECK(std::abs(p.mean()) <= 1e-12 * p.cwiseAbs().maxCoeff());

            Eigen::VectorXd rhs = apply_convection(ops, v, v) + ops.diffusion.multiply(v) -
                                  ops.forcing;
            rhs.array() /= ops.mass.array();
            const Eigen::VectorXd b = ops.divergence.multiply(rhs);
            // S p
            Eigen::VectorXd sp = ops.divergence.multiply(
                ops.divergence.multiply_transpose(p).cwiseQuotient(ops.mass));
            // consistency holds up to the nullspace component of b
            Eigen::VectorXd residual = sp - b;
            residual.array() -= residual.mean();
            CHECK(residual.norm() <= 1e-8 * std::max(1.0, b.norm()));
        }
    }
}

TEST_CASE("mass norms") {
    GridSpec g = make_channel_grid(8, 4, 7.0, 3.0);  // unit cells: dx = dy = 1
    DiscreteOperators ops = assemble_operators(g, 1.0);
    Rng rng(9);

    CHECK(mnorm(ops, Eigen::VectorXd::Zero(ops.n_v)) == 0.0);
    const Eigen::VectorXd x = random_state(ops, rng);
    CHECK(mnorm(ops, x) == doctest::Approx(x.norm()).epsilon(1e-13));
    CHECK(minv_norm(ops, x) == doctest::Approx(x.norm()).epsilon(1e-13));

    GridSpec g2 = make_channel_grid(16, 8, 3.0, 1.0);
    DiscreteOperators ops2 = assemble_operators(g2, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd a = random_state(ops2, rng);
        const Eigen::VectorXd b = random_state(ops2, rng);
        // Cauchy-Schwarz between the two norms
        CHECK(mnorm(ops2, a) * minv_norm(ops2, a) >= a.squaredNorm() * (1.0 - 1e-12));
        // homogeneity and triangle inequality
        const double s = rng.uniform(-3.0, 3.0);
        CHECK(mnorm(ops2, s * a) ==
              doctest::Approx(std::abs(s) * mnorm(ops2, a)).epsilon(1e-12));
        CHECK(mnorm(ops2, a + b) <= mnorm(ops2, a) + mnorm(ops2, b) + 1e-12);
        CHECK(minv_norm(ops2, s * a) ==
              doctest::Approx(std::abs(s) * minv_norm(ops2, a)).epsilon(1e-12));
        CHECK(minv_norm(ops2, a + b) <= minv_norm(ops2, a) + minv_norm(ops2, b) + 1e-12);
    }
    CHECK_THROWS_AS(mnorm(ops, Eigen::VectorXd::Zero(3)), ArgumentError);
}

TEST_CASE("diffusion is symmetric away from the penalty rows") {
    GridSpec g = make_channel_grid(10, 6, 9.0, 5.0);
    g.add_circle_obstacle(4.0, 2.5, 1.2);
    DiscreteOperators ops = assemble_operators(g, 17.0);

    std::vector<bool> dirichlet_dof(ops.n_v, false);
    for (int node : ops.dirichlet_nodes) {
        dirichlet_dof[ops.x_dof(node)] = true;
        dirichlet_dof[ops.y_dof(node)] = true;
    }
    const Eigen::MatrixXd a = ops.diffusion.to_dense();
    for (int r = 0; r < ops.n_v; ++r) {
        if (dirichlet_dof[r]) continue;
        for (int c = 0; c < ops.n_v; ++c) {
            if (dirichlet_dof[c]) continue;
            CHECK(a(r, c) == doctest::Approx(a(c, r)).epsilon(1e-14));
        }
    }

    // the Brinkman drag sits on masked diagonals
    bool masked_found = false;
    for (int jj = 1; jj < g.ny - 1 && !masked_found; ++jj)
        for (int ii = 1; ii < g.nx - 1 && !masked_found; ++ii)
            if (g.is_masked(ii, jj)) {
                const int dof = ops.x_dof(g.node(ii, jj));
                CHECK(a(dof, dof) > ops.brinkman_drag * g.dx * g.dy * 0.99);
                masked_found = true;
            }
    CHECK(masked_found);
}
