#include <doctest.h>

#include <cmath>

#include "wakerom/datagen.hpp"
#include "wakerom/errors.hpp"
#include "wakerom/rng.hpp"

#include <Eigen/SVD>

using namespace wakerom;

TEST_CASE("quiescent system stays at rest") {
    GridSpec g = make_channel_grid(12, 6, 11.0, 5.0);
    DiscreteOperators ops = assemble_operators(g, 10.0);
    SnapshotSet set = simulate_wake(ops, 1.0, 0.05, 4);
    CHECK(set.states.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("driven periodic channel reaches the steady profile") {
    GridSpec g = make_channel_grid(12, 12, 6.0, 1.0, true, false);
    g.body_force_x = 1.0;
    DiscreteOperators ops = assemble_operators(g, 1.0);
    SimulateOptions opts;
    opts.t_end = 6.0;
    opts.dt = 0.01;
    opts.sample_every = 10;
    SnapshotSet set = simulate_wake(ops, opts);
    const int t = set.count();
    REQUIRE(t >= 12);
    const Eigen::VectorXd last = set.states.col(t - 1);
    const Eigen::VectorXd prev = set.states.col(t - 2);
    CHECK((last - prev).norm() <= 1e-4 * last.norm());

    // mid-channel velocity beats the near-wall velocity and the divergence is
    // controlled
    const int mid = g.node(3, 6);
    const int wall = g.node(3, 1);
    CHECK(last[mid] > last[wall]);
    CHECK(last[mid] > 0.0);
    for (int s = 0; s < t; ++s) {
        const Eigen::VectorXd v = set.states.col(s);
        CHECK(ops.divergence.multiply(v).norm() <= 1e-6 * v.norm());
    }
}

TEST_CASE("simulation argument validation") {
    GridSpec g = make_channel_grid(8, 4, 7.0, 3.0);
    DiscreteOperators ops = assemble_operators(g, 1.0);
    CHECK_THROWS_AS(simulate_wake(ops, 1.0, 0.0, 1), ArgumentError);
    CHECK_THROWS_AS(simulate_wake(ops, 0.01, 0.05, 1), ArgumentError);
    CHECK_THROWS_AS(simulate_wake(ops, 1.0, 0.05, 0), ArgumentError);
}

TEST_CASE("synthetic snapshots are discretely divergence free and low rank") {
    GridSpec g = make_channel_grid(20, 10, 19.0, 9.0);
    DiscreteOperators ops = assemble_operators(g, 1.0);

    SUBCASE("single traveling wave spans two modes") {
        SnapshotSet set = synthetic_wake(g, 1, 30);
        const Eigen::BDCSVD<Eigen::MatrixXd> svd(set.states);
        const Eigen::VectorXd sv = svd.singularValues();
        CHECK(sv[2] <= 1e-10 * sv[0]);
    }

    SUBCASE("divergence bound per column") {
        SnapshotSet set = synthetic_wake(g, 3, 12);
        for (int s = 0; s < set.count(); ++s) {
            const Eigen::VectorXd c = set.states.col(s);
            CHECK(ops.divergence.multiply(c).norm() <= 1e-10 * c.norm());
        }
    }

    SUBCASE("four modes give rank at most eight") {
        SnapshotSet set = synthetic_wake(g, 4, 40);
        const Eigen::BDCSVD<Eigen::MatrixXd> svd(set.states);
        const Eigen::VectorXd sv = svd.singularValues();
        CHECK(sv[8] <= 1e-10 * sv[0]);
    }

    SUBCASE("bit-for-bit reproducible for a fixed seed") {
        SnapshotSet a = synthetic_wake(g, 2, 10, 123);
        SnapshotSet b = synthetic_wake(g, 2, 10, 123);
        CHECK((a.states - b.states).cwiseAbs().maxCoeff() == 0.0);
        SnapshotSet c = synthetic_wake(g, 2, 10, 124);
        CHECK((a.states - c.states).cwiseAbs().maxCoeff() > 0.0);
    }

    CHECK_THROWS_AS(synthetic_wake(g, 0, 10), ArgumentError);
    CHECK_THROWS_AS(synthetic_wake(g, 1, 1), ArgumentError);
}

TEST_CASE("interpolation pair properties") {
    GridSpec g = make_channel_grid(16, 8, 15.0, 7.0);

    SUBCASE("matching dims give the identity on fluid nodes") {
        InterpPair pair = build_interp(g, 8, 16);
        Rng rng(1);
        Eigen::VectorXd v(2 * g.node_count());
        for (int i = 0; i < v.size(); ++i) v[i] = rng.normal();
        const Eigen::VectorXd round = from_image(pair, to_image(pair, v));
        CHECK((round - v).cwiseAbs().maxCoeff() <= 1e-12);
    }

    SUBCASE("partition of unity maps a constant to a constant") {
        InterpPair pair = build_interp(g, 5, 9);
        Eigen::VectorXd v = Eigen::VectorXd::Ones(2 * g.node_count());
        CnnImage img = to_image(pair, v);
        CHECK((img.values.array() - 1.0).abs().maxCoeff() <= 1e-13);
        const Eigen::VectorXd back = from_image(pair, img);
        CHECK((back.array() - 1.0).abs().maxCoeff() <= 1e-13);
    }

    SUBCASE("coarse image loses information") {
        GridSpec big = make_channel_grid(64, 32, 40.0, 16.0);
        InterpPair pair = build_interp(big, 8, 8);
        SnapshotSet set = synthetic_wake(big, 2, 3);
        const Eigen::VectorXd v = set.states.col(1);
        const Eigen::VectorXd round = from_image(pair, to_image(pair, v));
        CHECK((round - v).norm() > 1e-3 * v.norm());
    }

    SUBCASE("to_image is linear and zero maps to zero") {
        InterpPair pair = build_interp(g, 6, 10);
        Rng rng(2);
        Eigen::VectorXd u(2 * g.node_count()), w(2 * g.node_count());
        for (int i = 0; i < u.size(); ++i) u[i] = rng.normal();
        for (int i = 0; i < w.size(); ++i) w[i] = rng.normal();
        CnnImage zu = to_image(pair, Eigen::VectorXd::Zero(2 * g.node_count()));
        CHECK(zu.values.norm() == 0.0);
        const Eigen::VectorXd sum = to_image(pair, u + w).values;
        const Eigen::VectorXd parts = to_image(pair, u).values + to_image(pair, w).values;
        CHECK((sum - parts).cwiseAbs().maxCoeff() <= 1e-14);
    }

    SUBCASE("masked nodes give zero interpolation rows") {
        GridSpec gm = make_channel_grid(16, 8, 15.0, 7.0);
        gm.add_circle_obstacle(7.0, 3.5, 1.5);
        InterpPair pair = build_interp(gm, 8, 16);
        Eigen::VectorXd ones = Eigen::VectorXd::Ones(2 * pair.height * pair.width);
        const Eigen::VectorXd v = pair.image_to_state.multiply(ones);
        bool found = false;
        for (int j = 0; j < gm.ny && !found; ++j)
            for (int i = 0; i < gm.nx && !found; ++i)
                if (gm.is_masked(i, j)) {
                    CHECK(v[gm.node(i, j)] == 0.0);
                    found = true;
                }
        CHECK(found);
        // unmasked rows keep the unit row sum
        CHECK(v[gm.node(1, 1)] == doctest::Approx(1.0).epsilon(1e-13));
    }

    CHECK_THROWS_AS(build_interp(g, 1, 8), ArgumentError);
}

TEST_CASE("image shape bookkeeping") {
    GridSpec g = make_channel_grid(64, 32, 40.0, 16.0, true, false);
    InterpPair pair = build_interp(g, 16, 32);
    SnapshotSet set = synthetic_wake(g, 1, 2);
    CnnImage img = to_image(pair, set.states.col(0));
    CHECK(img.height == 16);
    CHECK(img.width == 32);
    CHECK(img.values.size() == 2 * 16 * 32);
    CHECK_THROWS_AS(from_image(build_interp(g, 8, 8), img), ArgumentError);
}
