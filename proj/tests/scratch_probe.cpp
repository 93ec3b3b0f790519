// scratch calibration driver (not part of the test suite)
#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <vector>

#include "wakerom/config.hpp"
#include "wakerom/datagen.hpp"
#include "wakerom/operators.hpp"
#include "wakerom/pod.hpp"

using namespace wakerom;

int main(int argc, char** argv) {
    double re = argc > 1 ? std::atof(argv[1]) : 40.0;
    double force = argc > 2 ? std::atof(argv[2]) : 0.02;
    double t_end = argc > 3 ? std::atof(argv[3]) : 210.0;
    double t_start = argc > 4 ? std::atof(argv[4]) : 150.0;

    ExperimentConfig cfg = preset_config("single");
    cfg.reynolds = re;
    cfg.body_force_x = force;
    GridSpec g = cfg.make_grid();
    DiscreteOperators ops = assemble_operators(g, cfg.reynolds);

    auto t0 = std::chrono::steady_clock::now();
    SimulateOptions opts;
    opts.t_end = t_end;
    opts.dt = cfg.dt;
    opts.sample_every = 1;
    opts.t_sample_start = t_start;
    SnapshotSet set = simulate_wake(ops, opts);
    auto t1 = std::chrono::steady_clock::now();
    double secs = std::chrono::duration<double>(t1 - t0).count();

    // probe: vy three diameters downstream of the obstacle center
    const double diam = 2.0 * cfg.obstacles[0].radius;
    const double px = cfg.obstacles[0].cx + 3.0 * diam;
    const double py = cfg.obstacles[0].cy;
    int pi = static_cast<int>(std::round((px - g.x0) / g.dx));
    int pj = static_cast<int>(std::round((py - g.y0) / g.dy));
    const int probe = g.node_count() + g.node(pi, pj);

    const int t = set.count();
    std::vector<double> trace(t);
    double mean = 0.0;
    for (int s = 0; s < t; ++s) {
        trace[s] = set.states(probe, s);
        mean += trace[s];
    }
    mean /= t;
    double amp = 0.0;
    for (double& v : trace) {
        v -= mean;
        amp = std::max(amp, std::abs(v));
    }

    // dominant DFT peak vs the runner-up
    int kmax = 0;
    double best = 0.0, second = 0.0;
    std::vector<double> mags(t / 2, 0.0);
    for (int k = 1; k < t / 2; ++k) {
        std::complex<double> acc = 0.0;
        for (int s = 0; s < t; ++s)
            acc += trace[s] * std::polar(1.0, -2.0 * M_PI * k * s / t);
        mags[k] = std::abs(acc);
        if (mags[k] > best) {
            best = mags[k];
            kmax = k;
        }
    }
    for (int k = 1; k < t / 2; ++k) {
        if (std::abs(k - kmax) <= 2) continue;  // skip the peak's neighborhood
        second = std::max(second, mags[k]);
    }

    double vmax = 0.0, vmean = 0.0;
    const Eigen::VectorXd last = set.states.col(t - 1);
    vmax = last.cwiseAbs().maxCoeff();
    vmean = last.head(g.node_count()).mean();

    std::printf("re=%g force=%g sim=%.1fs samples=%d\n", re, force, secs, t);
    std::printf("probe amp=%.4g vmax=%.3g vmean_x=%.3g\n", amp, vmax, vmean);
    std::printf("peak k=%d best=%.4g second=%.4g ratio=%.2f\n", kmax, best, second,
                second > 0 ? best / second : 0.0);

    // singular value decay of the sampled window (training-set surrogate)
    Eigen::BDCSVD<Eigen::MatrixXd> svd(set.states);
    const Eigen::VectorXd sv = svd.singularValues();
    std::printf("sv: ");
    for (int i = 0; i < std::min<int>(14, sv.size()); ++i)
        std::printf("%.3g ", sv[i] / sv[0]);
    std::printf("\n");
    return 0;
}
