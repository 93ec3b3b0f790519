#include "wakerom/clustering.hpp"

#include <cmath>
#include <limits>

#include "wakerom/errors.hpp"
#include "wakerom/rng.hpp"

namespace wakerom {

namespace {

double sqdist(const Eigen::MatrixXd& codes, int row, const Eigen::RowVectorXd& c) {
    return (codes.row(row) - c).squaredNorm();
}

int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x) {
    int best = 0;
    double best_d = (x - centroids.row(0)).squaredNorm();
    for (int l = 1; l < centroids.rows(); ++l) {
        const double d = (x - centroids.row(l)).squaredNorm();
        if (d < best_d) {  // strict: lowest index wins ties
            best_d = d;
            best = l;
        }
    }
    return best;
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& codes, int k, Rng& rng) {
    const int t = static_cast<int>(codes.rows());
    Eigen::MatrixXd centroids(k, codes.cols());
    centroids.row(0) = codes.row(static_cast<int>(rng.uniform_index(t)));
    Eigen::VectorXd d2(t);
    for (int r = 0; r < t; ++r) d2[r] = sqdist(codes, r, centroids.row(0));
    for (int l = 1; l < k; ++l) {
        const double total = d2.sum();
        int pick;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = t - 1;
            for (int r = 0; r < t; ++r) {
                acc += d2[r];
                if (acc >= target) {
                    pick = r;
                    break;
                }
            }
        } else {
            pick = static_cast<int>(rng.uniform_index(t));
        }
        centroids.row(l) = codes.row(pick);
        for (int r = 0; r < t; ++r) d2[r] = std::min(d2[r], sqdist(codes, r, centroids.row(l)));
    }
    return centroids;
}

KMeansModel lloyd_run(const Eigen::MatrixXd& codes, int k, Rng& rng, int max_iter) {
    const int t = static_cast<int>(codes.rows());
    KMeansModel m;
    m.k = k;
    m.centroids = kmeanspp_init(codes, k, rng);
    m.labels.assign(t, -1);

    std::vector<int> counts(k);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (int r = 0; r < t; ++r) {
            const int l = nearest_centroid(m.centroids, codes.row(r));
            if (l != m.labels[r]) changed = true;
            m.labels[r] = l;
        }
        if (!changed) break;

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, codes.cols());
        std::fill(counts.begin(), counts.end(), 0);
        for (int r = 0; r < t; ++r) {
            sums.row(m.labels[r]) += codes.row(r);
            counts[m.labels[r]]++;
        }
        for (int l = 0; l < k; ++l) {
            if (counts[l] > 0) {
                m.centroids.row(l) = sums.row(l) / counts[l];
            } else {
                // re-seed an empty cluster to the farthest point
                int far = 0;
                double far_d = -1.0;
                for (int r = 0; r < t; ++r) {
                    const double d = sqdist(codes, r, m.centroids.row(m.labels[r]));
                    if (d > far_d) {
                        far_d = d;
                        far = r;
                    }
                }
                m.centroids.row(l) = codes.row(far);
            }
        }
        double inertia = 0.0;
        for (int r = 0; r < t; ++r) inertia += sqdist(codes, r, m.centroids.row(m.labels[r]));
        m.inertia_history.push_back(inertia);
        m.iterations = it + 1;
    }

    // final sweep so stored labels match the stored centroids exactly
    for (int r = 0; r < t; ++r) m.labels[r] = nearest_centroid(m.centroids, codes.row(r));
    double inertia = 0.0;
    for (int r = 0; r < t; ++r) inertia += sqdist(codes, r, m.centroids.row(m.labels[r]));
    m.inertia = inertia;
    if (m.inertia_history.empty()) m.inertia_history.push_back(inertia);
    return m;
}

} // namespace

KMeansModel kmeans_fit(const Eigen::MatrixXd& codes, int k, uint64_t seed, int restarts,
                       int max_iter) {
    const int t = static_cast<int>(codes.rows());
    if (k < 1) throw ArgumentError("kmeans: k must be >= 1");
    if (t < k) throw ArgumentError("kmeans: fewer samples than clusters");
    if (restarts < 1) throw ArgumentError("kmeans: restarts must be >= 1");

    Rng rng(seed);
    KMeansModel best;
    for (int run = 0; run < restarts; ++run) {
        KMeansModel m = lloyd_run(codes, k, rng, max_iter);
        m.seed = seed;
        if (run == 0 || m.inertia < best.inertia) best = std::move(m);
    }
    return best;
}

int kmeans_assign(const KMeansModel& model, const Eigen::VectorXd& code) {
    if (!model.fitted()) throw StateError("kmeans_assign: model is not fitted");
    if (code.size() != model.centroids.cols())
        throw ArgumentError("kmeans_assign: code dimension mismatch");
    return nearest_centroid(model.centroids, code.transpose());
}

} // namespace wakerom
