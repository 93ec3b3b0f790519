#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace wakerom {

/// k-means model over reduced coordinates. Labels are 0-based internally.
struct KMeansModel {
    int k = 0;
    Eigen::MatrixXd centroids;            // k x dim
    std::vector<int> labels;              // training assignments
    std::vector<double> inertia_history;  // per accepted Lloyd iteration
    double inertia = 0.0;
    int iterations = 0;
    uint64_t seed = 0;

    bool fitted() const { return k > 0 && centroids.rows() == k; }
};

/// Lloyd iterations from k-means++ starts. Rows of `codes` are samples.
/// Stops when assignments stop changing or after max_iter sweeps; empty
/// clusters are re-seeded to the farthest point. With restarts > 1 the run
/// with the lowest final inertia wins.
KMeansModel kmeans_fit(const Eigen::MatrixXd& codes, int k, uint64_t seed,
                       int restarts = 1, int max_iter = 300);

/// Nearest centroid in Euclidean distance, lowest index on ties.
int kmeans_assign(const KMeansModel& model, const Eigen::VectorXd& code);

} // namespace wakerom
