#pragma once

#include <Eigen/Core>
#include <vector>

#include "wakerom/clustering.hpp"

namespace wakerom {

/// Truncated orthonormal snapshot basis with the full singular value list.
struct PodBasis {
    Eigen::MatrixXd modes;            // n_v x n_rho, orthonormal columns
    Eigen::VectorXd singular_values;  // all min(n_v, T) values, non-increasing
    int n_rho = 0;
    bool mass_weighted = false;
    Eigen::VectorXd weight;  // mass diagonal when mass_weighted
};

/// Leading left singular directions of the snapshot matrix (columns are
/// snapshots), via the method of snapshots when T <= n_v. Throws when the
/// numerical rank falls below n_rho; the basis is never padded.
PodBasis pod_fit(const Eigen::MatrixXd& snapshots, int n_rho);

/// Optional mass-weighted variant (off the default path): the basis is
/// M-orthonormal and encode uses V^T M v.
PodBasis pod_fit(const Eigen::MatrixXd& snapshots, int n_rho, const Eigen::VectorXd& mass);

Eigen::VectorXd pod_encode(const PodBasis& basis, const Eigen::VectorXd& v);
Eigen::VectorXd pod_decode(const PodBasis& basis, const Eigen::VectorXd& code);

/// Global basis plus per-cluster bases V_l and the cached composed decoders
/// V_l (V_l^T V).
struct ClusteredPodModel {
    PodBasis global;
    KMeansModel kmeans;
    std::vector<Eigen::MatrixXd> cluster_bases;
    std::vector<Eigen::MatrixXd> composed_decoders;
};

/// Per-cluster truncated bases from the snapshots of each k-means cluster.
/// The k-means model must hold one label per snapshot column; every cluster
/// needs at least n_rho members.
ClusteredPodModel cpod_fit(const Eigen::MatrixXd& snapshots, int n_rho,
                           const KMeansModel& kmeans);

int cpod_label(const ClusteredPodModel& model, const Eigen::VectorXd& code);
Eigen::VectorXd cpod_decode(const ClusteredPodModel& model, const Eigen::VectorXd& code);

} // namespace wakerom
