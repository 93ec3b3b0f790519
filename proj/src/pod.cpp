#include "wakerom/pod.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

#include "wakerom/errors.hpp"

namespace wakerom {

namespace {

// Left singular vectors and all singular values of x, descending.
void snapshot_svd(const Eigen::MatrixXd& x, Eigen::MatrixXd& u, Eigen::VectorXd& sigma,
                  int wanted) {
    const int n = static_cast<int>(x.rows());
    const int t = static_cast<int>(x.cols());
    const int m = std::min(n, t);

    Eigen::MatrixXd gram;
    const bool use_cols = t <= n;
    gram = use_cols ? Eigen::MatrixXd(x.transpose() * x) : Eigen::MatrixXd(x * x.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);

    sigma.resize(m);
    for (int i = 0; i < m; ++i) {
        const double lam = eig.eigenvalues()[m - 1 - i];
        sigma[i] = lam > 0.0 ? std::sqrt(lam) : 0.0;
    }
    const double floor = sigma[0] * 1e-13;
    for (int i = 0; i < wanted; ++i) {
        if (!(sigma[i] > floor))
            throw ArgumentError("snapshot matrix rank is below the requested " +
                                std::to_string(wanted) + " modes (sigma_" +
                                std::to_string(i + 1) + " negligible)");
    }

    u.resize(n, wanted);
    for (int i = 0; i < wanted; ++i) {
        const Eigen::VectorXd vec = eig.eigenvectors().col(m - 1 - i);
        if (use_cols)
            u.col(i) = x * (vec / sigma[i]);
        else
            u.col(i) = vec;
    }
    // one modified Gram-Schmidt pass to clean roundoff; prefix spans unchanged
    for (int i = 0; i < wanted; ++i) {
        for (int j = 0; j < i; ++j) u.col(i) -= u.col(j).dot(u.col(i)) * u.col(j);
        u.col(i) /= u.col(i).norm();
    }
}

} // namespace

PodBasis pod_fit(const Eigen::MatrixXd& snapshots, int n_rho) {
    const int m = static_cast<int>(std::min(snapshots.rows(), snapshots.cols()));
    if (n_rho < 1 || n_rho > m)
        throw ArgumentError("pod_fit: n_rho must lie in [1, min(n_v, T)]");
    PodBasis b;
    b.n_rho = n_rho;
    snapshot_svd(snapshots, b.modes, b.singular_values, n_rho);
    return b;
}

PodBasis pod_fit(const Eigen::MatrixXd& snapshots, int n_rho, const Eigen::VectorXd& mass) {
    if (mass.size() != snapshots.rows()) throw ArgumentError("pod_fit: mass size mismatch");
    const Eigen::VectorXd root = mass.cwiseSqrt();
    PodBasis b = pod_fit(root.asDiagonal() * snapshots, n_rho);
    b.mass_weighted = true;
    b.weight = mass;
    b.modes = root.cwiseInverse().asDiagonal() * b.modes;  // M-orthonormal
    return b;
}

Eigen::VectorXd pod_encode(const PodBasis& basis, const Eigen::VectorXd& v) {
    if (v.size() != basis.modes.rows()) throw ArgumentError("pod_encode: state size mismatch");
    if (basis.mass_weighted)
        return basis.modes.transpose() * basis.weight.cwiseProduct(v);
    return basis.modes.transpose() * v;
}

Eigen::VectorXd pod_decode(const PodBasis& basis, const Eigen::VectorXd& code) {
    if (code.size() != basis.n_rho) throw ArgumentError("pod_decode: code size mismatch");
    return basis.modes * code;
}

ClusteredPodModel cpod_fit(const Eigen::MatrixXd& snapshots, int n_rho,
                           const KMeansModel& kmeans) {
    if (!kmeans.fitted()) throw StateError("cpod_fit: k-means model is not fitted");
    if (kmeans.labels.size() != static_cast<size_t>(snapshots.cols()))
        throw ArgumentError("cpod_fit: k-means labels do not match snapshot count");

    ClusteredPodModel model;
    model.global = pod_fit(snapshots, n_rho);
    model.kmeans = kmeans;

    for (int l = 0; l < kmeans.k; ++l) {
        std::vector<int> members;
        for (size_t s = 0; s < kmeans.labels.size(); ++s)
            if (kmeans.labels[s] == l) members.push_back(static_cast<int>(s));
        if (static_cast<int>(members.size()) < n_rho)
            throw ArgumentError("cpod_fit: cluster " + std::to_string(l + 1) + " has only " +
                                std::to_string(members.size()) + " snapshots for " +
                                std::to_string(n_rho) + " modes");
        Eigen::MatrixXd sub(snapshots.rows(), members.size());
        for (size_t c = 0; c < members.size(); ++c) sub.col(c) = snapshots.col(members[c]);
        PodBasis local = pod_fit(sub, n_rho);
        model.composed_decoders.push_back(local.modes *
                                          (local.modes.transpose() * model.global.modes));
        model.cluster_bases.push_back(std::move(local.modes));
    }
    return model;
}

int cpod_label(const ClusteredPodModel& model, const Eigen::VectorXd& code) {
    return kmeans_assign(model.kmeans, code);
}

Eigen::VectorXd cpod_decode(const ClusteredPodModel& model, const Eigen::VectorXd& code) {
    if (code.size() != model.global.n_rho) throw ArgumentError("cpod_decode: code size mismatch");
    return model.composed_decoders[cpod_label(model, code)] * code;
}

} // namespace wakerom
