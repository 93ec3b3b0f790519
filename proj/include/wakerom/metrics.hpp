#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wakerom/datagen.hpp"
#include "wakerom/lpv.hpp"
#include "wakerom/operators.hpp"

namespace wakerom {

/// Encode/decode pair of one method, as used by the evaluation loop.
/// `label` is present for clustered methods and feeds the label-strip plots.
struct Parametrization {
    std::string name;
    int n_rho = 0;
    int k = 1;
    std::function<Eigen::VectorXd(const VelocityState&)> encode;
    std::function<VelocityState(const Eigen::VectorXd&)> decode;
    std::function<int(const Eigen::VectorXd&)> label;  // optional
};

/// Per-snapshot series and averages of the six evaluation metrics.
struct MetricsReport {
    std::string method;
    int n_rho = 0;
    int k = 1;
    std::string dataset_id;
    uint64_t seed = 0;

    std::vector<double> reconstruction;      // |v - vt| in M
    std::vector<double> rel_reconstruction;  // / |v| in M
    std::vector<double> convection;          // |N(v)v - N(vt)v| in M^-1
    std::vector<double> rel_convection;      // / |N(v)v| in M^-1
    std::vector<double> residual;            // lpv residual norm
    std::vector<double> rel_residual;
    std::vector<int> labels;                 // cluster per snapshot (clustered methods)

    double avg_reconstruction = 0.0;
    double avg_rel_reconstruction = 0.0;
    double avg_convection = 0.0;
    double avg_rel_convection = 0.0;
    double avg_residual = 0.0;
    double avg_rel_residual = 0.0;

    void finalize();  // averages from the series
};

/// Runs the six metrics over every snapshot. Relative metrics with a
/// denominator under 1e-300 are recorded as NaN ("undefined" in CSV output).
/// Throws when a non-finite intermediate appears, naming snapshot and metric.
MetricsReport evaluate(const DiscreteOperators& ops, ProjectorContext& ctx,
                       const SnapshotSet& snapshots, const Parametrization& param);

struct ComparisonRow {
    int n_rho;
    std::string method;
    double avg_reconstruction;
    double avg_rel_reconstruction;
    double avg_convection;
    double avg_rel_convection;
    double avg_residual;
    double avg_rel_residual;
};

/// Rows ordered by (n_rho, averaged reconstruction error, method name).
/// All reports must share one dataset id.
std::vector<ComparisonRow> compare(const std::vector<MetricsReport>& reports);

} // namespace wakerom
