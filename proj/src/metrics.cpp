#include "wakerom/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wakerom/errors.hpp"

namespace wakerom {

namespace {

double series_mean(const std::vector<double>& s) {
    double acc = 0.0;
    for (double v : s) acc += v;
    return s.empty() ? 0.0 : acc / static_cast<double>(s.size());
}

constexpr double kDenomFloor = 1e-300;

double guarded_ratio(double num, double den) {
    if (den < kDenomFloor) return std::numeric_limits<double>::quiet_NaN();
    return num / den;
}

} // namespace

void MetricsReport::finalize() {
    avg_reconstruction = series_mean(reconstruction);
    avg_rel_reconstruction = series_mean(rel_reconstruction);
    avg_convection = series_mean(convection);
    avg_rel_convection = series_mean(rel_convection);
    avg_residual = series_mean(residual);
    avg_rel_residual = series_mean(rel_residual);
}

MetricsReport evaluate(const DiscreteOperators& ops, ProjectorContext& ctx,
                       const SnapshotSet& snapshots, const Parametrization& param) {
    snapshots.validate();
    if (!param.encode || !param.decode)
        throw ArgumentError("evaluate: parametrization needs encode and decode");

    const int t_count = snapshots.count();
    MetricsReport rep;
    rep.method = param.name;
    rep.n_rho = param.n_rho;
    rep.k = param.k;
    rep.reconstruction.resize(t_count);
    rep.rel_reconstruction.resize(t_count);
    rep.convection.resize(t_count);
    rep.rel_convection.resize(t_count);
    rep.residual.resize(t_count);
    rep.rel_residual.resize(t_count);
    if (param.label) rep.labels.resize(t_count);

    auto checked = [&](double value, int snap, const char* metric) {
        // NaN marks an undefined relative metric, which is allowed
        if (std::isinf(value))
            throw SolverError("metric '" + std::string(metric) + "' diverged at snapshot " +
                                  std::to_string(snap),
                              value);
        return value;
    };

    for (int s = 0; s < t_count; ++s) {
        const VelocityState v = snapshots.states.col(s);
        const Eigen::VectorXd code = param.encode(v);
        if (!code.allFinite())
            throw SolverError("metric 'encode' produced a non-finite code at snapshot " +
                                  std::to_string(s),
                              0.0);
        const VelocityState vt = param.decode(code);
        if (!vt.allFinite())
            throw SolverError("metric 'decode' produced a non-finite state at snapshot " +
                                  std::to_string(s),
                              0.0);
        if (param.label) rep.labels[s] = param.label(code);

        const double vnorm = mnorm(ops, v);
        rep.reconstruction[s] = checked(mnorm(ops, v - vt), s, "reconstruction");
        rep.rel_reconstruction[s] =
            checked(guarded_ratio(rep.reconstruction[s], vnorm), s, "rel_reconstruction");

        const Eigen::VectorXd nvv = apply_convection(ops, v, v);
        const Eigen::VectorXd ntv = apply_convection(ops, vt, v);
        const double conv_norm = minv_norm(ops, nvv);
        rep.convection[s] = checked(minv_norm(ops, nvv - ntv), s, "convection");
        rep.rel_convection[s] =
            checked(guarded_ratio(rep.convection[s], conv_norm), s, "rel_convection");

        const ResidualValue res = residual_at(ctx, v, vt);
        rep.residual[s] = checked(res.norm, s, "residual");
        rep.rel_residual[s] = res.relative_defined
                                  ? checked(res.relative, s, "rel_residual")
                                  : std::numeric_limits<double>::quiet_NaN();
    }
    rep.finalize();
    return rep;
}

std::vector<ComparisonRow> compare(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) return {};
    for (const MetricsReport& r : reports)
        if (r.dataset_id != reports.front().dataset_id)
            throw ArgumentError("compare: reports come from different datasets");

    std::vector<ComparisonRow> rows;
    rows.reserve(reports.size());
    for (const MetricsReport& r : reports)
        rows.push_back({r.n_rho, r.method, r.avg_reconstruction, r.avg_rel_reconstruction,
                        r.avg_convection, r.avg_rel_convection, r.avg_residual,
                        r.avg_rel_residual});
    std::sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
        if (a.n_rho != b.n_rho) return a.n_rho < b.n_rho;
        if (a.avg_reconstruction != b.avg_reconstruction)
            return a.avg_reconstruction < b.avg_reconstruction;
        return a.method < b.method;
    });
    return rows;
}

} // namespace wakerom
