#include "wakerom/lpv.hpp"

#include <cmath>

#include "wakerom/errors.hpp"
#include "wakerom/rng.hpp"

namespace wakerom {

std::string method_name(MethodKind m) {
    switch (m) {
        case MethodKind::pod: return "pod";
        case MethodKind::cnn: return "cnn";
        case MethodKind::cae: return "cae";
        case MethodKind::cpod: return "cpod";
        case MethodKind::icae: return "icae";
    }
    return "?";
}

MethodKind method_from_name(const std::string& name) {
    if (name == "pod") return MethodKind::pod;
    if (name == "cnn") return MethodKind::cnn;
    if (name == "cae") return MethodKind::cae;
    if (name == "cpod") return MethodKind::cpod;
    if (name == "icae") return MethodKind::icae;
    throw ArgumentError("unknown method '" + name + "'");
}

DecoderMatrix materialize_decoder(
    const std::function<VelocityState(const Eigen::VectorXd&)>& decode, int n_rho,
    uint64_t probe_seed) {
    DecoderMatrix dm;
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(n_rho);
    dm.offset = decode(zero);
    const auto n_v = dm.offset.size();
    dm.columns.resize(n_v, n_rho);
    for (int i = 0; i < n_rho; ++i) {
        Eigen::VectorXd e = zero;
        e[i] = 1.0;
        dm.columns.col(i) = decode(e) - dm.offset;
    }
    dm.affine = dm.offset.norm() > 0.0;

    // superposition check: a probed matrix is only valid for affine decoders
    Rng rng(probe_seed);
    for (int trial = 0; trial < 3; ++trial) {
        Eigen::VectorXd code(n_rho);
        for (int i = 0; i < n_rho; ++i) code[i] = rng.normal();
        const Eigen::VectorXd direct = decode(code);
        const Eigen::VectorXd linear = dm.columns * code + dm.offset;
        const double scale = std::max(direct.norm(), 1e-30);
        if ((direct - linear).norm() > 1e-8 * scale)
            throw StateError("decoder failed the affinity probe; cannot precompute");
    }
    return dm;
}

namespace {

void append_cluster(LpvCoefficients& c, const DiscreteOperators& ops, DecoderMatrix dm) {
    std::vector<CsrMatrix> modes(dm.columns.cols());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < dm.columns.cols(); ++i)
        modes[i] = assemble_convection(ops, dm.columns.col(i));
    c.mode_matrices.push_back(std::move(modes));
    if (dm.affine) c.offset_matrices.push_back(assemble_convection(ops, dm.offset));
    c.decoders.push_back(std::move(dm));
}

} // namespace

LpvCoefficients precompute(const DiscreteOperators& ops, const PodBasis& basis) {
    LpvCoefficients c;
    c.method = MethodKind::pod;
    c.n_rho = basis.n_rho;
    DecoderMatrix dm;
    dm.columns = basis.modes;
    dm.offset = Eigen::VectorXd::Zero(ops.n_v);
    dm.affine = false;
    append_cluster(c, ops, std::move(dm));
    return c;
}

LpvCoefficients precompute(const DiscreteOperators& ops, const CnnModel& model) {
    LpvCoefficients c;
    c.method = MethodKind::cnn;
    c.n_rho = static_cast<int>(model.mix.cols());
    DecoderMatrix dm;
    dm.columns = model.basis * model.mix;
    dm.offset = Eigen::VectorXd::Zero(ops.n_v);
    dm.affine = false;
    append_cluster(c, ops, std::move(dm));
    return c;
}

LpvCoefficients precompute(const DiscreteOperators& ops, const CaeModel& model) {
    LpvCoefficients c;
    c.method = MethodKind::cae;
    c.n_rho = model.decoder.n_rho;
    DecoderMatrix dm = materialize_decoder(
        [&](const Eigen::VectorXd& code) { return decode_cae(model, code); },
        model.decoder.n_rho);
    dm.affine = true;  // the deconvolutional decoder carries an offset by construction
    append_cluster(c, ops, std::move(dm));
    return c;
}

LpvCoefficients precompute(const DiscreteOperators& ops, const ClusteredPodModel& model) {
    LpvCoefficients c;
    c.method = MethodKind::cpod;
    c.n_rho = model.global.n_rho;
    c.k = model.kmeans.k;
    for (const Eigen::MatrixXd& composed : model.composed_decoders) {
        DecoderMatrix dm;
        dm.columns = composed;
        dm.offset = Eigen::VectorXd::Zero(ops.n_v);
        dm.affine = false;
        append_cluster(c, ops, std::move(dm));
    }
    return c;
}

LpvCoefficients precompute(const DiscreteOperators& ops, const IcaeModel& model) {
    LpvCoefficients c;
    c.method = MethodKind::icae;
    c.n_rho = model.encoder.n_rho;
    c.k = model.kmeans.k;
    for (const CaeDecoder& dec : model.decoders) {
        DecoderMatrix dm = materialize_decoder(
            [&](const Eigen::VectorXd& code) { return dec.forward(code); }, dec.n_rho);
        dm.affine = true;
        append_cluster(c, ops, std::move(dm));
    }
    return c;
}

Eigen::VectorXd lpv_convection(const LpvCoefficients& coeffs, const Eigen::VectorXd& code,
                               int label, const Eigen::VectorXd& v) {
    if (code.size() != coeffs.n_rho) throw ArgumentError("lpv_convection: code size mismatch");
    if (coeffs.clustered()) {
        if (label < 0) throw ArgumentError("lpv_convection: clustered coefficients need a label");
        if (label >= coeffs.k) throw ArgumentError("lpv_convection: label out of range");
    } else {
        label = 0;
    }
    const auto& modes = coeffs.mode_matrices[label];
    Eigen::VectorXd y = Eigen::VectorXd::Zero(v.size());
    Eigen::VectorXd tmp;
    if (!coeffs.offset_matrices.empty()) {
        coeffs.offset_matrices[label].multiply_into(v, y);
    }
    for (int i = 0; i < coeffs.n_rho; ++i) {
        modes[i].multiply_into(v, tmp);
        y += code[i] * tmp;
    }
    return y;
}

ReducedMatrices reduce_operators(const DiscreteOperators& ops, const DecoderMatrix& dec) {
    ReducedMatrices red;
    red.hat_mass = ops.mass.asDiagonal() * dec.columns;
    red.hat_diffusion = ops.diffusion.multiply_dense(dec.columns);
    for (int i = 0; i < dec.columns.cols(); ++i)
        red.hat_convection.push_back(
            assemble_convection(ops, dec.columns.col(i)).multiply_dense(dec.columns));
    red.hat_forcing =
        dec.affine ? Eigen::VectorXd(ops.diffusion.multiply(dec.offset) - ops.forcing)
                   : ops.forcing;
    return red;
}

ResidualValue residual_at(ProjectorContext& ctx, const VelocityState& v,
                          const VelocityState& vtilde) {
    const DiscreteOperators& ops = ctx.ops();
    if (v.size() != ops.n_v || vtilde.size() != ops.n_v)
        throw ArgumentError("residual_at: state size mismatch");
    Eigen::VectorXd truth = apply_convection(ops, v, v) + ops.diffusion.multiply(v);
    Eigen::VectorXd recon =
        apply_convection(ops, vtilde, vtilde) + ops.diffusion.multiply(vtilde);

    ResidualValue out;
    out.norm = minv_norm(ops, apply_pi(ctx, recon - truth, /*transpose=*/true));
    const double denom = minv_norm(ops, apply_pi(ctx, truth, /*transpose=*/true));
    if (denom < 1e-300) {
        out.relative_defined = false;
        out.relative = 0.0;
    } else {
        out.relative = out.norm / denom;
    }
    return out;
}

ResidualValue residual_at(ProjectorContext& ctx, const LpvCoefficients& coeffs,
                          const Eigen::VectorXd& code, int label, const VelocityState& v) {
    const DiscreteOperators& ops = ctx.ops();
    const int l = coeffs.clustered() ? label : 0;
    if (coeffs.clustered() && (l < 0 || l >= coeffs.k))
        throw ArgumentError("residual_at: invalid cluster label");
    const DecoderMatrix& dec = coeffs.decoders[l];
    const Eigen::VectorXd vtilde = dec.columns * code + dec.offset;

    Eigen::VectorXd truth = apply_convection(ops, v, v) + ops.diffusion.multiply(v);
    Eigen::VectorXd recon =
        lpv_convection(coeffs, code, l, vtilde) + ops.diffusion.multiply(vtilde);

    ResidualValue out;
    out.norm = minv_norm(ops, apply_pi(ctx, recon - truth, /*transpose=*/true));
    const double denom = minv_norm(ops, apply_pi(ctx, truth, /*transpose=*/true));
    if (denom < 1e-300) {
        out.relative_defined = false;
    } else {
        out.relative = out.norm / denom;
    }
    return out;
}

} // namespace wakerom
