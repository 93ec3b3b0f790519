#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "wakerom/autoencoder.hpp"
#include "wakerom/operators.hpp"
#include "wakerom/pod.hpp"
#include "wakerom/sparse.hpp"

namespace wakerom {

enum class MethodKind { pod, cnn, cae, cpod, icae };

std::string method_name(MethodKind m);
MethodKind method_from_name(const std::string& name);

/// Affine materialization of a decoder: v = columns * code + offset.
struct DecoderMatrix {
    Eigen::MatrixXd columns;  // n_v x n_rho
    Eigen::VectorXd offset;   // zero for linear decoders
    bool affine = false;      // true when the offset is part of the model
};

/// Probes decode(e_i) - decode(0) per unit code vector and verifies the
/// superposition identity on random codes; throws StateError when the decoder
/// is not affine.
DecoderMatrix materialize_decoder(const std::function<VelocityState(const Eigen::VectorXd&)>& decode,
                                  int n_rho, uint64_t probe_seed = 7);

/// Precomputed convection coefficients: per cluster, one matrix per decoder
/// column plus one offset matrix for affine decoders.
struct LpvCoefficients {
    MethodKind method = MethodKind::pod;
    int n_rho = 0;
    int k = 1;
    std::vector<DecoderMatrix> decoders;               // per cluster
    std::vector<std::vector<CsrMatrix>> mode_matrices; // per cluster, n_rho entries
    std::vector<CsrMatrix> offset_matrices;            // per cluster, affine only

    bool clustered() const { return k > 1; }
};

LpvCoefficients precompute(const DiscreteOperators& ops, const PodBasis& basis);
LpvCoefficients precompute(const DiscreteOperators& ops, const CnnModel& model);
LpvCoefficients precompute(const DiscreteOperators& ops, const CaeModel& model);
LpvCoefficients precompute(const DiscreteOperators& ops, const ClusteredPodModel& model);
LpvCoefficients precompute(const DiscreteOperators& ops, const IcaeModel& model);

/// [N(b_l) + sum_i code_i N(basis_i^l)] v through the precomputed matrices.
/// label selects the cluster for clustered coefficient sets (pass 0 or -1
/// otherwise; -1 on a clustered set is an error).
Eigen::VectorXd lpv_convection(const LpvCoefficients& coeffs, const Eigen::VectorXd& code,
                               int label, const Eigen::VectorXd& v);

/// Reduced-coordinate operator blocks of one decoder, kept for inspection
/// (never time-integrated here).
struct ReducedMatrices {
    Eigen::MatrixXd hat_mass;                    // M Phi
    Eigen::MatrixXd hat_diffusion;               // A Phi
    std::vector<Eigen::MatrixXd> hat_convection; // N(phi_i) Phi per column
    Eigen::VectorXd hat_forcing;                 // A b - f (affine) or f
};

ReducedMatrices reduce_operators(const DiscreteOperators& ops, const DecoderMatrix& dec);

struct ResidualValue {
    double norm = 0.0;      // |Pi^T [(N(vt) vt + A vt) - (N(v) v + A v)]| in M^-1
    double relative = 0.0;  // against |Pi^T (N(v) v + A v)| in M^-1
    bool relative_defined = true;
};

/// Residual of the parametrized equations at one data point; the forcing
/// cancels in the difference and time derivatives are excluded.
ResidualValue residual_at(ProjectorContext& ctx, const VelocityState& v,
                          const VelocityState& vtilde);

/// Same residual with the reconstruction convection taken from the
/// precomputed coefficients.
ResidualValue residual_at(ProjectorContext& ctx, const LpvCoefficients& coeffs,
                          const Eigen::VectorXd& code, int label, const VelocityState& v);

} // namespace wakerom
