#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wakerom/datagen.hpp"
#include "wakerom/clustering.hpp"
#include "wakerom/pod.hpp"
#include "wakerom/sparse.hpp"

namespace wakerom {

struct TensorShape {
    int c = 0, h = 0, w = 0;
    int size() const { return c * h * w; }
    bool operator==(const TensorShape&) const = default;
};

/// Strided convolution; output dims are ceil(in/stride) for the default
/// 5x5 / stride 2 / pad 2 setup.
struct ConvLayer {
    int in_c = 0, out_c = 0;
    int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
    int kernel = 5, stride = 2, pad = 2;
    Eigen::VectorXd weights;  // out_c * in_c * k * k
    Eigen::VectorXd bias;     // out_c

    void forward(const double* in, double* out) const;
    void backward(const double* in, const double* gout, double* gin, double* gw,
                  double* gb) const;
};

/// Transposed convolution with explicit output dims (the mirror of a
/// ConvLayer that mapped out dims -> in dims).
struct DeconvLayer {
    int in_c = 0, out_c = 0;
    int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
    int kernel = 5, stride = 2, pad = 2;
    Eigen::VectorXd weights;  // in_c * out_c * k * k
    Eigen::VectorXd bias;     // out_c

    void forward(const double* in, double* out) const;
    void backward(const double* in, const double* gout, double* gin, double* gw,
                  double* gb) const;
};

struct FcLayer {
    int in_n = 0, out_n = 0;
    Eigen::VectorXd weights;  // out_n * in_n, row-major
    Eigen::VectorXd bias;     // out_n

    void forward(const double* in, double* out) const;
    void backward(const double* in, const double* gout, double* gin, double* gw,
                  double* gb) const;
};

/// Fixed-pattern sparse map with trainable values (the decoder's trailing
/// interpolation layer). No bias: the decoder offset lives upstream.
struct SparseLinearLayer {
    CsrMatrix map;

    void forward(const double* in, double* out) const;
    void backward(const double* in, const double* gout, double* gin, double* gvals) const;
};

double elu(double z);
double elu_grad_from_pre(double z);

/// Convolutional encoder: (conv -> ELU)* -> flatten -> affine, producing the
/// n_rho-dimensional code.
struct Encoder {
    TensorShape input;
    std::vector<ConvLayer> convs;
    FcLayer fc;
    int n_rho = 0;
    bool elu_enabled = true;  // disabled only by linear-path diagnostics

    Eigen::VectorXd forward(const Eigen::VectorXd& image) const;
};

/// Affine deconvolutional decoder: affine -> unflatten -> deconv stack ->
/// sparse interpolation onto the state. No activations anywhere, so the whole
/// map is affine in the code.
struct CaeDecoder {
    int n_rho = 0;
    FcLayer fc;
    TensorShape unflatten;
    std::vector<DeconvLayer> deconvs;
    SparseLinearLayer interp;

    Eigen::VectorXd forward(const Eigen::VectorXd& code) const;
};

struct CaeModel {
    Encoder encoder;
    CaeDecoder decoder;
    TensorShape image_shape;
};

/// Encoder plus a trainable map onto a fixed truncated snapshot basis.
struct CnnModel {
    Encoder encoder;
    Eigen::MatrixXd basis;      // V, n_v x r, fixed during training
    Eigen::MatrixXd mix;        // W, r x n_rho, trainable
    TensorShape image_shape;
};

/// Frozen encoder, cluster model on the codes, one decoder per cluster.
struct IcaeModel {
    Encoder encoder;
    KMeansModel kmeans;
    std::vector<CaeDecoder> decoders;
    TensorShape image_shape;
};

struct TrainConfig {
    int epochs = 200;
    int batch = 64;
    double learning_rate = 1e-3;
    std::vector<double> milestones = {0.5, 0.75};  // fractions of epochs
    double decay = 0.1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    uint64_t seed = 1;

    void validate() const;
};

struct ArchitectureSpec {
    std::vector<int> encoder_channels = {4, 8, 8};
    std::vector<int> decoder_channels = {8, 8, 4};
    int kernel = 5, stride = 2, pad = 2;
};

/// Fresh CAE with the decoder's trailing layer initialized from the
/// image-to-state interpolation (extra deconv channels start at zero inside
/// the same pattern).
CaeModel make_cae(const GridSpec& grid, const InterpPair& interp, int n_rho,
                  const ArchitectureSpec& arch, uint64_t seed);

CnnModel make_cnn(const InterpPair& interp, const PodBasis& basis, int n_rho,
                  const std::vector<int>& encoder_channels, uint64_t seed);

Eigen::VectorXd encode(const CaeModel& model, const CnnImage& image);
Eigen::VectorXd encode(const CnnModel& model, const CnnImage& image);
Eigen::VectorXd encode(const IcaeModel& model, const CnnImage& image);

VelocityState decode_cae(const CaeModel& model, const Eigen::VectorXd& code);
VelocityState decode_cnn(const CnnModel& model, const Eigen::VectorXd& code);
VelocityState decode_icae(const IcaeModel& model, const Eigen::VectorXd& code);

struct TrainResult {
    std::vector<double> loss_curve;  // per-epoch mean sample loss
    double initial_loss = 0.0;
    double final_loss = 0.0;
    int best_epoch = -1;
};

/// Minimizes the elementwise MSE between states and reconstructions over
/// shuffled mini-batches with Adam and a multistep schedule. Keeps the
/// best-epoch parameters. Deterministic for a fixed seed.
TrainResult train_cae(CaeModel& model, const SnapshotSet& data, const InterpPair& interp,
                      const TrainConfig& cfg);

TrainResult train_cnn(CnnModel& model, const SnapshotSet& data, const InterpPair& interp,
                      const TrainConfig& cfg);

/// Trains k cluster decoders from a pretrained CAE while freezing the encoder.
/// Each decoder starts from the CAE decoder and is accepted only if it does
/// not regress its cluster (MSE and mean reconstruction norm), so the
/// clustered model never ends up worse than its parent on the training set.
IcaeModel train_icae(const CaeModel& cae, const KMeansModel& kmeans, const SnapshotSet& data,
                     const InterpPair& interp, const TrainConfig& cfg,
                     std::vector<TrainResult>* curves = nullptr);

struct GradientCheckReport {
    double max_rel_error = 0.0;
    std::string worst_parameter;
    int checked = 0;
    std::vector<std::string> skipped;  // parameters near an ELU kink
};

/// Central finite differences against the analytic gradient of the MSE loss,
/// every parameter. Parameters whose perturbation passes within 1e-6 of an
/// ELU kink are skipped and reported.
GradientCheckReport gradient_check(CaeModel& model, const CnnImage& image,
                                   const VelocityState& target);

/// Serialized parameter blobs, in a fixed order with stable names.
std::vector<std::pair<std::string, Eigen::VectorXd>> parameter_blobs(const CaeModel& model);
std::vector<std::pair<std::string, Eigen::VectorXd>> parameter_blobs(const Encoder& enc);

} // namespace wakerom
