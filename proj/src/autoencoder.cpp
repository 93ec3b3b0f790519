#include "wakerom/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <tuple>

#include "wakerom/errors.hpp"
#include "wakerom/rng.hpp"

namespace wakerom {

// ---------------------------------------------------------------------------
// layer kernels
// ---------------------------------------------------------------------------

void ConvLayer::forward(const double* in, double* out) const {
    const int k = kernel;
    for (int oc = 0; oc < out_c; ++oc) {
        for (int oy = 0; oy < out_h; ++oy) {
            const int iy0 = oy * stride - pad;
            const int ky_lo = std::max(0, -iy0);
            const int ky_hi = std::min(k, in_h - iy0);
            for (int ox = 0; ox < out_w; ++ox) {
                const int ix0 = ox * stride - pad;
                const int kx_lo = std::max(0, -ix0);
                const int kx_hi = std::min(k, in_w - ix0);
                double acc = bias[oc];
                for (int ic = 0; ic < in_c; ++ic) {
                    const double* inp = in + (ic * in_h) * in_w;
                    const double* wp = weights.data() + ((oc * in_c + ic) * k) * k;
                    for (int ky = ky_lo; ky < ky_hi; ++ky) {
                        const double* row = inp + (iy0 + ky) * in_w + ix0;
                        const double* wrow = wp + ky * k;
                        for (int kx = kx_lo; kx < kx_hi; ++kx) acc += wrow[kx] * row[kx];
                    }
                }
                out[(oc * out_h + oy) * out_w + ox] = acc;
            }
        }
    }
}

void ConvLayer::backward(const double* in, const double* gout, double* gin, double* gw,
                         double* gb) const {
    const int k = kernel;
    for (int oc = 0; oc < out_c; ++oc) {
        for (int oy = 0; oy < out_h; ++oy) {
            const int iy0 = oy * stride - pad;
            const int ky_lo = std::max(0, -iy0);
            const int ky_hi = std::min(k, in_h - iy0);
            for (int ox = 0; ox < out_w; ++ox) {
                const int ix0 = ox * stride - pad;
                const int kx_lo = std::max(0, -ix0);
                const int kx_hi = std::min(k, in_w - ix0);
                const double g = gout[(oc * out_h + oy) * out_w + ox];
                if (gb) gb[oc] += g;
                for (int ic = 0; ic < in_c; ++ic) {
                    const double* inp = in + (ic * in_h) * in_w;
                    double* ginp = gin ? gin + (ic * in_h) * in_w : nullptr;
                    const double* wp = weights.data() + ((oc * in_c + ic) * k) * k;
                    double* gwp = gw ? gw + ((oc * in_c + ic) * k) * k : nullptr;
                    for (int ky = ky_lo; ky < ky_hi; ++ky) {
                        const int off = (iy0 + ky) * in_w + ix0;
                        for (int kx = kx_lo; kx < kx_hi; ++kx) {
                            if (gwp) gwp[ky * k + kx] += inp[off + kx] * g;
                            if (ginp) ginp[off + kx] += wp[ky * k + kx] * g;
                        }
                    }
                }
            }
        }
    }
}

void DeconvLayer::forward(const double* in, double* out) const {
    const int k = kernel;
    for (int oc = 0; oc < out_c; ++oc)
        for (int i = 0; i < out_h * out_w; ++i) out[oc * out_h * out_w + i] = bias[oc];
    for (int ic = 0; ic < in_c; ++ic) {
        for (int iy = 0; iy < in_h; ++iy) {
            const int oy0 = iy * stride - pad;
            const int ky_lo = std::max(0, -oy0);
            const int ky_hi = std::min(k, out_h - oy0);
            for (int ix = 0; ix < in_w; ++ix) {
                const int ox0 = ix * stride - pad;
                const int kx_lo = std::max(0, -ox0);
                const int kx_hi = std::min(k, out_w - ox0);
                const double a = in[(ic * in_h + iy) * in_w + ix];
                if (a == 0.0) continue;
                for (int oc = 0; oc < out_c; ++oc) {
                    double* outp = out + (oc * out_h) * out_w;
                    const double* wp = weights.data() + ((ic * out_c + oc) * k) * k;
                    for (int ky = ky_lo; ky < ky_hi; ++ky) {
                        double* row = outp + (oy0 + ky) * out_w + ox0;
                        const double* wrow = wp + ky * k;
                        for (int kx = kx_lo; kx < kx_hi; ++kx) row[kx] += wrow[kx] * a;
                    }
                }
            }
        }
    }
}

void DeconvLayer::backward(const double* in, const double* gout, double* gin, double* gw,
                           double* gb) const {
    const int k = kernel;
    if (gb) {
        for (int oc = 0; oc < out_c; ++oc) {
            double acc = 0.0;
            const double* gp = gout + (oc * out_h) * out_w;
            for (int i = 0; i < out_h * out_w; ++i) acc += gp[i];
            gb[oc] += acc;
        }
    }
    for (int ic = 0; ic < in_c; ++ic) {
        for (int iy = 0; iy < in_h; ++iy) {
            const int oy0 = iy * stride - pad;
            const int ky_lo = std::max(0, -oy0);
            const int ky_hi = std::min(k, out_h - oy0);
            for (int ix = 0; ix < in_w; ++ix) {
                const int ox0 = ix * stride - pad;
                const int kx_lo = std::max(0, -ox0);
                const int kx_hi = std::min(k, out_w - ox0);
                const double a = in[(ic * in_h + iy) * in_w + ix];
                double gacc = 0.0;
                for (int oc = 0; oc < out_c; ++oc) {
                    const double* gp = gout + (oc * out_h) * out_w;
                    const double* wp = weights.data() + ((ic * out_c + oc) * k) * k;
                    double* gwp = gw ? gw + ((ic * out_c + oc) * k) * k : nullptr;
                    for (int ky = ky_lo; ky < ky_hi; ++ky) {
                        const double* grow = gp + (oy0 + ky) * out_w + ox0;
                        const double* wrow = wp + ky * k;
                        for (int kx = kx_lo; kx < kx_hi; ++kx) {
                            gacc += wrow[kx] * grow[kx];
                            if (gwp) gwp[ky * k + kx] += a * grow[kx];
                        }
                    }
                }
                if (gin) gin[(ic * in_h + iy) * in_w + ix] = gacc;
            }
        }
    }
}

void FcLayer::forward(const double* in, double* out) const {
    for (int r = 0; r < out_n; ++r) {
        const double* wrow = weights.data() + static_cast<long>(r) * in_n;
        double acc = bias[r];
        for (int c = 0; c < in_n; ++c) acc += wrow[c] * in[c];
        out[r] = acc;
    }
}

void FcLayer::backward(const double* in, const double* gout, double* gin, double* gw,
                       double* gb) const {
    if (gin)
        for (int c = 0; c < in_n; ++c) gin[c] = 0.0;
    for (int r = 0; r < out_n; ++r) {
        const double g = gout[r];
        if (gb) gb[r] += g;
        const double* wrow = weights.data() + static_cast<long>(r) * in_n;
        double* gwrow = gw ? gw + static_cast<long>(r) * in_n : nullptr;
        for (int c = 0; c < in_n; ++c) {
            if (gwrow) gwrow[c] += g * in[c];
            if (gin) gin[c] += wrow[c] * g;
        }
    }
}

void SparseLinearLayer::forward(const double* in, double* out) const {
    const auto& off = map.offsets();
    const auto& cols = map.col_indices();
    const auto& vals = map.values();
    for (int r = 0; r < map.rows(); ++r) {
        double acc = 0.0;
        for (int k = off[r]; k < off[r + 1]; ++k) acc += vals[k] * in[cols[k]];
        out[r] = acc;
    }
}

void SparseLinearLayer::backward(const double* in, const double* gout, double* gin,
                                 double* gvals) const {
    const auto& off = map.offsets();
    const auto& cols = map.col_indices();
    const auto& vals = map.values();
    if (gin)
        for (int c = 0; c < map.cols(); ++c) gin[c] = 0.0;
    for (int r = 0; r < map.rows(); ++r) {
        const double g = gout[r];
        if (g == 0.0) continue;
        for (int k = off[r]; k < off[r + 1]; ++k) {
            if (gvals) gvals[k] += in[cols[k]] * g;
            if (gin) gin[cols[k]] += vals[k] * g;
        }
    }
}

double elu(double z) { return z > 0.0 ? z : std::expm1(z); }
double elu_grad_from_pre(double z) { return z > 0.0 ? 1.0 : std::exp(z); }

// ---------------------------------------------------------------------------
// forward passes (inference; training uses the taped variants below)
// ---------------------------------------------------------------------------

namespace {

struct EncoderTape {
    std::vector<Eigen::VectorXd> inputs;  // input to each conv
    std::vector<Eigen::VectorXd> pre;     // conv outputs before ELU
    Eigen::VectorXd flat;                 // input to the fc
    Eigen::VectorXd code;
    double min_abs_pre = std::numeric_limits<double>::infinity();
};

void encoder_forward(const Encoder& enc, const Eigen::VectorXd& image, EncoderTape& tape) {
    tape.inputs.resize(enc.convs.size());
    tape.pre.resize(enc.convs.size());
    tape.min_abs_pre = std::numeric_limits<double>::infinity();
    Eigen::VectorXd cur = image;
    for (size_t l = 0; l < enc.convs.size(); ++l) {
        const ConvLayer& conv = enc.convs[l];
        tape.inputs[l] = cur;
        Eigen::VectorXd out(conv.out_c * conv.out_h * conv.out_w);
        conv.forward(cur.data(), out.data());
        tape.pre[l] = out;
        if (enc.elu_enabled) {
            for (int i = 0; i < out.size(); ++i) {
                tape.min_abs_pre = std::min(tape.min_abs_pre, std::abs(out[i]));
                out[i] = elu(out[i]);
            }
        }
        cur = std::move(out);
    }
    tape.flat = cur;
    tape.code.resize(enc.fc.out_n);
    enc.fc.forward(tape.flat.data(), tape.code.data());
}

struct LayerGrads {
    Eigen::VectorXd w, b;
};

struct EncoderGrads {
    std::vector<LayerGrads> convs;
    LayerGrads fc;

    void init(const Encoder& enc) {
        convs.resize(enc.convs.size());
        for (size_t l = 0; l < enc.convs.size(); ++l) {
            convs[l].w.setZero(enc.convs[l].weights.size());
            convs[l].b.setZero(enc.convs[l].bias.size());
        }
        fc.w.setZero(enc.fc.weights.size());
        fc.b.setZero(enc.fc.bias.size());
    }
    void zero() {
        for (auto& g : convs) {
            g.w.setZero();
            g.b.setZero();
        }
        fc.w.setZero();
        fc.b.setZero();
    }
};

void encoder_backward(const Encoder& enc, const EncoderTape& tape,
                      const Eigen::VectorXd& gcode, EncoderGrads& grads) {
    Eigen::VectorXd gflat(tape.flat.size());
    enc.fc.backward(tape.flat.data(), gcode.data(), gflat.data(), grads.fc.w.data(),
                    grads.fc.b.data());
    Eigen::VectorXd gcur = std::move(gflat);
    for (int l = static_cast<int>(enc.convs.size()) - 1; l >= 0; --l) {
        const ConvLayer& conv = enc.convs[l];
        if (enc.elu_enabled)
            for (int i = 0; i < gcur.size(); ++i) gcur[i] *= elu_grad_from_pre(tape.pre[l][i]);
        Eigen::VectorXd gin = Eigen::VectorXd::Zero(conv.in_c * conv.in_h * conv.in_w);
        conv.backward(tape.inputs[l].data(), gcur.data(), l > 0 ? gin.data() : nullptr,
                      grads.convs[l].w.data(), grads.convs[l].b.data());
        gcur = std::move(gin);
    }
}

struct DecoderTape {
    Eigen::VectorXd code;
    Eigen::VectorXd fc_out;
    std::vector<Eigen::VectorXd> deconv_out;
    Eigen::VectorXd recon;
};

void decoder_forward(const CaeDecoder& dec, const Eigen::VectorXd& code, DecoderTape& tape) {
    tape.code = code;
    tape.fc_out.resize(dec.fc.out_n);
    dec.fc.forward(code.data(), tape.fc_out.data());
    tape.deconv_out.resize(dec.deconvs.size());
    const Eigen::VectorXd* cur = &tape.fc_out;
    for (size_t l = 0; l < dec.deconvs.size(); ++l) {
        const DeconvLayer& d = dec.deconvs[l];
        tape.deconv_out[l].resize(d.out_c * d.out_h * d.out_w);
        d.forward(cur->data(), tape.deconv_out[l].data());
        cur = &tape.deconv_out[l];
    }
    tape.recon.resize(dec.interp.map.rows());
    dec.interp.forward(cur->data(), tape.recon.data());
}

struct DecoderGrads {
    LayerGrads fc;
    std::vector<LayerGrads> deconvs;
    Eigen::VectorXd interp_vals;

    void init(const CaeDecoder& dec) {
        fc.w.setZero(dec.fc.weights.size());
        fc.b.setZero(dec.fc.bias.size());
        deconvs.resize(dec.deconvs.size());
        for (size_t l = 0; l < dec.deconvs.size(); ++l) {
            deconvs[l].w.setZero(dec.deconvs[l].weights.size());
            deconvs[l].b.setZero(dec.deconvs[l].bias.size());
        }
        interp_vals.setZero(dec.interp.map.nnz());
    }
    void zero() {
        fc.w.setZero();
        fc.b.setZero();
        for (auto& g : deconvs) {
            g.w.setZero();
            g.b.setZero();
        }
        interp_vals.setZero();
    }
};

// returns the gradient w.r.t. the code (for chaining into the encoder)
Eigen::VectorXd decoder_backward(const CaeDecoder& dec, const DecoderTape& tape,
                                 const Eigen::VectorXd& grecon, DecoderGrads& grads) {
    const Eigen::VectorXd& last =
        dec.deconvs.empty() ? tape.fc_out : tape.deconv_out.back();
    Eigen::VectorXd gcur(last.size());
    dec.interp.backward(last.data(), grecon.data(), gcur.data(), grads.interp_vals.data());
    for (int l = static_cast<int>(dec.deconvs.size()) - 1; l >= 0; --l) {
        const DeconvLayer& d = dec.deconvs[l];
        const Eigen::VectorXd& in = l > 0 ? tape.deconv_out[l - 1] : tape.fc_out;
        Eigen::VectorXd gin(d.in_c * d.in_h * d.in_w);
        d.backward(in.data(), gcur.data(), gin.data(), grads.deconvs[l].w.data(),
                   grads.deconvs[l].b.data());
        gcur = std::move(gin);
    }
    Eigen::VectorXd gcode(dec.fc.in_n);
    dec.fc.backward(tape.code.data(), gcur.data(), gcode.data(), grads.fc.w.data(),
                    grads.fc.b.data());
    return gcode;
}

} // namespace

Eigen::VectorXd Encoder::forward(const Eigen::VectorXd& image) const {
    if (image.size() != input.size()) throw ArgumentError("encoder: image shape mismatch");
    EncoderTape tape;
    encoder_forward(*this, image, tape);
    return tape.code;
}

Eigen::VectorXd CaeDecoder::forward(const Eigen::VectorXd& code) const {
    if (code.size() != n_rho) throw ArgumentError("decoder: code size mismatch");
    DecoderTape tape;
    decoder_forward(*this, code, tape);
    return tape.recon;
}

Eigen::VectorXd encode(const CaeModel& model, const CnnImage& image) {
    return model.encoder.forward(image.values);
}
Eigen::VectorXd encode(const CnnModel& model, const CnnImage& image) {
    return model.encoder.forward(image.values);
}
Eigen::VectorXd encode(const IcaeModel& model, const CnnImage& image) {
    return model.encoder.forward(image.values);
}

VelocityState decode_cae(const CaeModel& model, const Eigen::VectorXd& code) {
    return model.decoder.forward(code);
}

VelocityState decode_cnn(const CnnModel& model, const Eigen::VectorXd& code) {
    if (code.size() != model.mix.cols()) throw ArgumentError("decode_cnn: code size mismatch");
    return model.basis * (model.mix * code);
}

VelocityState decode_icae(const IcaeModel& model, const Eigen::VectorXd& code) {
    if (model.decoders.empty()) throw StateError("decode_icae: model has no decoders");
    const int label = kmeans_assign(model.kmeans, code);
    return model.decoders[label].forward(code);
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (epochs < 1) throw ArgumentError("train config: epochs must be >= 1");
    if (batch < 1) throw ArgumentError("train config: batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ArgumentError("train config: learning rate must be > 0");
    for (size_t i = 1; i < milestones.size(); ++i)
        if (!(milestones[i] > milestones[i - 1]))
            throw ArgumentError("train config: milestones must be strictly increasing");
    for (double m : milestones)
        if (m < 0.0 || m > 1.0)
            throw ArgumentError("train config: milestones are fractions of the epoch range");
}

namespace {

int conv_out_dim(int in, int kernel, int stride, int pad) {
    return (in + 2 * pad - kernel) / stride + 1;
}

void init_uniform(Eigen::VectorXd& w, int fan_in, Rng& rng) {
    const double bound = std::sqrt(1.0 / fan_in);
    for (int i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
}

Encoder make_encoder(TensorShape input, const std::vector<int>& channels, int n_rho,
                     const ArchitectureSpec& arch, Rng& rng) {
    Encoder enc;
    enc.input = input;
    enc.n_rho = n_rho;
    TensorShape cur = input;
    for (int out_c : channels) {
        ConvLayer conv;
        conv.in_c = cur.c;
        conv.out_c = out_c;
        conv.in_h = cur.h;
        conv.in_w = cur.w;
        conv.kernel = arch.kernel;
        conv.stride = arch.stride;
        conv.pad = arch.pad;
        conv.out_h = conv_out_dim(cur.h, arch.kernel, arch.stride, arch.pad);
        conv.out_w = conv_out_dim(cur.w, arch.kernel, arch.stride, arch.pad);
        if (conv.out_h < 1 || conv.out_w < 1)
            throw ArgumentError("encoder: image too small for the conv stack");
        conv.weights.resize(conv.out_c * conv.in_c * conv.kernel * conv.kernel);
        conv.bias.setZero(conv.out_c);
        init_uniform(conv.weights, conv.in_c * conv.kernel * conv.kernel, rng);
        cur = {conv.out_c, conv.out_h, conv.out_w};
        enc.convs.push_back(std::move(conv));
    }
    enc.fc.in_n = cur.size();
    enc.fc.out_n = n_rho;
    enc.fc.weights.resize(static_cast<long>(n_rho) * cur.size());
    enc.fc.bias.setZero(n_rho);
    init_uniform(enc.fc.weights, cur.size(), rng);
    return enc;
}

// trailing interpolation pattern: every state row reads the bilinear pixels
// of all deconv output channels; channels 0/1 start at the interpolation
// weights, the extra channels start at zero
SparseLinearLayer make_interp_layer(const InterpPair& interp, int channels) {
    const CsrMatrix& ip = interp.image_to_state;
    const int hw = interp.height * interp.width;
    std::vector<std::tuple<int, int, double>> trip;
    for (int r = 0; r < ip.rows(); ++r) {
        for (int k = ip.offsets()[r]; k < ip.offsets()[r + 1]; ++k) {
            const int col = ip.col_indices()[k];
            const int src_c = col / hw;
            const int pix = col % hw;
            for (int c = 0; c < channels; ++c)
                trip.emplace_back(r, c * hw + pix, c == src_c ? ip.values()[k] : 0.0);
        }
    }
    SparseLinearLayer layer;
    layer.map = CsrMatrix::from_triplets(ip.rows(), channels * hw, std::move(trip));
    return layer;
}

CaeDecoder make_decoder(const InterpPair& interp, int n_rho, TensorShape bottleneck,
                        const std::vector<TensorShape>& up_dims,
                        const std::vector<int>& channels, const ArchitectureSpec& arch,
                        Rng& rng) {
    CaeDecoder dec;
    dec.n_rho = n_rho;
    dec.unflatten = bottleneck;
    dec.fc.in_n = n_rho;
    dec.fc.out_n = bottleneck.size();
    dec.fc.weights.resize(static_cast<long>(dec.fc.out_n) * n_rho);
    dec.fc.bias.setZero(dec.fc.out_n);
    init_uniform(dec.fc.weights, n_rho, rng);

    TensorShape cur = bottleneck;
    for (size_t l = 0; l < channels.size(); ++l) {
        DeconvLayer d;
        d.in_c = cur.c;
        d.out_c = channels[l];
        d.in_h = cur.h;
        d.in_w = cur.w;
        d.out_h = up_dims[l].h;
        d.out_w = up_dims[l].w;
        d.kernel = arch.kernel;
        d.stride = arch.stride;
        d.pad = arch.pad;
        d.weights.resize(d.in_c * d.out_c * d.kernel * d.kernel);
        d.bias.setZero(d.out_c);
        init_uniform(d.weights, d.in_c * d.kernel * d.kernel, rng);
        cur = {d.out_c, d.out_h, d.out_w};
        dec.deconvs.push_back(std::move(d));
    }
    dec.interp = make_interp_layer(interp, cur.c);
    return dec;
}

} // namespace

CaeModel make_cae(const GridSpec& grid, const InterpPair& interp, int n_rho,
                  const ArchitectureSpec& arch, uint64_t seed) {
    (void)grid;
    Rng rng(seed);
    CaeModel model;
    model.image_shape = {2, interp.height, interp.width};
    model.encoder = make_encoder(model.image_shape, arch.encoder_channels, n_rho, arch, rng);

    // decoder mirrors the encoder's spatial chain
    std::vector<TensorShape> chain;  // encoder conv output dims, in order
    for (const ConvLayer& c : model.encoder.convs) chain.push_back({c.out_c, c.out_h, c.out_w});
    TensorShape bottleneck = chain.back();
    std::vector<TensorShape> up_dims;
    for (int l = static_cast<int>(chain.size()) - 2; l >= 0; --l) up_dims.push_back(chain[l]);
    up_dims.push_back(model.image_shape);
    if (up_dims.size() != arch.decoder_channels.size())
        throw ArgumentError("make_cae: decoder channel list does not match the conv chain");
    model.decoder = make_decoder(interp, n_rho, bottleneck, up_dims, arch.decoder_channels,
                                 arch, rng);
    return model;
}

CnnModel make_cnn(const InterpPair& interp, const PodBasis& basis, int n_rho,
                  const std::vector<int>& encoder_channels, uint64_t seed) {
    Rng rng(seed);
    CnnModel model;
    model.image_shape = {2, interp.height, interp.width};
    ArchitectureSpec arch;
    model.encoder = make_encoder(model.image_shape, encoder_channels, n_rho, arch, rng);
    model.basis = basis.modes;
    model.mix.resize(basis.n_rho, n_rho);
    Eigen::VectorXd flat(model.mix.size());
    init_uniform(flat, n_rho, rng);
    std::memcpy(model.mix.data(), flat.data(), sizeof(double) * flat.size());
    return model;
}

// ---------------------------------------------------------------------------
// training
// ---------------------------------------------------------------------------

namespace {

struct ParamRef {
    Eigen::VectorXd* value;
    Eigen::VectorXd* grad;
    std::string name;
};

std::vector<ParamRef> decoder_params(CaeDecoder& dec, DecoderGrads& g, const std::string& px) {
    std::vector<ParamRef> refs;
    refs.push_back({&dec.fc.weights, &g.fc.w, px + "fc.weights"});
    refs.push_back({&dec.fc.bias, &g.fc.b, px + "fc.bias"});
    for (size_t l = 0; l < dec.deconvs.size(); ++l) {
        refs.push_back({&dec.deconvs[l].weights, &g.deconvs[l].w,
                        px + "deconv" + std::to_string(l) + ".weights"});
        refs.push_back({&dec.deconvs[l].bias, &g.deconvs[l].b,
                        px + "deconv" + std::to_string(l) + ".bias"});
    }
    refs.push_back({nullptr, &g.interp_vals, px + "interp.values"});  // values live in the map
    return refs;
}

std::vector<ParamRef> encoder_params(Encoder& enc, EncoderGrads& g, const std::string& px) {
    std::vector<ParamRef> refs;
    for (size_t l = 0; l < enc.convs.size(); ++l) {
        refs.push_back({&enc.convs[l].weights, &g.convs[l].w,
                        px + "conv" + std::to_string(l) + ".weights"});
        refs.push_back({&enc.convs[l].bias, &g.convs[l].b,
                        px + "conv" + std::to_string(l) + ".bias"});
    }
    refs.push_back({&enc.fc.weights, &g.fc.w, px + "fc.weights"});
    refs.push_back({&enc.fc.bias, &g.fc.b, px + "fc.bias"});
    return refs;
}

class Adam {
public:
    Adam(const TrainConfig& cfg, const std::vector<ParamRef>& refs, CaeDecoder* dec)
        : cfg_(cfg), dec_(dec) {
        m_.resize(refs.size());
        v_.resize(refs.size());
        for (size_t i = 0; i < refs.size(); ++i) {
            const long n = param_size(refs[i]);
            m_[i].setZero(n);
            v_[i].setZero(n);
        }
    }

    void step(std::vector<ParamRef>& refs, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
        const double c2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
        for (size_t i = 0; i < refs.size(); ++i) {
            Eigen::VectorXd& g = *refs[i].grad;
            m_[i] = cfg_.adam_beta1 * m_[i] + (1.0 - cfg_.adam_beta1) * g;
            v_[i] = cfg_.adam_beta2 * v_[i].eval() +
                    (1.0 - cfg_.adam_beta2) * g.cwiseProduct(g);
            for (long j = 0; j < g.size(); ++j) {
                const double mhat = m_[i][j] / c1;
                const double vhat = v_[i][j] / c2;
                const double delta = lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
                if (refs[i].value) {
                    (*refs[i].value)[j] -= delta;
                } else {
                    dec_->interp.map.values()[j] -= delta;  // sparse layer values
                }
            }
        }
    }

private:
    static long param_size(const ParamRef& r) { return r.grad->size(); }
    TrainConfig cfg_;
    CaeDecoder* dec_;
    std::vector<Eigen::VectorXd> m_, v_;
    int t_ = 0;
};

double schedule_lr(const TrainConfig& cfg, int epoch) {
    double lr = cfg.learning_rate;
    for (double frac : cfg.milestones)
        if (epoch >= static_cast<int>(frac * cfg.epochs)) lr *= cfg.decay;
    return lr;
}

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
}

Eigen::MatrixXd precompute_images(const SnapshotSet& data, const InterpPair& interp) {
    Eigen::MatrixXd images(interp.state_to_image.rows(), data.count());
    for (int s = 0; s < data.count(); ++s)
        images.col(s) = interp.state_to_image.multiply(data.states.col(s));
    return images;
}

struct DecoderSnapshot {
    CaeDecoder decoder;
    double mse;
    double mean_norm;
};

void check_finite(double loss, int epoch, int batch, double pnorm) {
    if (std::isfinite(loss)) return;
    throw SolverError("training loss became non-finite at epoch " + std::to_string(epoch) +
                          ", batch " + std::to_string(batch) + ", parameter norm " +
                          std::to_string(pnorm),
                      loss);
}

} // namespace

TrainResult train_cae(CaeModel& model, const SnapshotSet& data, const InterpPair& interp,
                      const TrainConfig& cfg) {
    cfg.validate();
    data.validate();
    const int t_count = data.count();
    const int n_v = static_cast<int>(data.states.rows());
    if (interp.state_to_image.cols() != n_v)
        throw ArgumentError("train_cae: interpolation does not match the data");

    const Eigen::MatrixXd images = precompute_images(data, interp);
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

    EncoderGrads eg;
    eg.init(model.encoder);
    DecoderGrads dg;
    dg.init(model.decoder);
    auto refs = encoder_params(model.encoder, eg, "encoder.");
    auto drefs = decoder_params(model.decoder, dg, "decoder.");
    refs.insert(refs.end(), drefs.begin(), drefs.end());
    Adam adam(cfg, refs, &model.decoder);

    EncoderTape etape;
    DecoderTape dtape;

    auto sample_loss_grad = [&](int s, double scale, bool with_grad) {
        encoder_forward(model.encoder, images.col(s), etape);
        decoder_forward(model.decoder, etape.code, dtape);
        Eigen::VectorXd diff = dtape.recon - data.states.col(s);
        const double loss = diff.squaredNorm() / n_v;
        if (with_grad) {
            diff *= 2.0 * scale / n_v;
            Eigen::VectorXd gcode = decoder_backward(model.decoder, dtape, diff, dg);
            encoder_backward(model.encoder, etape, gcode, eg);
        }
        return loss;
    };

    TrainResult result;
    double init_loss = 0.0;
    for (int s = 0; s < t_count; ++s) init_loss += sample_loss_grad(s, 0.0, false);
    result.initial_loss = init_loss / t_count;

    std::vector<int> order(t_count);
    for (int s = 0; s < t_count; ++s) order[s] = s;

    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<Eigen::VectorXd> best_params;
    Eigen::VectorXd best_interp_vals;
    auto save_best = [&]() {
        best_params.clear();
        for (const auto& r : refs)
            if (r.value) best_params.push_back(*r.value);
        best_interp_vals =
            Eigen::Map<const Eigen::VectorXd>(model.decoder.interp.map.values().data(),
                                              model.decoder.interp.map.nnz());
    };

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_indices(order, rng);
        const double lr = schedule_lr(cfg, epoch);
        double epoch_loss = 0.0;
        for (int start = 0; start < t_count; start += cfg.batch) {
            const int bsz = std::min(cfg.batch, t_count - start);
            eg.zero();
            dg.zero();
            double batch_loss = 0.0;
            for (int b = 0; b < bsz; ++b)
                batch_loss += sample_loss_grad(order[start + b], 1.0 / bsz, true);
            double pnorm = 0.0;
            for (const auto& r : refs)
                if (r.value) pnorm += r.value->squaredNorm();
            check_finite(batch_loss, epoch, start / cfg.batch, std::sqrt(pnorm));
            adam.step(refs, lr);
            epoch_loss += batch_loss;
        }
        epoch_loss /= t_count;
        result.loss_curve.push_back(epoch_loss);
        if (epoch_loss < best_loss) {
            best_loss = epoch_loss;
            result.best_epoch = epoch;
            save_best();
        }
    }

    // restore the best epoch
    size_t bi = 0;
    for (auto& r : refs)
        if (r.value) *r.value = best_params[bi++];
    for (int j = 0; j < best_interp_vals.size(); ++j)
        model.decoder.interp.map.values()[j] = best_interp_vals[j];

    double final_loss = 0.0;
    for (int s = 0; s < t_count; ++s) final_loss += sample_loss_grad(s, 0.0, false);
    result.final_loss = final_loss / t_count;
    return result;
}

TrainResult train_cnn(CnnModel& model, const SnapshotSet& data, const InterpPair& interp,
                      const TrainConfig& cfg) {
    cfg.validate();
    data.validate();
    const int t_count = data.count();
    const int n_v = static_cast<int>(data.states.rows());
    if (model.basis.rows() != n_v) throw ArgumentError("train_cnn: basis does not match data");

    const Eigen::MatrixXd images = precompute_images(data, interp);
    Rng rng(cfg.seed ^ 0x7f4a7c159e3779b9ULL);

    EncoderGrads eg;
    eg.init(model.encoder);
    Eigen::VectorXd mix_flat =
        Eigen::Map<const Eigen::VectorXd>(model.mix.data(), model.mix.size());
    Eigen::VectorXd gmix_flat = Eigen::VectorXd::Zero(model.mix.size());
    auto refs = encoder_params(model.encoder, eg, "encoder.");
    refs.push_back({&mix_flat, &gmix_flat, "mix"});
    Adam adam(cfg, refs, nullptr);

    auto sync_mix = [&]() {
        model.mix = Eigen::Map<const Eigen::MatrixXd>(mix_flat.data(), model.mix.rows(),
                                                      model.mix.cols());
    };

    EncoderTape etape;

    auto sample_loss_grad = [&](int s, double scale, bool with_grad) {
        encoder_forward(model.encoder, images.col(s), etape);
        Eigen::VectorXd rcode = model.mix * etape.code;
        Eigen::VectorXd diff = model.basis * rcode - data.states.col(s);
        const double loss = diff.squaredNorm() / n_v;
        if (with_grad) {
            diff *= 2.0 * scale / n_v;
            Eigen::VectorXd gr = model.basis.transpose() * diff;
            Eigen::Map<Eigen::MatrixXd> gm(gmix_flat.data(), model.mix.rows(),
                                           model.mix.cols());
            gm += gr * etape.code.transpose();
            Eigen::VectorXd gcode = model.mix.transpose() * gr;
            encoder_backward(model.encoder, etape, gcode, eg);
        }
        return loss;
    };

    TrainResult result;
    double init_loss = 0.0;
    for (int s = 0; s < t_count; ++s) init_loss += sample_loss_grad(s, 0.0, false);
    result.initial_loss = init_loss / t_count;

    std::vector<int> order(t_count);
    for (int s = 0; s < t_count; ++s) order[s] = s;
    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<Eigen::VectorXd> best_params;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_indices(order, rng);
        const double lr = schedule_lr(cfg, epoch);
        double epoch_loss = 0.0;
        for (int start = 0; start < t_count; start += cfg.batch) {
            const int bsz = std::min(cfg.batch, t_count - start);
            eg.zero();
            gmix_flat.setZero();
            double batch_loss = 0.0;
            for (int b = 0; b < bsz; ++b)
                batch_loss += sample_loss_grad(order[start + b], 1.0 / bsz, true);
            double pnorm = 0.0;
            for (const auto& r : refs)
                if (r.value) pnorm += r.value->squaredNorm();
            check_finite(batch_loss, epoch, start / cfg.batch, std::sqrt(pnorm));
            adam.step(refs, lr);
            sync_mix();
            epoch_loss += batch_loss;
        }
        epoch_loss /= t_count;
        result.loss_curve.push_back(epoch_loss);
        if (epoch_loss < best_loss) {
            best_loss = epoch_loss;
            result.best_epoch = epoch;
            best_params.clear();
            for (const auto& r : refs) best_params.push_back(*r.value);
        }
    }

    size_t bi = 0;
    for (auto& r : refs) *r.value = best_params[bi++];
    sync_mix();

    double final_loss = 0.0;
    for (int s = 0; s < t_count; ++s) final_loss += sample_loss_grad(s, 0.0, false);
    result.final_loss = final_loss / t_count;
    return result;
}

IcaeModel train_icae(const CaeModel& cae, const KMeansModel& kmeans, const SnapshotSet& data,
                     const InterpPair& interp, const TrainConfig& cfg,
                     std::vector<TrainResult>* curves) {
    cfg.validate();
    data.validate();
    if (!kmeans.fitted()) throw StateError("train_icae: k-means model is not fitted");
    if (kmeans.labels.size() != static_cast<size_t>(data.count()))
        throw ArgumentError("train_icae: k-means labels do not match the data");

    const int t_count = data.count();
    const int n_v = static_cast<int>(data.states.rows());
    const Eigen::MatrixXd images = precompute_images(data, interp);

    // frozen encoder: codes are fixed for the whole run
    Eigen::MatrixXd codes(cae.encoder.n_rho, t_count);
    for (int s = 0; s < t_count; ++s) codes.col(s) = cae.encoder.forward(images.col(s));

    IcaeModel model;
    model.encoder = cae.encoder;
    model.kmeans = kmeans;
    model.image_shape = cae.image_shape;

    for (int l = 0; l < kmeans.k; ++l) {
        std::vector<int> members;
        for (int s = 0; s < t_count; ++s)
            if (kmeans.labels[s] == l) members.push_back(s);
        if (members.empty())
            throw ArgumentError("train_icae: cluster " + std::to_string(l + 1) + " is empty");

        CaeDecoder dec = cae.decoder;  // warm start
        DecoderGrads dg;
        dg.init(dec);
        auto refs = decoder_params(dec, dg, "decoder.");
        Adam adam(cfg, refs, &dec);
        Rng rng(cfg.seed ^ (0x51ed2701517bcf01ULL + 77ULL * l));

        DecoderTape tape;
        auto cluster_eval = [&](double& mse, double& mean_norm) {
            mse = 0.0;
            mean_norm = 0.0;
            for (int s : members) {
                decoder_forward(dec, codes.col(s), tape);
                const double nrm = (tape.recon - data.states.col(s)).norm();
                mse += nrm * nrm / n_v;
                mean_norm += nrm;
            }
            mse /= members.size();
            mean_norm /= members.size();
        };

        DecoderSnapshot best;
        best.decoder = dec;
        cluster_eval(best.mse, best.mean_norm);
        const double init_mse = best.mse;

        TrainResult curve;
        curve.initial_loss = init_mse;

        std::vector<int> order = members;
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            shuffle_indices(order, rng);
            const double lr = schedule_lr(cfg, epoch);
            double epoch_loss = 0.0;
            for (size_t start = 0; start < order.size(); start += cfg.batch) {
                const int bsz = static_cast<int>(
                    std::min<size_t>(cfg.batch, order.size() - start));
                dg.zero();
                double batch_loss = 0.0;
                for (int b = 0; b < bsz; ++b) {
                    const int s = order[start + b];
                    decoder_forward(dec, codes.col(s), tape);
                    Eigen::VectorXd diff = tape.recon - data.states.col(s);
                    batch_loss += diff.squaredNorm() / n_v;
                    diff *= 2.0 / (n_v * bsz);
                    decoder_backward(dec, tape, diff, dg);
                }
                double pnorm = 0.0;
                for (const auto& r : refs)
                    if (r.value) pnorm += r.value->squaredNorm();
                check_finite(batch_loss, epoch, static_cast<int>(start) / cfg.batch,
                             std::sqrt(pnorm));
                adam.step(refs, lr);
                epoch_loss += batch_loss;
            }
            curve.loss_curve.push_back(epoch_loss / members.size());

            // accept only checkpoints that regress neither the cluster MSE nor
            // the mean reconstruction norm against the warm start
            double mse, mean_norm;
            cluster_eval(mse, mean_norm);
            if (mse <= init_mse && mean_norm < best.mean_norm) {
                best.decoder = dec;
                best.mse = mse;
                best.mean_norm = mean_norm;
                curve.best_epoch = epoch;
            }
        }
        curve.final_loss = best.mse;
        model.decoders.push_back(std::move(best.decoder));
        if (curves) curves->push_back(std::move(curve));
    }
    return model;
}

// ---------------------------------------------------------------------------
// gradient check
// ---------------------------------------------------------------------------

GradientCheckReport gradient_check(CaeModel& model, const CnnImage& image,
                                   const VelocityState& target) {
    const int n_v = static_cast<int>(target.size());

    EncoderGrads eg;
    eg.init(model.encoder);
    DecoderGrads dg;
    dg.init(model.decoder);
    auto refs = encoder_params(model.encoder, eg, "encoder.");
    auto drefs = decoder_params(model.decoder, dg, "decoder.");
    refs.insert(refs.end(), drefs.begin(), drefs.end());

    EncoderTape etape;
    DecoderTape dtape;
    auto loss_only = [&](double* min_pre) {
        encoder_forward(model.encoder, image.values, etape);
        decoder_forward(model.decoder, etape.code, dtape);
        if (min_pre) *min_pre = std::min(*min_pre, etape.min_abs_pre);
        return (dtape.recon - target).squaredNorm() / n_v;
    };

    // analytic gradient
    loss_only(nullptr);
    Eigen::VectorXd diff = (dtape.recon - target) * (2.0 / n_v);
    Eigen::VectorXd gcode = decoder_backward(model.decoder, dtape, diff, dg);
    encoder_backward(model.encoder, etape, gcode, eg);

    GradientCheckReport report;
    auto param_at = [&](const ParamRef& r, long j) -> double& {
        if (r.value) return (*r.value)[j];
        return model.decoder.interp.map.values()[j];
    };

    for (const auto& r : refs) {
        for (long j = 0; j < r.grad->size(); ++j) {
            double& p = param_at(r, j);
            const double orig = p;
            const double step = 1e-5 * std::max(1.0, std::abs(orig));
            double min_pre = std::numeric_limits<double>::infinity();
            p = orig + step;
            const double lp = loss_only(&min_pre);
            p = orig - step;
            const double lm = loss_only(&min_pre);
            p = orig;
            if (min_pre < 1e-6) {
                report.skipped.push_back(r.name + "[" + std::to_string(j) + "]");
                continue;
            }
            const double fd = (lp - lm) / (2.0 * step);
            const double an = (*r.grad)[j];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-10});
            const double rel = std::abs(fd - an) / denom;
            ++report.checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_parameter = r.name + "[" + std::to_string(j) + "]";
            }
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// serialization views
// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, Eigen::VectorXd>> parameter_blobs(const Encoder& enc) {
    std::vector<std::pair<std::string, Eigen::VectorXd>> blobs;
    for (size_t l = 0; l < enc.convs.size(); ++l) {
        blobs.emplace_back("encoder.conv" + std::to_string(l) + ".weights",
                           enc.convs[l].weights);
        blobs.emplace_back("encoder.conv" + std::to_string(l) + ".bias", enc.convs[l].bias);
    }
    blobs.emplace_back("encoder.fc.weights", enc.fc.weights);
    blobs.emplace_back("encoder.fc.bias", enc.fc.bias);
    return blobs;
}

std::vector<std::pair<std::string, Eigen::VectorXd>> parameter_blobs(const CaeModel& model) {
    auto blobs = parameter_blobs(model.encoder);
    const CaeDecoder& dec = model.decoder;
    blobs.emplace_back("decoder.fc.weights", dec.fc.weights);
    blobs.emplace_back("decoder.fc.bias", dec.fc.bias);
    for (size_t l = 0; l < dec.deconvs.size(); ++l) {
        blobs.emplace_back("decoder.deconv" + std::to_string(l) + ".weights",
                           dec.deconvs[l].weights);
        blobs.emplace_back("decoder.deconv" + std::to_string(l) + ".bias", dec.deconvs[l].bias);
    }
    blobs.emplace_back("decoder.interp.values",
                       Eigen::Map<const Eigen::VectorXd>(dec.interp.map.values().data(),
                                                         dec.interp.map.nnz()));
    return blobs;
}

} // namespace wakerom
