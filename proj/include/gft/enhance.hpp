#pragma once

// Mask-based enhancement on the time-graph representation: oracle and
// learned masks, the SI-SDR training objective, and an Adam-trained
// per-frame MLP mask estimator with hand-written backpropagation.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gft/metrics.hpp"
#include "gft/rng.hpp"
#include "gft/transform.hpp"

namespace gft {

struct Mask {
    Matrix values;                      // F x N
    std::optional<double> clip_bound;   // nullopt = unbounded
    std::optional<Fingerprint> basis_fingerprint;
};

inline TimeGraphSpectrogram apply_mask(const Mask& mask, const TimeGraphSpectrogram& noisy) {
    if (mask.values.rows() != noisy.coeffs.rows() || mask.values.cols() != noisy.coeffs.cols()) {
        throw DimensionError("mask shape " + std::to_string(mask.values.rows()) + "x" +
                             std::to_string(mask.values.cols()) + " does not match spectrogram " +
                             std::to_string(noisy.coeffs.rows()) + "x" + std::to_string(noisy.coeffs.cols()));
    }
    if (mask.basis_fingerprint && *mask.basis_fingerprint != noisy.basis_fingerprint) {
        throw BasisMismatchError("mask and spectrogram were produced with different bases");
    }
    TimeGraphSpectrogram out = noisy;
    out.coeffs = mask.values.cwiseProduct(noisy.coeffs);
    return out;
}

inline constexpr double kDefaultMaskClip = 2.0;
inline constexpr double kDefaultMaskEps = 1e-8;

namespace detail {

inline void require_same_layout(const TimeGraphSpectrogram& a, const TimeGraphSpectrogram& b) {
    if (a.coeffs.rows() != b.coeffs.rows() || a.coeffs.cols() != b.coeffs.cols()) {
        throw DimensionError("clean and noisy spectrograms differ in shape");
    }
    if (a.basis_fingerprint != b.basis_fingerprint) {
        throw BasisMismatchError("clean and noisy spectrograms were produced with different bases");
    }
}

}  // namespace detail

/// Signed ratio mask clean / (noisy + sign(noisy) * eps), clipped to +-clip.
/// sign(0) is taken as +1 so all-zero frames yield a zero mask.
inline Mask oracle_ratio_mask(const TimeGraphSpectrogram& clean, const TimeGraphSpectrogram& noisy,
                              std::optional<double> clip = kDefaultMaskClip, double eps = kDefaultMaskEps) {
    detail::require_same_layout(clean, noisy);
    if (clip && !(*clip > 0.0)) throw ParameterError("mask clip must be positive");
    if (!(eps > 0.0)) throw ParameterError("mask eps must be positive");
    Mask m;
    m.clip_bound = clip;
    m.basis_fingerprint = noisy.basis_fingerprint;
    m.values.resize(noisy.coeffs.rows(), noisy.coeffs.cols());
    for (Eigen::Index f = 0; f < m.values.rows(); ++f) {
        for (Eigen::Index b = 0; b < m.values.cols(); ++b) {
            const double y = noisy.coeffs(f, b);
            double v = clean.coeffs(f, b) / (y + (y < 0.0 ? -eps : eps));
            if (clip) v = std::clamp(v, -*clip, *clip);
            m.values(f, b) = v;
        }
    }
    return m;
}

/// Complex ratio mask for the STFT / GFT-EVD baselines, magnitude clipped,
/// already applied to the noisy spectrum.
inline ComplexSpectrogram apply_complex_oracle_mask(const ComplexSpectrogram& clean, const ComplexSpectrogram& noisy,
                                                    std::optional<double> clip = kDefaultMaskClip,
                                                    double eps = kDefaultMaskEps) {
    if (clean.kind != noisy.kind || clean.real.rows() != noisy.real.rows() ||
        clean.real.cols() != noisy.real.cols()) {
        throw DimensionError("clean and noisy complex spectrograms differ in shape or kind");
    }
    ComplexSpectrogram out = noisy;
    for (Eigen::Index f = 0; f < noisy.real.rows(); ++f) {
        for (Eigen::Index b = 0; b < noisy.real.cols(); ++b) {
            const std::complex<double> y(noisy.real(f, b), noisy.imag(f, b));
            const std::complex<double> s(clean.real(f, b), clean.imag(f, b));
            const double mag = std::abs(y);
            const std::complex<double> dir = mag > 0.0 ? y / mag : std::complex<double>(1.0, 0.0);
            std::complex<double> m = s / (y + eps * dir);
            if (clip && std::abs(m) > *clip) m *= *clip / std::abs(m);
            const std::complex<double> est = m * y;
            out.real(f, b) = est.real();
            out.imag(f, b) = est.imag();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Per-frame MLP mask estimator.

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out
};

/// Hidden layers use ReLU; the output layer is output_scale * tanh.
struct MlpParams {
    std::vector<std::size_t> sizes{512, 256, 512};
    std::vector<DenseLayer> layers;
    double output_scale = 2.0;
    std::uint64_t seed = 0;

    [[nodiscard]] std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
        return n;
    }

    /// Visits every scalar parameter in checkpoint order (weights row-major, then bias, per layer).
    template <typename Fn>
    void for_each_block(Fn&& fn) {
        for (auto& l : layers) {
            fn(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
            fn(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
        }
    }
    template <typename Fn>
    void for_each_block(Fn&& fn) const {
        for (const auto& l : layers) {
            fn(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
            fn(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
        }
    }
};

/// Gaussian init (variance 2/fan_in for hidden layers, 0.01/fan_in for the
/// output layer). Output biases start at atanh(1/scale) so the initial mask
/// is close to 1 and the untrained estimator passes the mixture through.
inline MlpParams init_mlp(std::vector<std::size_t> sizes, double output_scale, std::uint64_t seed) {
    if (sizes.size() < 2) throw ParameterError("MLP needs at least input and output sizes");
    for (auto s : sizes) {
        if (s == 0) throw ParameterError("MLP layer sizes must be positive");
    }
    if (!(output_scale > 1.0)) throw ParameterError("output scale must exceed 1 so a unity mask is reachable");
    MlpParams p;
    p.sizes = std::move(sizes);
    p.output_scale = output_scale;
    p.seed = seed;
    Rng rng(seed);
    const double pass_through = std::atanh(1.0 / output_scale);
    for (std::size_t l = 0; l + 1 < p.sizes.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(p.sizes[l]);
        const auto out = static_cast<Eigen::Index>(p.sizes[l + 1]);
        const bool last = l + 2 == p.sizes.size();
        const double stddev = std::sqrt((last ? 0.01 : 2.0) / static_cast<double>(in));
        DenseLayer layer;
        layer.weight.resize(out, in);
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = stddev * rng.normal();
        layer.bias = Vector::Constant(out, last ? pass_through : 0.0);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

namespace detail {

struct MlpTape {
    std::vector<Matrix> inputs;  // input to each layer (F x in)
    std::vector<Matrix> pre;     // pre-activation of each layer (F x out)
    Matrix tanh_out;             // tanh of the final pre-activation
};

inline void check_mlp(const MlpParams& p, const Matrix& x) {
    if (p.layers.size() + 1 != p.sizes.size()) throw DimensionError("MLP layer list does not match sizes");
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        if (p.layers[l].weight.rows() != static_cast<Eigen::Index>(p.sizes[l + 1]) ||
            p.layers[l].weight.cols() != static_cast<Eigen::Index>(p.sizes[l]) ||
            p.layers[l].bias.size() != static_cast<Eigen::Index>(p.sizes[l + 1])) {
            throw DimensionError("MLP layer " + std::to_string(l) + " has inconsistent shape");
        }
    }
    if (x.cols() != static_cast<Eigen::Index>(p.sizes.front())) {
        throw DimensionError("feature width " + std::to_string(x.cols()) + " does not match MLP input size " +
                             std::to_string(p.sizes.front()));
    }
}

inline Matrix mlp_run(const MlpParams& p, const Matrix& x, MlpTape* tape) {
    check_mlp(p, x);
    Matrix h = x;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& layer = p.layers[l];
        Matrix z = h * layer.weight.transpose();
        z.rowwise() += layer.bias.transpose();
        if (tape) {
            tape->inputs.push_back(h);
            tape->pre.push_back(z);
        }
        if (l + 1 < p.layers.size()) {
            h = z.cwiseMax(0.0);
        } else {
            Matrix t = z.array().tanh().matrix();
            h = p.output_scale * t;
            if (tape) tape->tanh_out = std::move(t);
        }
    }
    return h;
}

}  // namespace detail

/// Network input: noisy graph coefficients divided by the RMS of the noisy waveform.
inline Matrix estimator_features(const TimeGraphSpectrogram& noisy, std::span<const double> noisy_wave) {
    double e = 0.0;
    for (double v : noisy_wave) e += v * v;
    const double rms = noisy_wave.empty() ? 0.0 : std::sqrt(e / static_cast<double>(noisy_wave.size()));
    return noisy.coeffs / std::max(rms, 1e-8);
}

inline Mask mlp_forward(const MlpParams& params, const Matrix& features) {
    Mask m;
    m.values = detail::mlp_run(params, features, nullptr);
    m.clip_bound = params.output_scale;
    return m;
}

// ---------------------------------------------------------------------------
// Training.

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t steps = 200;
    std::size_t batch_size = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0) || steps == 0 || batch_size == 0) {
            throw ParameterError("training needs a positive learning rate, step count and batch size");
        }
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
            throw ParameterError("invalid Adam hyperparameters");
        }
    }
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;
};

struct Utterance {
    Waveform noisy;
    Waveform clean;
};

struct LossAndGradient {
    double loss = 0.0;            // -SI-SDR of the enhanced estimate
    std::vector<double> grad;     // flattened, checkpoint order
};

/// -SI-SDR of synthesize(M(features) * Y) against the clean waveform, and its
/// gradient w.r.t. every MLP parameter. The path from mask to waveform
/// (masking, psi^T, overlap-add) is linear, so its adjoint is applied exactly.
inline LossAndGradient loss_and_gradient(const MlpParams& params, const Utterance& utt, const GraphBasis& basis,
                                         const FramingConfig& framing) {
    if (utt.noisy.size() != utt.clean.size()) throw DimensionError("noisy/clean length mismatch");
    const TimeGraphSpectrogram noisy = analyze(utt.noisy, framing, basis);
    const Matrix features = estimator_features(noisy, utt.noisy);

    detail::MlpTape tape;
    const Matrix mask = detail::mlp_run(params, features, &tape);
    TimeGraphSpectrogram est = noisy;
    est.coeffs = mask.cwiseProduct(noisy.coeffs);
    const FrameMatrix frames = gft_svd_inverse(est, basis);
    const Waveform wave = overlap_add(frames);
    const SiSdrResult sdr = si_sdr_value_and_grad(wave, utt.clean);

    LossAndGradient out;
    out.loss = -sdr.value_db;
    std::vector<double> d_wave(sdr.grad.size());
    for (std::size_t i = 0; i < d_wave.size(); ++i) d_wave[i] = -sdr.grad[i];
    const Matrix d_frames = overlap_add_adjoint(d_wave, frames);
    const Matrix d_coeffs = d_frames * basis.psi.transpose();
    Matrix delta = d_coeffs.cwiseProduct(noisy.coeffs);  // d loss / d mask

    std::vector<Matrix> d_weight(params.layers.size());
    std::vector<Vector> d_bias(params.layers.size());
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        if (l + 1 == params.layers.size()) {
            const Matrix& t = tape.tanh_out;
            delta = delta.cwiseProduct((params.output_scale * (1.0 - t.array().square())).matrix());
        } else {
            delta = delta.cwiseProduct((tape.pre[l].array() > 0.0).cast<double>().matrix());
        }
        d_weight[l] = delta.transpose() * tape.inputs[l];
        d_bias[l] = delta.colwise().sum().transpose();
        if (l > 0) delta = delta * params.layers[l].weight;
    }
    out.grad.reserve(params.parameter_count());
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        out.grad.insert(out.grad.end(), d_weight[l].data(), d_weight[l].data() + d_weight[l].size());
        out.grad.insert(out.grad.end(), d_bias[l].data(), d_bias[l].data() + d_bias[l].size());
    }
    return out;
}

/// One Adam update on the mean loss over `batch`. Returns the pre-update loss.
inline double train_step(MlpParams& params, AdamState& state, std::span<const Utterance> batch,
                         const GraphBasis& basis, const FramingConfig& framing, const TrainConfig& cfg) {
    cfg.validate();
    if (batch.empty()) throw ParameterError("empty training batch");
    const std::size_t count = params.parameter_count();
    std::vector<double> grad(count, 0.0);
    double loss = 0.0;
    for (const auto& utt : batch) {
        const auto lg = loss_and_gradient(params, utt, basis, framing);
        loss += lg.loss;
        for (std::size_t i = 0; i < count; ++i) grad[i] += lg.grad[i];
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    loss *= inv;
    if (!std::isfinite(loss)) throw NumericalError("training loss diverged (non-finite)");
    for (auto& g : grad) {
        g *= inv;
        if (!std::isfinite(g)) throw NumericalError("training gradient diverged (non-finite)");
    }

    if (state.m.size() != count) {
        state.m.assign(count, 0.0);
        state.v.assign(count, 0.0);
        state.t = 0;
    }
    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    std::size_t idx = 0;
    params.for_each_block([&](double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i, ++idx) {
            const double g = grad[idx];
            state.m[idx] = cfg.beta1 * state.m[idx] + (1.0 - cfg.beta1) * g;
            state.v[idx] = cfg.beta2 * state.v[idx] + (1.0 - cfg.beta2) * g * g;
            const double mhat = state.m[idx] / bc1;
            const double vhat = state.v[idx] / bc2;
            p[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    });
    return loss;
}

inline double train_step(MlpParams& params, AdamState& state, const Utterance& utt, const GraphBasis& basis,
                         const FramingConfig& framing, const TrainConfig& cfg) {
    return train_step(params, state, std::span<const Utterance>(&utt, 1), basis, framing, cfg);
}

/// Runs cfg.steps updates, cycling through `data` in order, batch_size
/// utterances per step. Returns the per-step pre-update losses.
inline std::vector<double> train(MlpParams& params, std::span<const Utterance> data, const GraphBasis& basis,
                                 const FramingConfig& framing, const TrainConfig& cfg,
                                 const std::function<void(std::size_t, double)>& on_step = {}) {
    cfg.validate();
    if (data.empty()) throw ParameterError("no training utterances");
    AdamState state;
    std::vector<double> losses;
    losses.reserve(cfg.steps);
    std::vector<Utterance> batch(cfg.batch_size);
    for (std::size_t s = 0; s < cfg.steps; ++s) {
        for (std::size_t b = 0; b < cfg.batch_size; ++b) batch[b] = data[(s * cfg.batch_size + b) % data.size()];
        const double loss = train_step(params, state, batch, basis, framing, cfg);
        losses.push_back(loss);
        if (on_step) on_step(s, loss);
    }
    return losses;
}

// ---------------------------------------------------------------------------
// Pipeline.

struct UnityMaskSource {};
struct ZeroMaskSource {};
struct OracleMaskSource {
    Waveform clean;
    std::optional<double> clip = kDefaultMaskClip;
    double eps = kDefaultMaskEps;
};
struct EstimatorMaskSource {
    const MlpParams* params = nullptr;
};
using MaskSource = std::variant<UnityMaskSource, ZeroMaskSource, OracleMaskSource, EstimatorMaskSource>;

/// analyze -> mask -> synthesize. Output length equals input length.
inline Waveform enhance_pipeline(std::span<const double> noisy, const GraphBasis& basis, const FramingConfig& framing,
                                 const MaskSource& source) {
    const TimeGraphSpectrogram y = analyze(noisy, framing, basis);
    Mask mask;
    if (std::holds_alternative<UnityMaskSource>(source)) {
        mask.values = Matrix::Ones(y.coeffs.rows(), y.coeffs.cols());
    } else if (std::holds_alternative<ZeroMaskSource>(source)) {
        mask.values = Matrix::Zero(y.coeffs.rows(), y.coeffs.cols());
    } else if (const auto* o = std::get_if<OracleMaskSource>(&source)) {
        if (o->clean.size() != noisy.size()) throw DimensionError("clean reference length differs from noisy input");
        mask = oracle_ratio_mask(analyze(o->clean, framing, basis), y, o->clip, o->eps);
    } else {
        const auto& est = std::get<EstimatorMaskSource>(source);
        if (!est.params) throw ParameterError("estimator mask source without parameters");
        mask = mlp_forward(*est.params, estimator_features(y, noisy));
    }
    return synthesize(apply_mask(mask, y), basis);
}

// ---------------------------------------------------------------------------
// Checkpoint: "GFTM", u32 version, u32 layer count L, L x u32 sizes,
// f64 output scale, parameters (f64, checkpoint order), u64 seed,
// 32-byte basis fingerprint, then SHA-256 of every preceding byte.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    MlpParams params;
    Fingerprint basis_fingerprint{};
};

inline std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
    const auto& p = ck.params;
    detail::ByteWriter w;
    w.put_bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("GFTM"), 4));
    w.put(kCheckpointVersion);
    w.put(static_cast<std::uint32_t>(p.sizes.size()));
    for (auto s : p.sizes) w.put(static_cast<std::uint32_t>(s));
    w.put(p.output_scale);
    p.for_each_block([&](const double* d, std::size_t n) { w.put_doubles(d, n); });
    w.put(p.seed);
    w.put_bytes(ck.basis_fingerprint);
    const Fingerprint h = sha256(w.bytes());
    w.put_bytes(h);
    return std::move(w.bytes());
}

inline Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8 || std::memcmp(bytes.data(), "GFTM", 4) != 0) {
        throw MalformedHeaderError("not a checkpoint file (bad magic)");
    }
    detail::ByteReader r(bytes.subspan(4));
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw VersionMismatchError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = r.get<std::uint32_t>();
    if (count < 2 || count > 64) throw MalformedHeaderError("implausible layer count " + std::to_string(count));
    Checkpoint ck;
    ck.params.sizes.clear();
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto s = r.get<std::uint32_t>();
        if (s == 0 || s > (1u << 20)) throw MalformedHeaderError("implausible layer size");
        ck.params.sizes.push_back(s);
    }
    ck.params.output_scale = r.get<double>();
    for (std::size_t l = 0; l + 1 < ck.params.sizes.size(); ++l) {
        DenseLayer layer;
        layer.weight.resize(static_cast<Eigen::Index>(ck.params.sizes[l + 1]),
                            static_cast<Eigen::Index>(ck.params.sizes[l]));
        layer.bias.resize(static_cast<Eigen::Index>(ck.params.sizes[l + 1]));
        ck.params.layers.push_back(std::move(layer));
    }
    ck.params.for_each_block([&](double* d, std::size_t n) { r.get_doubles(d, n); });
    ck.params.seed = r.get<std::uint64_t>();
    r.get_bytes(ck.basis_fingerprint.data(), ck.basis_fingerprint.size());
    Fingerprint stored{};
    r.get_bytes(stored.data(), stored.size());
    if (r.remaining() != 0) throw MalformedHeaderError("trailing bytes after checkpoint payload");
    if (stored != sha256(bytes.first(bytes.size() - 32))) {
        throw FingerprintMismatchError("checkpoint content hash does not match payload");
    }
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    detail::write_file_bytes(path, serialize_checkpoint(ck));
}

/// Loads a checkpoint; when `expected_basis` is given, refuses one trained
/// against a different basis.
inline Checkpoint load_checkpoint(const std::string& path, const std::optional<Fingerprint>& expected_basis = {}) {
    Checkpoint ck = deserialize_checkpoint(detail::read_file_bytes(path));
    if (expected_basis && *expected_basis != ck.basis_fingerprint) {
        throw BasisMismatchError("checkpoint was trained against basis " + to_hex(ck.basis_fingerprint) +
                                 ", not " + to_hex(*expected_basis));
    }
    return ck;
}

}  // namespace gft
