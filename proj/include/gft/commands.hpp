#pragma once

// Subcommands behind the gftsvd tool. Each returns a process exit code and
// writes human-readable progress to `log`.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gft/audio_io.hpp"
#include "gft/enhance.hpp"
#include "gft/graph_basis.hpp"
#include "gft/metrics.hpp"
#include "gft/synth.hpp"
#include "gft/transform.hpp"

namespace gft::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitIo = 3,
    kExitNumerical = 4,
    kExitContract = 5,
    kExitPartial = 6,
};

/// Maps a library error to the exit code reported by the tool.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const BasisMismatchError*>(&e)) return kExitContract;
    if (dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const DimensionError*>(&e)) return kExitUsage;
    if (dynamic_cast<const DecompositionError*>(&e) || dynamic_cast<const NumericalError*>(&e)) {
        return kExitNumerical;
    }
    return kExitIo;
}

enum class TransformKind { gft_svd, gft_evd, stft };

inline TransformKind parse_transform(const std::string& s) {
    if (s == "gft-svd") return TransformKind::gft_svd;
    if (s == "gft-evd") return TransformKind::gft_evd;
    if (s == "stft") return TransformKind::stft;
    throw ParameterError("unknown transform '" + s + "' (expected gft-svd, gft-evd or stft)");
}

inline std::string transform_name(TransformKind t) {
    switch (t) {
        case TransformKind::gft_svd: return "gft-svd";
        case TransformKind::gft_evd: return "gft-evd";
        case TransformKind::stft: return "stft";
    }
    return "?";
}

/// Conventional basis file name inside a basis directory.
inline std::string basis_file_name(std::size_t n, std::size_t k) {
    return "basis_n" + std::to_string(n) + "_k" + std::to_string(k) + ".gftb";
}

struct FramingOptions {
    double win_ms = 25.0;
    double hop_ms = 6.25;
    std::size_t sample_rate = 16000;
};

inline FramingConfig make_framing(const FramingOptions& o, std::size_t n) {
    return FramingConfig::from_ms(o.win_ms, o.hop_ms, o.sample_rate, n);
}

/// Resolves the transform length from an optional --n and a loaded basis.
inline std::size_t resolve_n(const std::optional<std::size_t>& requested, std::size_t basis_n) {
    if (requested && *requested != basis_n) {
        throw ParameterError("--n " + std::to_string(*requested) + " does not match basis size " +
                             std::to_string(basis_n));
    }
    return basis_n;
}

struct MixedUtterance {
    std::string id;
    Waveform clean;
    Waveform noisy;
};

/// Mixes manifest entry `index` at its SNR with seed `seed + index`.
inline MixedUtterance mix_entry(const ManifestEntry& e, std::size_t index, std::uint64_t seed,
                                std::size_t sample_rate) {
    const AudioClip clean = read_wav(e.clean_path, sample_rate);
    const AudioClip noise = read_wav(e.noise_path, sample_rate);
    Mixture m = mix_at_snr(clean, noise, e.snr_db, seed + index);
    return {e.id, clean.samples, std::move(m.noisy.samples)};
}

/// Oracle-mask enhancement with any of the three transforms. `basis` is
/// required for gft-svd; `cbasis` for gft-evd.
inline Waveform oracle_enhance(TransformKind t, std::span<const double> noisy, std::span<const double> clean,
                               const FramingConfig& framing, const GraphBasis* basis,
                               const ComplexGraphBasis* cbasis, std::optional<double> clip) {
    switch (t) {
        case TransformKind::gft_svd: {
            if (!basis) throw ParameterError("gft-svd needs a basis");
            return enhance_pipeline(noisy, *basis, framing, OracleMaskSource{Waveform(clean.begin(), clean.end()), clip});
        }
        case TransformKind::gft_evd: {
            if (!cbasis) throw ParameterError("gft-evd needs a complex basis");
            const auto masked = apply_complex_oracle_mask(analyze_evd(clean, framing, *cbasis),
                                                          analyze_evd(noisy, framing, *cbasis), clip);
            return synthesize_evd(masked, *cbasis);
        }
        case TransformKind::stft: {
            const auto masked =
                apply_complex_oracle_mask(analyze_stft(clean, framing), analyze_stft(noisy, framing), clip);
            return synthesize_stft(masked);
        }
    }
    throw ParameterError("unknown transform");
}

// ---------------------------------------------------------------------------
// basis

struct BasisOptions {
    std::size_t n = 512;
    std::size_t k = 3;
    std::string out;
};

inline int cmd_basis(const BasisOptions& o, std::ostream& log) {
    if (o.out.empty()) throw ParameterError("basis: --out is required");
    const GraphBasis b = decompose_svd(build_adjacency(o.n, o.k));
    save_basis(b, o.out);
    const double smax = b.sigma.maxCoeff();
    const double smin = b.sigma.minCoeff();
    log << "basis n=" << b.n << " k=" << b.k << " -> " << o.out << '\n';
    log << "fingerprint " << to_hex(b.fingerprint) << '\n';
    log << "sigma_max " << fmt9(smax) << " sigma_min " << fmt9(smin) << '\n';
    if ((b.sigma.array() - 1.0).abs().maxCoeff() < 1e-12) log << "all singular values equal 1\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// enhance

enum class EnhanceMode { oracle, model, unity };

struct EnhanceOptions {
    std::string noisy;
    std::string basis;
    EnhanceMode mode = EnhanceMode::oracle;
    std::string clean;  // reference for oracle mode and for metrics
    std::string model;  // checkpoint for model mode
    std::string out;
    std::string metrics_out;  // empty = print the row to log
    std::optional<std::size_t> n;
    std::optional<double> clip = kDefaultMaskClip;
    FramingOptions framing;
    WavEncoding encoding = WavEncoding::float32;
};

inline int cmd_enhance(const EnhanceOptions& o, std::ostream& log) {
    if (o.noisy.empty() || o.basis.empty() || o.out.empty()) {
        throw ParameterError("enhance: noisy input, --basis and --out are required");
    }
    if (o.mode == EnhanceMode::oracle && o.clean.empty()) throw ParameterError("enhance: oracle mode needs --clean");
    if (o.mode == EnhanceMode::model && o.model.empty()) throw ParameterError("enhance: model mode needs --model");

    const GraphBasis basis = load_basis(o.basis);
    const FramingConfig framing = make_framing(o.framing, resolve_n(o.n, basis.n));
    const AudioClip noisy = read_wav(o.noisy, o.framing.sample_rate);
    std::optional<AudioClip> clean;
    if (!o.clean.empty()) {
        clean = read_wav(o.clean, o.framing.sample_rate);
        if (clean->samples.size() != noisy.samples.size()) throw DimensionError("clean and noisy lengths differ");
    }

    Waveform enhanced;
    switch (o.mode) {
        case EnhanceMode::unity:
            enhanced = enhance_pipeline(noisy.samples, basis, framing, UnityMaskSource{});
            break;
        case EnhanceMode::oracle:
            enhanced = enhance_pipeline(noisy.samples, basis, framing, OracleMaskSource{clean->samples, o.clip});
            break;
        case EnhanceMode::model: {
            const Checkpoint ck = load_checkpoint(o.model, basis.fingerprint);
            enhanced = enhance_pipeline(noisy.samples, basis, framing, EstimatorMaskSource{&ck.params});
            break;
        }
    }
    write_wav(o.out, AudioClip{enhanced, noisy.sample_rate}, o.encoding);
    log << "wrote " << o.out << '\n';

    if (clean) {
        const NamedReport row{std::filesystem::path(o.noisy).filename().string(),
                              evaluate(enhanced, clean->samples, noisy.samples)};
        if (o.metrics_out.empty()) {
            write_metrics_csv(log, std::span<const NamedReport>(&row, 1));
        } else {
            std::ofstream f(o.metrics_out, std::ios::binary);
            if (!f) throw IoError("cannot write " + o.metrics_out);
            write_metrics_csv(f, std::span<const NamedReport>(&row, 1));
        }
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// compare

struct CompareOptions {
    std::string manifest;
    std::string basis_dir;
    std::vector<std::size_t> k_list{1, 3, 5, 7};
    std::vector<std::string> transforms{"gft-svd", "gft-evd", "stft"};
    std::string out;
    std::size_t n = 512;
    std::uint64_t seed = 0;
    std::optional<double> clip = kDefaultMaskClip;
    FramingOptions framing;
};

struct CompareRow {
    std::string file;
    std::string transform;
    std::size_t k = 0;
    bool ok = false;
    double noisy_db = 0.0;
    double enhanced_db = 0.0;
    double seconds = 0.0;
    double audio_seconds = 0.0;
};

inline void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows,
                              const std::vector<std::string>& transforms, const std::vector<std::size_t>& ks) {
    os << "file,transform,k,status,si_sdr_noisy_db,si_sdr_enhanced_db,si_sdr_imp_db\n";
    auto emit = [&](const std::string& file, const std::string& t, std::size_t k, bool ok, double a, double b) {
        os << file << ',' << t << ',' << k << ',' << (ok ? "ok" : "failed") << ',';
        if (ok) os << fmt9(a) << ',' << fmt9(b) << ',' << fmt9(b - a);
        else os << ",,";
        os << '\n';
    };
    for (const auto& r : rows) emit(r.file, r.transform, r.k, r.ok, r.noisy_db, r.enhanced_db);
    for (const auto& t : transforms) {
        for (auto k : ks) {
            double sa = 0.0;
            double sb = 0.0;
            std::size_t count = 0;
            for (const auto& r : rows) {
                if (r.ok && r.transform == t && r.k == k) {
                    sa += r.noisy_db;
                    sb += r.enhanced_db;
                    ++count;
                }
            }
            const double c = static_cast<double>(count);
            emit("MEAN", t, k, count > 0, count ? sa / c : 0.0, count ? sb / c : 0.0);
        }
    }
}

/// Oracle-mask sweep over files x transforms x k. Per-row failures are
/// reported and the sweep continues; timing goes to `<out>.timing.csv`.
inline int cmd_compare(const CompareOptions& o, std::ostream& log) {
    if (o.manifest.empty() || o.out.empty()) throw ParameterError("compare: --manifest and --out are required");
    if (o.k_list.empty() || o.transforms.empty()) throw ParameterError("compare: empty k or transform list");
    std::vector<TransformKind> kinds;
    for (const auto& t : o.transforms) kinds.push_back(parse_transform(t));
    for (auto k : o.k_list) build_adjacency(o.n, k);
    const FramingConfig framing = make_framing(o.framing, o.n);
    const auto entries = load_manifest(o.manifest);

    std::map<std::size_t, std::optional<GraphBasis>> bases;
    std::map<std::size_t, ComplexGraphBasis> cbases;
    for (auto k : o.k_list) {
        if (std::find(kinds.begin(), kinds.end(), TransformKind::gft_svd) != kinds.end() && !bases.count(k)) {
            const std::string path = (std::filesystem::path(o.basis_dir) / basis_file_name(o.n, k)).string();
            try {
                bases[k] = load_basis(path);
            } catch (const Error& e) {
                log << "basis for k=" << k << " unavailable: " << e.what() << '\n';
                bases[k] = std::nullopt;
            }
        }
        if (!cbases.count(k)) cbases.emplace(k, decompose_evd(build_adjacency(o.n, k)));
    }

    std::vector<CompareRow> rows;
    bool any_failed = false;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        std::optional<MixedUtterance> utt;
        std::string load_error;
        try {
            utt = mix_entry(entries[i], i, o.seed, o.framing.sample_rate);
        } catch (const Error& e) {
            load_error = e.what();
        }
        for (std::size_t ti = 0; ti < kinds.size(); ++ti) {
            for (auto k : o.k_list) {
                CompareRow row;
                row.file = entries[i].id;
                row.transform = transform_name(kinds[ti]);
                row.k = k;
                try {
                    if (!utt) throw IoError(load_error);
                    const GraphBasis* b = nullptr;
                    if (kinds[ti] == TransformKind::gft_svd) {
                        const auto& slot = bases.at(k);
                        if (!slot) throw IoError("no basis for k=" + std::to_string(k));
                        b = &*slot;
                    }
                    const auto start = std::chrono::steady_clock::now();
                    const Waveform est =
                        oracle_enhance(kinds[ti], utt->noisy, utt->clean, framing, b, &cbases.at(k), o.clip);
                    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                    row.audio_seconds =
                        static_cast<double>(utt->noisy.size()) / static_cast<double>(o.framing.sample_rate);
                    row.noisy_db = si_sdr(utt->noisy, utt->clean);
                    row.enhanced_db = si_sdr(est, utt->clean);
                    row.ok = true;
                } catch (const Error& e) {
                    log << row.file << ' ' << row.transform << " k=" << k << " failed: " << e.what() << '\n';
                    any_failed = true;
                }
                rows.push_back(row);
            }
        }
    }

    {
        std::ofstream f(o.out, std::ios::binary);
        if (!f) throw IoError("cannot write " + o.out);
        std::vector<std::string> names;
        for (auto t : kinds) names.push_back(transform_name(t));
        write_compare_csv(f, rows, names, o.k_list);
        if (!f) throw IoError("write failed: " + o.out);
    }
    {
        const std::string timing = o.out + ".timing.csv";
        std::ofstream f(timing, std::ios::binary);
        if (!f) throw IoError("cannot write " + timing);
        f << "file,transform,k,seconds,audio_seconds,rtf\n";
        for (const auto& r : rows) {
            if (!r.ok) continue;
            f << r.file << ',' << r.transform << ',' << r.k << ',' << fmt9(r.seconds) << ','
              << fmt9(r.audio_seconds) << ',' << fmt9(r.seconds / r.audio_seconds) << '\n';
        }
    }
    log << "wrote " << rows.size() << " rows to " << o.out << '\n';
    return any_failed ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------------------
// render

/// P5 graymap with rows = bins (bin 0 at the bottom), columns = frames.
/// Values map linearly onto [1, 255] symmetrically around mid-gray 128.
inline std::vector<std::uint8_t> render_pgm(const Matrix& values) {
    const auto frames = values.rows();
    const auto bins = values.cols();
    const double peak = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
    std::string header = "P5\n" + std::to_string(frames) + " " + std::to_string(bins) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + static_cast<std::size_t>(values.size()));
    for (Eigen::Index r = 0; r < bins; ++r) {
        const Eigen::Index b = bins - 1 - r;
        for (Eigen::Index f = 0; f < frames; ++f) {
            const double v = peak > 0.0 ? values(f, b) / peak : 0.0;
            out.push_back(static_cast<std::uint8_t>(std::clamp(std::lround(128.0 + 127.0 * v), 1L, 255L)));
        }
    }
    return out;
}

struct RenderOptions {
    std::string input;
    std::string basis;
    std::string clean;  // optional: also render the oracle mask (gft-svd)
    std::string transform = "gft-svd";
    std::string out;    // output prefix
    std::optional<std::size_t> n;
    std::size_t k = 3;  // graph for gft-evd when no basis is given
    std::optional<double> clip = kDefaultMaskClip;
    FramingOptions framing;
};

inline int cmd_render(const RenderOptions& o, std::ostream& log) {
    if (o.input.empty() || o.out.empty()) throw ParameterError("render: input and --out are required");
    const TransformKind kind = parse_transform(o.transform);
    const AudioClip clip = read_wav(o.input, o.framing.sample_rate);
    std::vector<std::string> written;
    auto emit = [&](const std::string& path, auto&& writer) {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("cannot write " + path);
        writer(f);
        if (!f) throw IoError("write failed: " + path);
        written.push_back(path);
    };
    auto emit_pgm = [&](const std::string& path, const Matrix& m) {
        const auto bytes = render_pgm(m);
        emit(path, [&](std::ostream& f) { f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())); });
    };

    if (kind == TransformKind::gft_svd) {
        if (o.basis.empty()) throw ParameterError("render: gft-svd needs --basis");
        const GraphBasis basis = load_basis(o.basis);
        const FramingConfig framing = make_framing(o.framing, resolve_n(o.n, basis.n));
        const TimeGraphSpectrogram y = analyze(clip.samples, framing, basis);
        emit(o.out + ".csv", [&](std::ostream& f) { write_spectrogram_csv(f, y.coeffs); });
        emit_pgm(o.out + ".pgm", y.coeffs);
        if (!o.clean.empty()) {
            const AudioClip clean = read_wav(o.clean, o.framing.sample_rate);
            if (clean.samples.size() != clip.samples.size()) throw DimensionError("clean and input lengths differ");
            const Mask m = oracle_ratio_mask(analyze(clean.samples, framing, basis), y, o.clip);
            emit(o.out + "_mask.csv", [&](std::ostream& f) { write_spectrogram_csv(f, m.values); });
            emit_pgm(o.out + "_mask.pgm", m.values);
        }
    } else {
        ComplexSpectrogram spec;
        if (kind == TransformKind::stft) {
            spec = analyze_stft(clip.samples, make_framing(o.framing, o.n.value_or(512)));
        } else if (!o.basis.empty()) {
            const GraphBasis basis = load_basis(o.basis);
            const std::size_t n = resolve_n(o.n, basis.n);
            spec = analyze_evd(clip.samples, make_framing(o.framing, n), decompose_evd(build_adjacency(n, basis.k)));
        } else {
            const std::size_t n = o.n.value_or(512);
            spec = analyze_evd(clip.samples, make_framing(o.framing, n), decompose_evd(build_adjacency(n, o.k)));
        }
        emit(o.out + ".csv", [&](std::ostream& f) { write_spectrogram_csv(f, spec); });
        emit_pgm(o.out + "_real.pgm", spec.real);
        emit_pgm(o.out + "_imag.pgm", spec.imag);
    }
    for (const auto& p : written) log << "wrote " << p << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
    std::string manifest;
    std::string basis;
    std::string out;       // checkpoint path
    std::string loss_csv;  // default: <out>.loss.csv
    std::optional<std::size_t> n;
    std::size_t hidden = 256;
    double output_scale = 2.0;
    TrainConfig train;
    FramingOptions framing;
};

inline int cmd_train(const TrainOptions& o, std::ostream& log) {
    if (o.manifest.empty() || o.basis.empty() || o.out.empty()) {
        throw ParameterError("train: --manifest, --basis and --out are required");
    }
    o.train.validate();
    const auto entries = load_manifest(o.manifest);
    if (entries.empty()) throw ParameterError("train: manifest has no entries");
    const GraphBasis basis = load_basis(o.basis);
    const std::size_t n = resolve_n(o.n, basis.n);
    const FramingConfig framing = make_framing(o.framing, n);

    std::vector<Utterance> data;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto m = mix_entry(entries[i], i, o.train.seed, o.framing.sample_rate);
        data.push_back({std::move(m.noisy), std::move(m.clean)});
    }
    MlpParams params = init_mlp({n, o.hidden, n}, o.output_scale, o.train.seed);
    const auto losses = train(params, data, basis, framing, o.train);

    save_checkpoint(Checkpoint{params, basis.fingerprint}, o.out);
    const std::string loss_path = o.loss_csv.empty() ? o.out + ".loss.csv" : o.loss_csv;
    std::ofstream f(loss_path, std::ios::binary);
    if (!f) throw IoError("cannot write " + loss_path);
    f << "step,loss\n";
    for (std::size_t s = 0; s < losses.size(); ++s) f << s << ',' << fmt9(losses[s]) << '\n';
    if (!f) throw IoError("write failed: " + loss_path);

    const auto& first = data.front();
    const double before = si_sdr(first.noisy, first.clean);
    const double after =
        si_sdr(enhance_pipeline(first.noisy, basis, framing, EstimatorMaskSource{&params}), first.clean);
    log << "trained " << losses.size() << " steps on " << data.size() << " utterances\n";
    log << "loss first " << fmt9(losses.front()) << " last " << fmt9(losses.back()) << '\n';
    log << entries.front().id << ": si_sdr noisy " << fmt9(before) << " dB, enhanced " << fmt9(after) << " dB\n";
    log << "wrote " << o.out << " and " << loss_path << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
    std::string out_dir;
    std::size_t count = 10;
    double seconds = 1.0;
    double noise_seconds = 1.5;
    double snr_db = 0.0;
    double gain = 1.0;  // applied to the clean clips
    std::uint64_t seed = 0;
    std::size_t sample_rate = 16000;
};

/// Writes speech-like clean clips, alternating white/pink noise clips and a
/// manifest pairing them at one SNR.
inline int cmd_synth(const SynthOptions& o, std::ostream& log) {
    if (o.out_dir.empty()) throw ParameterError("synth: --out is required");
    if (o.count == 0 || !(o.seconds > 0.0) || o.noise_seconds < o.seconds || !(o.gain > 0.0)) {
        throw ParameterError("synth: need count > 0, a positive gain and noise at least as long as speech");
    }
    std::filesystem::create_directories(o.out_dir);
    const auto len = static_cast<std::size_t>(std::llround(o.seconds * static_cast<double>(o.sample_rate)));
    const auto noise_len =
        static_cast<std::size_t>(std::llround(o.noise_seconds * static_cast<double>(o.sample_rate)));
    std::ostringstream manifest;
    manifest << "id,clean_path,noise_path,snr_db\n";
    for (std::size_t i = 0; i < o.count; ++i) {
        char idx[16];
        std::snprintf(idx, sizeof idx, "%02zu", i);
        const std::string clean_name = std::string("clean_") + idx + ".wav";
        const std::string noise_name = std::string("noise_") + idx + ".wav";
        const std::uint64_t s = o.seed + 1000 * i;
        auto clean = speech_like(len, o.sample_rate, s);
        for (auto& v : clean) v *= o.gain;
        const auto noise = i % 2 == 0 ? white_noise(noise_len, s + 1) : pink_noise(noise_len, s + 1);
        write_wav((std::filesystem::path(o.out_dir) / clean_name).string(), AudioClip{clean, o.sample_rate});
        write_wav((std::filesystem::path(o.out_dir) / noise_name).string(), AudioClip{noise, o.sample_rate});
        manifest << "mix_" << idx << ',' << clean_name << ',' << noise_name << ',' << fmt9(o.snr_db) << '\n';
    }
    const std::string text = manifest.str();
    detail::write_file_bytes((std::filesystem::path(o.out_dir) / "manifest.csv").string(),
                             std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    log << "wrote " << o.count << " clean/noise pairs and manifest.csv to " << o.out_dir << '\n';
    return kExitOk;
}

}  // namespace gft::cli
