#pragma once

// Mono WAV I/O (PCM16 / IEEE float32), SNR-controlled mixing and the
// dataset manifest.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gft/common.hpp"
#include "gft/rng.hpp"

namespace gft {

struct AudioClip {
    std::vector<double> samples;
    std::size_t sample_rate = 16000;
};

enum class WavEncoding { pcm16, float32 };

namespace detail {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

inline std::uint32_t fourcc(const char* s) {
    std::uint32_t v;
    std::memcpy(&v, s, 4);
    return v;
}

}  // namespace detail

inline AudioClip decode_wav(std::span<const std::uint8_t> bytes) {
    using detail::fourcc;
    if (bytes.size() < 12) throw MalformedRiffError("file too short for a RIFF header");
    detail::ByteReader r(bytes);
    try {
        if (r.get<std::uint32_t>() != fourcc("RIFF")) throw MalformedRiffError("missing RIFF tag");
        r.get<std::uint32_t>();
        if (r.get<std::uint32_t>() != fourcc("WAVE")) throw MalformedRiffError("missing WAVE tag");

        std::optional<std::uint16_t> format;
        std::uint16_t channels = 0;
        std::uint32_t rate = 0;
        std::uint16_t bits = 0;
        while (r.remaining() >= 8) {
            const auto id = r.get<std::uint32_t>();
            const auto size = r.get<std::uint32_t>();
            if (size > r.remaining()) throw MalformedRiffError("chunk extends past end of file");
            std::vector<std::uint8_t> body(size);
            r.get_bytes(body.data(), size);
            if (size % 2 == 1 && r.remaining() > 0) r.get<std::uint8_t>();

            if (id == fourcc("fmt ")) {
                if (size < 16) throw MalformedRiffError("fmt chunk too short");
                detail::ByteReader f(body);
                format = f.get<std::uint16_t>();
                channels = f.get<std::uint16_t>();
                rate = f.get<std::uint32_t>();
                f.get<std::uint32_t>();
                f.get<std::uint16_t>();
                bits = f.get<std::uint16_t>();
                if (*format == detail::kFormatExtensible) {
                    if (size < 40) throw MalformedRiffError("extensible fmt chunk too short");
                    f.get<std::uint16_t>();
                    f.get<std::uint16_t>();
                    f.get<std::uint32_t>();
                    format = f.get<std::uint16_t>();  // first two bytes of the subformat GUID
                }
            } else if (id == fourcc("data")) {
                if (!format) throw MalformedRiffError("data chunk before fmt chunk");
                if (channels != 1) {
                    throw UnsupportedLayoutError("only mono audio is supported, got " + std::to_string(channels) +
                                                 " channels");
                }
                if (rate == 0) throw MalformedRiffError("zero sample rate");
                AudioClip clip;
                clip.sample_rate = rate;
                if (*format == detail::kFormatPcm && bits == 16) {
                    clip.samples.resize(size / 2);
                    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
                        std::int16_t v;
                        std::memcpy(&v, body.data() + 2 * i, 2);
                        clip.samples[i] = static_cast<double>(v) / 32768.0;
                    }
                } else if (*format == detail::kFormatFloat && bits == 32) {
                    clip.samples.resize(size / 4);
                    for (std::size_t i = 0; i < clip.samples.size(); ++i) {
                        float v;
                        std::memcpy(&v, body.data() + 4 * i, 4);
                        clip.samples[i] = static_cast<double>(v);
                    }
                } else {
                    throw UnsupportedLayoutError("unsupported encoding: format " + std::to_string(*format) + ", " +
                                                 std::to_string(bits) + " bits");
                }
                return clip;
            }
        }
    } catch (const TruncatedPayloadError&) {
        throw MalformedRiffError("truncated RIFF structure");
    }
    throw MalformedRiffError("no data chunk");
}

inline AudioClip read_wav(const std::string& path) { return decode_wav(detail::read_file_bytes(path)); }

inline AudioClip read_wav(const std::string& path, std::size_t expected_rate) {
    AudioClip c = read_wav(path);
    if (c.sample_rate != expected_rate) {
        throw SampleRateMismatchError(path + ": sample rate " + std::to_string(c.sample_rate) + " Hz, expected " +
                                      std::to_string(expected_rate) + " Hz");
    }
    return c;
}

inline std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavEncoding enc) {
    for (double v : clip.samples) {
        if (!std::isfinite(v)) throw NumericalError("cannot write non-finite samples");
    }
    const bool pcm = enc == WavEncoding::pcm16;
    const std::uint16_t bits = pcm ? 16 : 32;
    const std::uint32_t data_size = static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));
    detail::ByteWriter w;
    w.put(detail::fourcc("RIFF"));
    w.put(static_cast<std::uint32_t>(36 + data_size));
    w.put(detail::fourcc("WAVE"));
    w.put(detail::fourcc("fmt "));
    w.put(std::uint32_t{16});
    w.put(pcm ? detail::kFormatPcm : detail::kFormatFloat);
    w.put(std::uint16_t{1});
    w.put(static_cast<std::uint32_t>(clip.sample_rate));
    w.put(static_cast<std::uint32_t>(clip.sample_rate * (bits / 8)));
    w.put(static_cast<std::uint16_t>(bits / 8));
    w.put(bits);
    w.put(detail::fourcc("data"));
    w.put(data_size);
    for (double v : clip.samples) {
        if (pcm) {
            const double q = std::clamp(std::nearbyint(v * 32768.0), -32768.0, 32767.0);
            w.put(static_cast<std::int16_t>(q));
        } else {
            w.put(static_cast<float>(v));
        }
    }
    return std::move(w.bytes());
}

inline void write_wav(const std::string& path, const AudioClip& clip, WavEncoding enc = WavEncoding::float32) {
    detail::write_file_bytes(path, encode_wav(clip, enc));
}

// ---------------------------------------------------------------------------

struct Mixture {
    AudioClip noisy;
    AudioClip scaled_noise;
    double gain = 0.0;
    std::size_t offset = 0;
};

/// Crops noise at a seeded offset and scales it so the clean-to-noise ratio
/// equals snr_db.
inline Mixture mix_at_snr(const AudioClip& clean, const AudioClip& noise, double snr_db, std::uint64_t seed) {
    if (clean.sample_rate != noise.sample_rate) {
        throw SampleRateMismatchError("clean and noise sample rates differ");
    }
    if (clean.samples.empty()) throw ParameterError("clean clip is empty");
    if (noise.samples.size() < clean.samples.size()) throw ParameterError("noise is shorter than clean speech");
    if (!std::isfinite(snr_db)) throw ParameterError("SNR must be finite");
    const std::size_t len = clean.samples.size();
    Rng rng(seed);
    Mixture m;
    m.offset = static_cast<std::size_t>(rng.below(noise.samples.size() - len + 1));

    double pc = 0.0;
    double pn = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        pc += clean.samples[i] * clean.samples[i];
        const double v = noise.samples[m.offset + i];
        pn += v * v;
    }
    if (!(pc > 0.0)) throw ParameterError("clean clip is silent");
    if (!(pn > 0.0)) throw ParameterError("noise crop is silent");
    m.gain = std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));

    m.noisy.sample_rate = m.scaled_noise.sample_rate = clean.sample_rate;
    m.scaled_noise.samples.resize(len);
    m.noisy.samples.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
        m.scaled_noise.samples[i] = m.gain * noise.samples[m.offset + i];
        m.noisy.samples[i] = clean.samples[i] + m.scaled_noise.samples[i];
    }
    return m;
}

// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string id;
    std::string clean_path;
    std::string noise_path;
    double snr_db = 0.0;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

/// Parses `id,clean_path,noise_path,snr_db`. Relative paths resolve against
/// `base_dir` when one is given.
inline std::vector<ManifestEntry> parse_manifest(std::istream& in, const std::filesystem::path& base_dir = {}) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ManifestError(1, "missing header");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "id,clean_path,noise_path,snr_db") {
        throw ManifestError(line_no, "expected header 'id,clean_path,noise_path,snr_db'");
    }
    std::vector<ManifestEntry> entries;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 4) {
            throw ManifestError(line_no, "expected 4 fields, got " + std::to_string(f.size()));
        }
        ManifestEntry e;
        e.id = f[0];
        if (e.id.empty() || f[1].empty() || f[2].empty()) throw ManifestError(line_no, "empty field");
        try {
            std::size_t used = 0;
            e.snr_db = std::stod(f[3], &used);
            if (used != f[3].size() || !std::isfinite(e.snr_db)) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ManifestError(line_no, "cannot parse snr_db '" + f[3] + "'");
        }
        if (!seen.insert(e.id).second) throw ManifestError(line_no, "duplicate id '" + e.id + "'");
        auto resolve = [&](const std::string& p) {
            const std::filesystem::path path(p);
            return (path.is_absolute() || base_dir.empty()) ? p : (base_dir / path).string();
        };
        e.clean_path = resolve(f[1]);
        e.noise_path = resolve(f[2]);
        entries.push_back(std::move(e));
    }
    return entries;
}

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    return parse_manifest(in, std::filesystem::path(path).parent_path());
}

}  // namespace gft
