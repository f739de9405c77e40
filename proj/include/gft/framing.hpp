#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gft/common.hpp"

namespace gft {

enum class WindowKind { hann_periodic, rectangular };

struct FramingConfig {
    std::size_t sample_rate = 16000;
    std::size_t window_len = 400;   // 25 ms
    std::size_t hop = 100;          // 6.25 ms
    std::size_t transform_len = 512;
    WindowKind window_kind = WindowKind::hann_periodic;

    void validate() const {
        if (sample_rate == 0 || window_len == 0 || hop == 0 || transform_len == 0) {
            throw ParameterError("framing parameters must be positive");
        }
        if (hop > window_len || window_len > transform_len) {
            throw ParameterError("framing requires hop <= window <= transform length (hop=" +
                                 std::to_string(hop) + ", window=" + std::to_string(window_len) +
                                 ", N=" + std::to_string(transform_len) + ")");
        }
    }

    /// Window and hop given in milliseconds, rounded to the nearest sample.
    static FramingConfig from_ms(double window_ms, double hop_ms, std::size_t sample_rate,
                                 std::size_t transform_len) {
        if (!(window_ms > 0.0) || !(hop_ms > 0.0)) throw ParameterError("window/hop must be positive");
        FramingConfig c;
        c.sample_rate = sample_rate;
        c.window_len = static_cast<std::size_t>(std::llround(window_ms * 1e-3 * static_cast<double>(sample_rate)));
        c.hop = static_cast<std::size_t>(std::llround(hop_ms * 1e-3 * static_cast<double>(sample_rate)));
        c.transform_len = transform_len;
        c.validate();
        return c;
    }

    friend bool operator==(const FramingConfig&, const FramingConfig&) = default;
};

struct FrameMatrix {
    Matrix frames;  // F x N
    FramingConfig config;
    std::size_t original_len = 0;
    std::size_t pad_pre = 0;
};

inline std::vector<double> make_window(WindowKind kind, std::size_t len) {
    std::vector<double> w(len, 1.0);
    if (kind == WindowKind::hann_periodic) {
        for (std::size_t i = 0; i < len; ++i) {
            w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
        }
    }
    return w;
}

/// Frames for a signal of `len` samples padded by one window on each side.
inline std::size_t frame_count(std::size_t len, const FramingConfig& cfg) {
    const std::size_t padded = len + 2 * cfg.window_len;
    return (padded - cfg.window_len + cfg.hop - 1) / cfg.hop + 1;
}

inline FrameMatrix frame_signal(std::span<const double> x, const FramingConfig& cfg) {
    cfg.validate();
    if (x.empty()) throw ParameterError("cannot frame an empty signal");
    const std::size_t w_len = cfg.window_len;
    const std::size_t n_frames = frame_count(x.size(), cfg);
    const auto window = make_window(cfg.window_kind, w_len);

    FrameMatrix fm;
    fm.config = cfg;
    fm.original_len = x.size();
    fm.pad_pre = w_len;
    fm.frames = Matrix::Zero(static_cast<Eigen::Index>(n_frames), static_cast<Eigen::Index>(cfg.transform_len));
    for (std::size_t m = 0; m < n_frames; ++m) {
        const std::size_t start = m * cfg.hop;  // index into the padded signal
        for (std::size_t j = 0; j < w_len; ++j) {
            const std::size_t p = start + j;
            if (p < w_len || p >= w_len + x.size()) continue;
            fm.frames(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = x[p - w_len] * window[j];
        }
    }
    return fm;
}

namespace detail {

/// Pointwise WOLA normalizer sum_m w(n - mH)^2 over the padded signal, floored.
inline std::vector<double> wola_denominator(const FramingConfig& cfg, std::size_t n_frames,
                                            std::size_t padded_len, std::span<const double> window) {
    std::vector<double> den(padded_len, 0.0);
    for (std::size_t m = 0; m < n_frames; ++m) {
        for (std::size_t j = 0; j < cfg.window_len; ++j) {
            const std::size_t p = m * cfg.hop + j;
            if (p < padded_len) den[p] += window[j] * window[j];
        }
    }
    for (auto& d : den) d = std::max(d, 1e-8);
    return den;
}

inline void check_frame_layout(const FrameMatrix& fm) {
    fm.config.validate();
    if (fm.frames.cols() != static_cast<Eigen::Index>(fm.config.transform_len)) {
        throw DimensionError("frame width " + std::to_string(fm.frames.cols()) +
                             " does not match transform length " + std::to_string(fm.config.transform_len));
    }
    if (fm.original_len == 0 ||
        fm.frames.rows() != static_cast<Eigen::Index>(frame_count(fm.original_len, fm.config))) {
        throw DimensionError("frame count " + std::to_string(fm.frames.rows()) +
                             " inconsistent with original length " + std::to_string(fm.original_len));
    }
    if (fm.pad_pre != fm.config.window_len) throw DimensionError("unexpected leading pad");
}

}  // namespace detail

/// Weighted overlap-add. Only the first W columns of each frame contribute.
inline Waveform overlap_add(const FrameMatrix& fm) {
    detail::check_frame_layout(fm);
    const auto& cfg = fm.config;
    const std::size_t n_frames = static_cast<std::size_t>(fm.frames.rows());
    const std::size_t padded_len = fm.original_len + 2 * cfg.window_len;
    const auto window = make_window(cfg.window_kind, cfg.window_len);
    const auto den = detail::wola_denominator(cfg, n_frames, padded_len, window);

    std::vector<double> acc(padded_len, 0.0);
    for (std::size_t m = 0; m < n_frames; ++m) {
        for (std::size_t j = 0; j < cfg.window_len; ++j) {
            const std::size_t p = m * cfg.hop + j;
            if (p < padded_len) acc[p] += fm.frames(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) * window[j];
        }
    }
    Waveform out(fm.original_len);
    for (std::size_t i = 0; i < fm.original_len; ++i) {
        const std::size_t p = i + fm.pad_pre;
        out[i] = acc[p] / den[p];
    }
    return out;
}

/// Adjoint of overlap_add: maps a gradient over the output samples back onto
/// frame space (columns W..N-1 receive zero).
inline Matrix overlap_add_adjoint(std::span<const double> grad, const FrameMatrix& layout) {
    detail::check_frame_layout(layout);
    if (grad.size() != layout.original_len) throw DimensionError("gradient length mismatch");
    const auto& cfg = layout.config;
    const std::size_t n_frames = static_cast<std::size_t>(layout.frames.rows());
    const std::size_t padded_len = layout.original_len + 2 * cfg.window_len;
    const auto window = make_window(cfg.window_kind, cfg.window_len);
    const auto den = detail::wola_denominator(cfg, n_frames, padded_len, window);

    Matrix out = Matrix::Zero(layout.frames.rows(), layout.frames.cols());
    for (std::size_t m = 0; m < n_frames; ++m) {
        for (std::size_t j = 0; j < cfg.window_len; ++j) {
            const std::size_t p = m * cfg.hop + j;
            if (p < layout.pad_pre || p >= layout.pad_pre + layout.original_len) continue;
            out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) =
                window[j] * grad[p - layout.pad_pre] / den[p];
        }
    }
    return out;
}

}  // namespace gft
