#pragma once

// Frame-wise transforms: the real GFT-SVD and the complex GFT-EVD and STFT
// baselines. All three use orthonormal/unitary scaling so frame energy is
// preserved.

#include <cmath>
#include <complex>
#include <ostream>
#include <span>
#include <string>

#include "gft/framing.hpp"
#include "gft/graph_basis.hpp"

namespace gft {

/// Real time-graph representation: one row of graph-frequency coefficients per frame.
struct TimeGraphSpectrogram {
    Matrix coeffs;  // F x N
    Fingerprint basis_fingerprint{};
    FramingConfig framing;
    std::size_t original_len = 0;
};

enum class SpectrumKind { stft, gft_evd };

struct ComplexSpectrogram {
    Matrix real;  // F x B
    Matrix imag;  // F x B
    SpectrumKind kind = SpectrumKind::stft;
    FramingConfig framing;
    std::size_t original_len = 0;
};

namespace detail {

inline FrameMatrix frames_like(Matrix data, const FramingConfig& cfg, std::size_t original_len) {
    FrameMatrix fm;
    fm.frames = std::move(data);
    fm.config = cfg;
    fm.original_len = original_len;
    fm.pad_pre = cfg.window_len;
    return fm;
}

inline void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) throw NumericalError(std::string(what) + " contains non-finite values");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// GFT-SVD: Y = psi * y per frame, y = psi^T * Y.

inline TimeGraphSpectrogram gft_svd_forward(const FrameMatrix& fm, const GraphBasis& basis) {
    if (fm.frames.cols() != static_cast<Eigen::Index>(basis.n)) {
        throw DimensionError("frame length " + std::to_string(fm.frames.cols()) +
                             " does not match basis size " + std::to_string(basis.n));
    }
    TimeGraphSpectrogram s;
    s.coeffs = fm.frames * basis.psi.transpose();
    s.basis_fingerprint = basis.fingerprint;
    s.framing = fm.config;
    s.original_len = fm.original_len;
    detail::require_finite(s.coeffs, "graph spectrogram");
    return s;
}

inline FrameMatrix gft_svd_inverse(const TimeGraphSpectrogram& spec, const GraphBasis& basis) {
    if (spec.basis_fingerprint != basis.fingerprint) {
        throw BasisMismatchError("spectrogram was produced with basis " + to_hex(spec.basis_fingerprint) +
                                 " but inverse requested with " + to_hex(basis.fingerprint));
    }
    if (spec.coeffs.cols() != static_cast<Eigen::Index>(basis.n)) {
        throw DimensionError("spectrogram width does not match basis size");
    }
    return detail::frames_like(spec.coeffs * basis.psi, spec.framing, spec.original_len);
}

// ---------------------------------------------------------------------------
// GFT-EVD: S = U^H s, s = Re(U S).

inline ComplexSpectrogram gft_evd_forward(const FrameMatrix& fm, const ComplexGraphBasis& cb) {
    if (fm.frames.cols() != static_cast<Eigen::Index>(cb.n)) {
        throw DimensionError("frame length does not match EVD basis size");
    }
    const ComplexMatrix s = fm.frames.cast<std::complex<double>>() * cb.u.conjugate();
    ComplexSpectrogram out;
    out.real = s.real();
    out.imag = s.imag();
    out.kind = SpectrumKind::gft_evd;
    out.framing = fm.config;
    out.original_len = fm.original_len;
    return out;
}

inline FrameMatrix gft_evd_inverse(const ComplexSpectrogram& spec, const ComplexGraphBasis& cb) {
    if (spec.kind != SpectrumKind::gft_evd) throw DimensionError("not a GFT-EVD spectrogram");
    if (spec.real.cols() != static_cast<Eigen::Index>(cb.n) || spec.imag.cols() != spec.real.cols() ||
        spec.imag.rows() != spec.real.rows()) {
        throw DimensionError("spectrogram width does not match EVD basis size");
    }
    ComplexMatrix s(spec.real.rows(), spec.real.cols());
    s.real() = spec.real;
    s.imag() = spec.imag;
    const ComplexMatrix frames = s * cb.u.transpose();
    const double residual = frames.rows() > 0 ? frames.imag().cwiseAbs().maxCoeff() : 0.0;
    if (!(residual < 1e-8)) {
        throw NumericalError("inverse GFT-EVD left an imaginary residual of " + fmt9(residual));
    }
    return detail::frames_like(frames.real(), spec.framing, spec.original_len);
}

// ---------------------------------------------------------------------------
// STFT with unitary scaling, bins 0..N/2.

namespace detail {

struct DftTables {
    Matrix cos_t;  // B x N : cos(2 pi m j / N) / sqrt(N)
    Matrix sin_t;  // B x N : sin(2 pi m j / N) / sqrt(N)
};

inline DftTables half_dft_tables(std::size_t n) {
    const std::size_t bins = n / 2 + 1;
    DftTables t;
    t.cos_t.resize(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(n));
    t.sin_t.resize(static_cast<Eigen::Index>(bins), static_cast<Eigen::Index>(n));
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t m = 0; m < bins; ++m) {
        for (std::size_t j = 0; j < n; ++j) {
            const std::complex<double> w = unit_root((m * j) % n, n);  // exp(-2 pi i m j / N)
            t.cos_t(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = w.real() * scale;
            t.sin_t(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = -w.imag() * scale;
        }
    }
    return t;
}

}  // namespace detail

inline ComplexSpectrogram stft_forward(const FrameMatrix& fm) {
    const auto n = static_cast<std::size_t>(fm.frames.cols());
    if (n < 2 || n % 2 != 0) throw DimensionError("STFT requires an even transform length");
    const auto t = detail::half_dft_tables(n);
    ComplexSpectrogram out;
    out.real = fm.frames * t.cos_t.transpose();
    out.imag = -(fm.frames * t.sin_t.transpose());
    out.kind = SpectrumKind::stft;
    out.framing = fm.config;
    out.original_len = fm.original_len;
    return out;
}

inline FrameMatrix stft_inverse(const ComplexSpectrogram& spec) {
    if (spec.kind != SpectrumKind::stft) throw DimensionError("not an STFT spectrogram");
    const std::size_t n = spec.framing.transform_len;
    const std::size_t bins = n / 2 + 1;
    if (spec.real.cols() != static_cast<Eigen::Index>(bins) || spec.imag.cols() != spec.real.cols() ||
        spec.imag.rows() != spec.real.rows()) {
        throw DimensionError("STFT spectrogram must have N/2+1 bins");
    }
    const auto t = detail::half_dft_tables(n);
    // x_j = (1/sqrt N) [X_0 + X_{N/2}(-1)^j + 2 Re sum_{0<m<N/2} X_m e^{+i 2 pi m j / N}]
    Vector weight = Vector::Constant(static_cast<Eigen::Index>(bins), 2.0);
    weight(0) = 1.0;
    weight(static_cast<Eigen::Index>(bins - 1)) = 1.0;
    const Matrix re = spec.real * weight.asDiagonal();
    const Matrix im = spec.imag * weight.asDiagonal();
    Matrix frames = re * t.cos_t - im * t.sin_t;
    return detail::frames_like(std::move(frames), spec.framing, spec.original_len);
}

/// |DFT| over all N bins with unitary scaling; used to show STFT mirror symmetry.
inline std::vector<double> full_dft_magnitude(std::span<const double> frame) {
    const std::size_t n = frame.size();
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    std::vector<double> mag(n);
    for (std::size_t m = 0; m < n; ++m) {
        std::complex<double> acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += frame[j] * detail::unit_root((m * j) % n, n);
        mag[m] = std::abs(acc) * scale;
    }
    return mag;
}

// ---------------------------------------------------------------------------
// Waveform-level chains.

inline TimeGraphSpectrogram analyze(std::span<const double> x, const FramingConfig& cfg,
                                    const GraphBasis& basis) {
    return gft_svd_forward(frame_signal(x, cfg), basis);
}

inline Waveform synthesize(const TimeGraphSpectrogram& spec, const GraphBasis& basis) {
    return overlap_add(gft_svd_inverse(spec, basis));
}

inline ComplexSpectrogram analyze_evd(std::span<const double> x, const FramingConfig& cfg,
                                      const ComplexGraphBasis& cb) {
    return gft_evd_forward(frame_signal(x, cfg), cb);
}

inline Waveform synthesize_evd(const ComplexSpectrogram& spec, const ComplexGraphBasis& cb) {
    return overlap_add(gft_evd_inverse(spec, cb));
}

inline ComplexSpectrogram analyze_stft(std::span<const double> x, const FramingConfig& cfg) {
    return stft_forward(frame_signal(x, cfg));
}

inline Waveform synthesize_stft(const ComplexSpectrogram& spec) { return overlap_add(stft_inverse(spec)); }

// ---------------------------------------------------------------------------
// CSV export: `frame,bin,value` or `frame,bin,real,imag`, 9 significant digits.

inline void write_spectrogram_csv(std::ostream& os, const Matrix& values) {
    os << "frame,bin,value\n";
    for (Eigen::Index f = 0; f < values.rows(); ++f) {
        for (Eigen::Index b = 0; b < values.cols(); ++b) {
            os << f << ',' << b << ',' << fmt9(values(f, b)) << '\n';
        }
    }
}

inline void write_spectrogram_csv(std::ostream& os, const ComplexSpectrogram& spec) {
    os << "frame,bin,real,imag\n";
    for (Eigen::Index f = 0; f < spec.real.rows(); ++f) {
        for (Eigen::Index b = 0; b < spec.real.cols(); ++b) {
            os << f << ',' << b << ',' << fmt9(spec.real(f, b)) << ',' << fmt9(spec.imag(f, b)) << '\n';
        }
    }
}

}  // namespace gft
