#pragma once

// Deterministic synthetic test material: voiced, speech-like clean signals
// and white / pink noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "gft/rng.hpp"

namespace gft {

/// Harmonic source with a wandering pitch, three formant resonances shaping
/// the harmonic amplitudes, and a ~4 Hz syllabic envelope with short pauses.
/// Peak-normalized to 0.5.
inline std::vector<double> speech_like(std::size_t len, std::size_t sample_rate, std::uint64_t seed) {
    Rng rng(seed);
    const double fs = static_cast<double>(sample_rate);
    const double f0_base = rng.uniform(100.0, 220.0);
    const double vibrato_rate = rng.uniform(2.0, 5.0);
    const double syll_rate = rng.uniform(3.0, 5.0);
    const double syll_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double formants[3] = {rng.uniform(400.0, 800.0), rng.uniform(1000.0, 1800.0), rng.uniform(2200.0, 3000.0)};
    const double bandwidths[3] = {120.0, 200.0, 300.0};
    const double nyquist_limit = std::min(4000.0, 0.45 * fs);

    std::vector<double> x(len, 0.0);
    double phase = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        const double t = static_cast<double>(i) / fs;
        const double f0 = f0_base * (1.0 + 0.15 * std::sin(2.0 * std::numbers::pi * vibrato_rate * t));
        phase += 2.0 * std::numbers::pi * f0 / fs;
        double v = 0.0;
        for (int h = 1; h * f0 < nyquist_limit; ++h) {
            const double fh = h * f0;
            double amp = 0.0;
            for (int k = 0; k < 3; ++k) {
                const double d = (fh - formants[k]) / bandwidths[k];
                amp += std::exp(-0.5 * d * d) / (k + 1);
            }
            v += (amp + 0.02) * std::sin(h * phase);
        }
        const double s = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * syll_rate * t + syll_phase);
        x[i] = v * std::pow(s, 1.5);
    }
    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak > 0.0) {
        for (auto& v : x) v *= 0.5 / peak;
    }
    return x;
}

inline std::vector<double> white_noise(std::size_t len, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(len);
    for (auto& v : x) v = 0.1 * rng.normal();
    return x;
}

/// Pink (1/f) noise from Gaussian white noise via Paul Kellet's filter.
inline std::vector<double> pink_noise(std::size_t len, std::uint64_t seed) {
    Rng rng(seed);
    double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
    std::vector<double> x(len);
    for (auto& v : x) {
        const double w = rng.normal();
        b0 = 0.99886 * b0 + w * 0.0555179;
        b1 = 0.99332 * b1 + w * 0.0750759;
        b2 = 0.96900 * b2 + w * 0.1538520;
        b3 = 0.86650 * b3 + w * 0.3104856;
        b4 = 0.55000 * b4 + w * 0.5329522;
        b5 = -0.7616 * b5 - w * 0.0168980;
        v = 0.02 * (b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362);
        b6 = w * 0.115926;
    }
    return x;
}

}  // namespace gft
