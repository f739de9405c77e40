#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <span>
#include <vector>

#include "gft/common.hpp"

namespace gft {

inline constexpr double kReportFloorDb = 120.0;
inline constexpr double kNormFloor = 1e-12;

struct SiSdrResult {
    double value_db = 0.0;
    std::vector<double> grad;  // d value / d estimate; empty when not requested
};

namespace detail {

/// Shared SI-SDR core. Projection and residual norms are floored at
/// 1e-12 * ||estimate|| so the value stays scale invariant at the floor;
/// a floored term contributes the gradient of its floor.
inline SiSdrResult si_sdr_core(std::span<const double> est, std::span<const double> ref, bool want_grad) {
    if (est.size() != ref.size()) throw DimensionError("SI-SDR inputs differ in length");
    const std::size_t n = est.size();
    const double ref_energy = std::inner_product(ref.begin(), ref.end(), ref.begin(), 0.0);
    if (!(ref_energy > 0.0)) throw ParameterError("SI-SDR reference is silent");
    const double est_energy = std::inner_product(est.begin(), est.end(), est.begin(), 0.0);
    const double dot = std::inner_product(est.begin(), est.end(), ref.begin(), 0.0);
    const double scale = dot / ref_energy;

    SiSdrResult r;
    if (est_energy == 0.0) {
        r.value_db = -20.0 * std::log10(1.0 / kNormFloor);
        if (want_grad) r.grad.assign(n, 0.0);
        return r;
    }
    double res_energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = est[i] - scale * ref[i];
        res_energy += e * e;
    }
    const double proj_energy = scale * scale * ref_energy;
    const double floor_energy = kNormFloor * kNormFloor * est_energy;
    const bool proj_floored = proj_energy < floor_energy;
    const bool res_floored = res_energy < floor_energy;
    const double p2 = proj_floored ? floor_energy : proj_energy;
    const double e2 = res_floored ? floor_energy : res_energy;
    r.value_db = 10.0 * std::log10(p2 / e2);

    if (want_grad) {
        // value = (10 / ln 10) (ln p2 - ln e2); d p2 = 2 p, d e2 = 2 e, d floor = 2 floor/||s||^2 * s
        const double c = 10.0 / std::log(10.0);
        r.grad.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = scale * ref[i];
            const double e = est[i] - p;
            const double dp = proj_floored ? 2.0 * est[i] / est_energy : 2.0 * p / p2;
            const double de = res_floored ? 2.0 * est[i] / est_energy : 2.0 * e / e2;
            r.grad[i] = c * (dp - de);
        }
    }
    return r;
}

}  // namespace detail

inline double si_sdr(std::span<const double> estimate, std::span<const double> reference) {
    return detail::si_sdr_core(estimate, reference, false).value_db;
}

inline SiSdrResult si_sdr_value_and_grad(std::span<const double> estimate, std::span<const double> reference) {
    return detail::si_sdr_core(estimate, reference, true);
}

/// 10 log10(|signal|^2 / |noise|^2), clamped to +-120 dB.
inline double snr(std::span<const double> signal, std::span<const double> noise) {
    const double pn = std::inner_product(noise.begin(), noise.end(), noise.begin(), 0.0);
    if (!(pn > 0.0)) throw ParameterError("SNR noise reference is silent");
    const double ps = std::inner_product(signal.begin(), signal.end(), signal.begin(), 0.0);
    if (ps == 0.0) return -kReportFloorDb;
    return std::clamp(10.0 * std::log10(ps / pn), -kReportFloorDb, kReportFloorDb);
}

struct ReconstructionError {
    double max_abs = 0.0;
    double rel_l2 = 0.0;
};

inline ReconstructionError reconstruction_error(std::span<const double> x, std::span<const double> x_hat) {
    if (x.size() != x_hat.size()) throw DimensionError("reconstruction inputs differ in length");
    ReconstructionError r;
    double diff2 = 0.0;
    double ref2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - x_hat[i];
        r.max_abs = std::max(r.max_abs, std::abs(d));
        diff2 += d * d;
        ref2 += x[i] * x[i];
    }
    r.rel_l2 = std::sqrt(diff2) / std::max(std::sqrt(ref2), kNormFloor);
    return r;
}

struct EvalReport {
    std::optional<double> si_sdr_db;
    std::optional<double> si_sdr_improvement_db;
    std::optional<double> snr_db;
    std::optional<double> max_abs_error;
    std::optional<double> rel_l2_error;
};

/// Scores an enhanced waveform against the clean reference, with the noisy
/// input as the "before" point for the improvement figure.
inline EvalReport evaluate(std::span<const double> enhanced, std::span<const double> clean,
                           std::span<const double> noisy) {
    EvalReport rep;
    rep.si_sdr_db = si_sdr(enhanced, clean);
    rep.si_sdr_improvement_db = *rep.si_sdr_db - si_sdr(noisy, clean);
    std::vector<double> err(clean.size());
    if (enhanced.size() != clean.size()) throw DimensionError("enhanced/clean length mismatch");
    for (std::size_t i = 0; i < clean.size(); ++i) err[i] = enhanced[i] - clean[i];
    const bool silent_err = std::all_of(err.begin(), err.end(), [](double v) { return v == 0.0; });
    rep.snr_db = silent_err ? kReportFloorDb : snr(clean, err);
    const auto rec = reconstruction_error(clean, enhanced);
    rep.max_abs_error = rec.max_abs;
    rep.rel_l2_error = rec.rel_l2;
    return rep;
}

struct NamedReport {
    std::string file;
    EvalReport report;
};

/// Metrics CSV: one row per utterance, then a MEAN row over the present values.
inline void write_metrics_csv(std::ostream& os, std::span<const NamedReport> rows) {
    os << "file,si_sdr_db,si_sdr_imp_db,snr_db,max_abs_err,rel_l2_err\n";
    constexpr std::size_t kFields = 5;
    double sums[kFields] = {};
    std::size_t counts[kFields] = {};
    auto fields = [](const EvalReport& r) {
        return std::array<std::optional<double>, kFields>{r.si_sdr_db, r.si_sdr_improvement_db, r.snr_db,
                                                          r.max_abs_error, r.rel_l2_error};
    };
    for (const auto& row : rows) {
        os << row.file;
        const auto f = fields(row.report);
        for (std::size_t i = 0; i < kFields; ++i) {
            os << ',';
            if (f[i]) {
                os << fmt9(*f[i]);
                sums[i] += *f[i];
                ++counts[i];
            }
        }
        os << '\n';
    }
    os << "MEAN";
    for (std::size_t i = 0; i < kFields; ++i) {
        os << ',';
        if (counts[i] > 0) os << fmt9(sums[i] / static_cast<double>(counts[i]));
    }
    os << '\n';
}

}  // namespace gft
