#pragma once

// k-neighbour cyclic shift graphs and their Fourier bases.
//
// The adjacency A_k links sample i to samples i+1..i+k (mod n). The real
// basis is the left singular matrix of A_k, computed by one-sided Jacobi and
// canonicalized so that repeated runs produce byte-identical factors. The
// complex baseline basis is the unitary DFT matrix, which diagonalizes any
// circulant matrix.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "gft/common.hpp"

namespace gft {

/// Topology identifiers stored in basis files.
enum class Topology : std::uint32_t { cyclic_forward = 1 };

class AdjacencyMatrix {
public:
    AdjacencyMatrix(std::size_t n, std::size_t k, Matrix entries)
        : n_(n), k_(k), entries_(std::move(entries)) {}

    [[nodiscard]] std::size_t n() const noexcept { return n_; }
    [[nodiscard]] std::size_t k() const noexcept { return k_; }
    [[nodiscard]] const Matrix& entries() const noexcept { return entries_; }
    [[nodiscard]] double operator()(std::size_t i, std::size_t j) const {
        return entries_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

private:
    std::size_t n_;
    std::size_t k_;
    Matrix entries_;
};

/// Real SVD factors of A_k: A_k = psi * diag(sigma) * gamma^T.
struct GraphBasis {
    std::size_t n = 0;
    std::size_t k = 0;
    Matrix psi;    ///< left singular vectors in columns (orthogonal)
    Vector sigma;  ///< non-increasing, non-negative
    Matrix gamma;  ///< right singular vectors in columns (orthogonal)
    Fingerprint fingerprint{};
};

/// Eigen decomposition of circulant A_k: A_k = u * diag(lambda) * u^H.
struct ComplexGraphBasis {
    std::size_t n = 0;
    std::size_t k = 0;
    ComplexMatrix u;
    Eigen::VectorXcd lambda;
};

inline AdjacencyMatrix build_adjacency(std::size_t n, std::size_t k) {
    if (n < 2) throw ParameterError("graph needs at least 2 vertices, got n=" + std::to_string(n));
    if (k < 1 || k >= n) {
        throw ParameterError("neighbour count must satisfy 1 <= k < n, got k=" + std::to_string(k) +
                             ", n=" + std::to_string(n));
    }
    Matrix a = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t d = 1; d <= k; ++d) {
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>((i + d) % n)) = 1.0;
        }
    }
    return {n, k, std::move(a)};
}

/// Digest of (n, k, psi) identifying a basis independently of sigma/gamma.
inline Fingerprint basis_fingerprint(std::size_t n, std::size_t k, const Matrix& psi) {
    detail::ByteWriter w;
    w.put(static_cast<std::uint32_t>(n));
    w.put(static_cast<std::uint32_t>(k));
    w.put_doubles(psi.data(), static_cast<std::size_t>(psi.size()));
    return sha256(w.bytes());
}

/// Largest |M^T M - I| entry.
inline double orthogonality_error(const Matrix& m) {
    const Matrix g = m.transpose() * m;
    return (g - Matrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff();
}

inline double reconstruction_error(const GraphBasis& b, const AdjacencyMatrix& a) {
    const Matrix r = b.psi * b.sigma.asDiagonal() * b.gamma.transpose();
    return (r - a.entries()).cwiseAbs().maxCoeff();
}

namespace detail {

struct JacobiResult {
    std::vector<double> u;  // column-major n x n, columns = A*V (unnormalized)
    std::vector<double> v;  // column-major n x n
    int sweeps = 0;
};

/// One-sided (Hestenes) Jacobi: rotates column pairs of A until all are
/// mutually orthogonal to working precision. Cyclic pair order, single thread.
inline JacobiResult one_sided_jacobi(const Matrix& a, int max_sweeps = 60) {
    const std::size_t n = static_cast<std::size_t>(a.rows());
    JacobiResult r;
    r.u.assign(n * n, 0.0);
    r.v.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            r.u[j * n + i] = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        r.v[j * n + j] = 1.0;
    }
    const double tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon();
    std::vector<double> norms(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double* c = &r.u[j * n];
        norms[j] = std::inner_product(c, c + n, c, 0.0);
    }

    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double* up = &r.u[p * n];
                double* uq = &r.u[q * n];
                const double alpha = norms[p];
                const double beta = norms[q];
                if (alpha == 0.0 || beta == 0.0) continue;
                const double gamma = std::inner_product(up, up + n, uq, 0.0);
                if (std::abs(gamma) <= tol * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                double np = 0.0;
                double nq = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = up[i];
                    const double y = uq[i];
                    up[i] = c * x - s * y;
                    uq[i] = s * x + c * y;
                    np += up[i] * up[i];
                    nq += uq[i] * uq[i];
                }
                norms[p] = np;
                norms[q] = nq;
                double* vp = &r.v[p * n];
                double* vq = &r.v[q * n];
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = vp[i];
                    const double y = vq[i];
                    vp[i] = c * x - s * y;
                    vq[i] = s * x + c * y;
                }
            }
        }
        if (!rotated) {
            r.sweeps = sweep;
            return r;
        }
    }
    throw DecompositionError("Jacobi SVD did not converge within " + std::to_string(max_sweeps) +
                             " sweeps");
}

}  // namespace detail

/// Canonical real SVD of A_k.
///
/// Ordering: sigma non-increasing; columns whose sigma agree to within
/// 1e-10 * sigma_max count as tied and are ordered lexicographically by
/// their sign-canonical psi column. Each psi column has its largest-magnitude
/// entry (first such row on ties) positive; gamma columns flip with it.
/// Null-space columns of psi are completed by Gram-Schmidt from the
/// standard basis vector with the largest residual (lowest index on ties).
inline GraphBasis decompose_svd(const AdjacencyMatrix& a) {
    const std::size_t n = a.n();
    const auto ni = static_cast<Eigen::Index>(n);
    detail::JacobiResult jr = detail::one_sided_jacobi(a.entries());

    std::vector<double> sv(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double* c = &jr.u[j * n];
        sv[j] = std::sqrt(std::inner_product(c, c + n, c, 0.0));
    }
    const double smax = *std::max_element(sv.begin(), sv.end());
    if (!(smax > 0.0) || !std::isfinite(smax)) throw DecompositionError("degenerate input matrix");
    const double zero_tol = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * smax;
    const double tie_tol = 1e-10 * smax;

    Matrix psi = Matrix::Zero(ni, ni);
    Matrix gamma(ni, ni);
    Vector sigma(ni);
    std::vector<bool> null_col(n, false);
    for (std::size_t j = 0; j < n; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        for (std::size_t i = 0; i < n; ++i) gamma(static_cast<Eigen::Index>(i), jj) = jr.v[j * n + i];
        if (sv[j] <= zero_tol) {
            sigma(jj) = 0.0;
            null_col[j] = true;
            continue;
        }
        sigma(jj) = sv[j];
        for (std::size_t i = 0; i < n; ++i) psi(static_cast<Eigen::Index>(i), jj) = jr.u[j * n + i] / sv[j];
    }

    // Complete psi over the null space of A^T.
    std::vector<bool> placed(n);
    for (std::size_t j = 0; j < n; ++j) placed[j] = !null_col[j];
    for (std::size_t j = 0; j < n; ++j) {
        if (!null_col[j]) continue;
        const auto jj = static_cast<Eigen::Index>(j);
        Eigen::Index best = -1;
        double best_res = 0.0;
        for (Eigen::Index i = 0; i < ni; ++i) {
            double cover = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
                if (placed[c]) cover += psi(i, static_cast<Eigen::Index>(c)) * psi(i, static_cast<Eigen::Index>(c));
            }
            if (1.0 - cover > best_res + 1e-12) {
                best_res = 1.0 - cover;
                best = i;
            }
        }
        if (best < 0 || best_res < 1e-6) throw DecompositionError("could not complete left singular basis");
        Vector cand = Vector::Zero(ni);
        cand(best) = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t c = 0; c < n; ++c) {
                if (!placed[c]) continue;
                const auto cc = static_cast<Eigen::Index>(c);
                cand -= psi.col(cc).dot(cand) * psi.col(cc);
            }
        }
        psi.col(jj) = cand / cand.norm();
        placed[j] = true;
    }

    // Sign canonicalization.
    for (Eigen::Index j = 0; j < ni; ++j) {
        Eigen::Index best = 0;
        double best_abs = -1.0;
        for (Eigen::Index i = 0; i < ni; ++i) {
            const double v = std::abs(psi(i, j));
            if (v > best_abs) {
                best_abs = v;
                best = i;
            }
        }
        if (best_abs > 0.0 && psi(best, j) < 0.0) {
            psi.col(j) = -psi.col(j);
            gamma.col(j) = -gamma.col(j);
        }
    }

    // Ordering.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return sigma(static_cast<Eigen::Index>(x)) > sigma(static_cast<Eigen::Index>(y));
    });
    auto lex_less = [&](std::size_t x, std::size_t y) {
        const auto cx = psi.col(static_cast<Eigen::Index>(x));
        const auto cy = psi.col(static_cast<Eigen::Index>(y));
        for (Eigen::Index i = 0; i < ni; ++i) {
            if (cx(i) < cy(i)) return true;
            if (cx(i) > cy(i)) return false;
        }
        return x < y;
    };
    for (std::size_t start = 0; start < n;) {
        std::size_t end = start + 1;
        while (end < n && sigma(static_cast<Eigen::Index>(order[start])) -
                                  sigma(static_cast<Eigen::Index>(order[end])) <=
                              tie_tol) {
            ++end;
        }
        std::sort(order.begin() + static_cast<std::ptrdiff_t>(start),
                  order.begin() + static_cast<std::ptrdiff_t>(end), lex_less);
        start = end;
    }

    GraphBasis out;
    out.n = n;
    out.k = a.k();
    out.psi.resize(ni, ni);
    out.gamma.resize(ni, ni);
    out.sigma.resize(ni);
    for (std::size_t j = 0; j < n; ++j) {
        const auto src = static_cast<Eigen::Index>(order[j]);
        const auto dst = static_cast<Eigen::Index>(j);
        out.psi.col(dst) = psi.col(src);
        out.gamma.col(dst) = gamma.col(src);
        out.sigma(dst) = sigma(src);
    }

    const double psi_err = orthogonality_error(out.psi);
    const double gamma_err = orthogonality_error(out.gamma);
    const double rec_err = reconstruction_error(out, a);
    if (!(psi_err < 1e-10) || !(gamma_err < 1e-10) || !(rec_err < 1e-9)) {
        throw DecompositionError("SVD factors failed validation: |PsiT Psi - I|=" + fmt9(psi_err) +
                                 " |GammaT Gamma - I|=" + fmt9(gamma_err) +
                                 " |reconstruction|=" + fmt9(rec_err));
    }
    out.fingerprint = basis_fingerprint(out.n, out.k, out.psi);
    return out;
}

namespace detail {

/// exp(-2 pi i * num / n), with the angle reduced mod n before scaling.
inline std::complex<double> unit_root(std::size_t num, std::size_t n) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(num % n) / static_cast<double>(n);
    return {std::cos(angle), std::sin(angle)};
}

}  // namespace detail

/// Closed-form diagonalization of circulant A_k by the unitary DFT matrix.
/// Column m of u is exp(-2 pi i j m / n) / sqrt(n); lambda_m = sum_d exp(-2 pi i m d / n).
inline ComplexGraphBasis decompose_evd(const AdjacencyMatrix& a) {
    const std::size_t n = a.n();
    const auto ni = static_cast<Eigen::Index>(n);
    ComplexGraphBasis b;
    b.n = n;
    b.k = a.k();
    b.u.resize(ni, ni);
    b.lambda.resize(ni);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t m = 0; m < n; ++m) {
            b.u(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)) =
                detail::unit_root((j * m) % n, n) * scale;
        }
    }
    for (std::size_t m = 0; m < n; ++m) {
        std::complex<double> sum = 0.0;
        for (std::size_t d = 1; d <= a.k(); ++d) sum += detail::unit_root((m * d) % n, n);
        b.lambda(static_cast<Eigen::Index>(m)) = sum;
    }
    return b;
}

/// Sorted (non-increasing) magnitudes of the DFT of the first row of a
/// circulant matrix, i.e. its singular values. Direct O(n^2) evaluation.
inline std::vector<double> circulant_singular_oracle(const AdjacencyMatrix& a) {
    const std::size_t n = a.n();
    std::vector<double> mags(n);
    for (std::size_t m = 0; m < n; ++m) {
        std::complex<double> sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = a(0, j);
            if (v != 0.0) sum += v * detail::unit_root((j * m) % n, n);
        }
        mags[m] = std::abs(sum);
    }
    std::sort(mags.begin(), mags.end(), std::greater<>());
    return mags;
}

// ---------------------------------------------------------------------------
// Basis file: "GFTB", u32 version, u32 n, u32 k, u32 topology, psi, sigma,
// gamma (float64, row-major), then SHA-256 of every preceding byte.

inline constexpr std::uint32_t kBasisFormatVersion = 1;

inline std::vector<std::uint8_t> serialize_basis(const GraphBasis& b) {
    detail::ByteWriter w;
    w.put_bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("GFTB"), 4));
    w.put(kBasisFormatVersion);
    w.put(static_cast<std::uint32_t>(b.n));
    w.put(static_cast<std::uint32_t>(b.k));
    w.put(static_cast<std::uint32_t>(Topology::cyclic_forward));
    w.put_doubles(b.psi.data(), static_cast<std::size_t>(b.psi.size()));
    w.put_doubles(b.sigma.data(), static_cast<std::size_t>(b.sigma.size()));
    w.put_doubles(b.gamma.data(), static_cast<std::size_t>(b.gamma.size()));
    const Fingerprint h = sha256(w.bytes());
    w.put_bytes(h);
    return std::move(w.bytes());
}

inline GraphBasis deserialize_basis(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "GFTB", 4) != 0) {
        throw MalformedHeaderError("not a basis file (bad magic)");
    }
    detail::ByteReader r(bytes.subspan(4));
    const auto version = r.get<std::uint32_t>();
    if (version != kBasisFormatVersion) {
        throw VersionMismatchError("unsupported basis format version " + std::to_string(version));
    }
    const auto n = r.get<std::uint32_t>();
    const auto k = r.get<std::uint32_t>();
    const auto topology = r.get<std::uint32_t>();
    if (topology != static_cast<std::uint32_t>(Topology::cyclic_forward)) {
        throw MalformedHeaderError("unknown topology id " + std::to_string(topology));
    }
    if (n < 2 || n > 65536 || k < 1 || k >= n) {
        throw MalformedHeaderError("invalid dimensions n=" + std::to_string(n) + " k=" + std::to_string(k));
    }
    const std::size_t payload = (2 * std::size_t{n} * n + n) * sizeof(double) + 32;
    if (r.remaining() < payload) throw TruncatedPayloadError("basis payload truncated");
    if (r.remaining() > payload) throw MalformedHeaderError("trailing bytes after basis payload");

    GraphBasis b;
    b.n = n;
    b.k = k;
    const auto ni = static_cast<Eigen::Index>(n);
    b.psi.resize(ni, ni);
    b.sigma.resize(ni);
    b.gamma.resize(ni, ni);
    r.get_doubles(b.psi.data(), std::size_t{n} * n);
    r.get_doubles(b.sigma.data(), n);
    r.get_doubles(b.gamma.data(), std::size_t{n} * n);
    Fingerprint stored{};
    r.get_bytes(stored.data(), stored.size());
    const Fingerprint actual = sha256(bytes.first(bytes.size() - 32));
    if (stored != actual) throw FingerprintMismatchError("basis content hash does not match payload");
    b.fingerprint = basis_fingerprint(b.n, b.k, b.psi);
    // The inverse transform uses psi^T, which is only valid for orthogonal psi.
    if (!(orthogonality_error(b.psi) < 1e-10)) throw DecompositionError("stored psi is not orthogonal");
    return b;
}

inline void save_basis(const GraphBasis& b, const std::string& path) {
    detail::write_file_bytes(path, serialize_basis(b));
}

inline GraphBasis load_basis(const std::string& path) {
    return deserialize_basis(detail::read_file_bytes(path));
}

}  // namespace gft
