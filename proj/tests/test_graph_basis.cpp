#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "gft/graph_basis.hpp"
#include "test_support.hpp"

using namespace gft;

namespace {

/// Brute-force DFT of the first row, magnitudes sorted descending.
std::vector<double> dft_magnitudes(const AdjacencyMatrix& a) {
    const std::size_t n = a.n();
    std::vector<double> out(n);
    for (std::size_t m = 0; m < n; ++m) {
        std::complex<double> s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            s += a(0, j) * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(m * j) / static_cast<double>(n));
        }
        out[m] = std::abs(s);
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

}  // namespace

TEST(Adjacency, SingleForwardShift) {
    const auto a = build_adjacency(4, 1);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(a(i, j), j == (i + 1) % 4 ? 1.0 : 0.0) << i << "," << j;
    }
}

TEST(Adjacency, TwoNeighboursWrap) {
    const auto a = build_adjacency(4, 2);
    EXPECT_EQ(a.entries().row(0), (Eigen::RowVector4d() << 0, 1, 1, 0).finished());
    EXPECT_EQ(a.entries().row(3), (Eigen::RowVector4d() << 1, 1, 0, 0).finished());
}

TEST(Adjacency, InvariantsAtDefaultSize) {
    const auto a = build_adjacency(512, 3);
    const auto& e = a.entries();
    EXPECT_TRUE((e.rowwise().sum().array() == 3.0).all());
    EXPECT_TRUE((e.colwise().sum().array() == 3.0).all());
    EXPECT_TRUE((e.diagonal().array() == 0.0).all());
    for (std::size_t i = 0; i < 512; ++i) {
        for (std::size_t j = 0; j < 512; ++j) ASSERT_EQ(a(i, j), a((i + 1) % 512, (j + 1) % 512));
    }
}

TEST(Adjacency, RejectsInvalidParameters) {
    EXPECT_THROW(build_adjacency(4, 4), ParameterError);
    EXPECT_THROW(build_adjacency(4, 0), ParameterError);
    EXPECT_THROW(build_adjacency(1, 1), ParameterError);
    EXPECT_NO_THROW(build_adjacency(2, 1));
}

TEST(DecomposeSvd, PermutationHasUnitSingularValues) {
    for (std::size_t n : {5, 16, 64}) {
        const auto b = decompose_svd(build_adjacency(n, 1));
        EXPECT_LT((b.sigma.array() - 1.0).abs().maxCoeff(), 1e-12) << n;
    }
}

TEST(DecomposeSvd, KnownSpectrumN8K3) {
    const auto b = decompose_svd(build_adjacency(8, 3));
    const double r2 = std::sqrt(2.0);
    const std::vector<double> expected{3.0, 1.0 + r2, 1.0 + r2, 1.0, 1.0, 1.0, r2 - 1.0, r2 - 1.0};
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(b.sigma(static_cast<Eigen::Index>(i)), expected[i], 1e-12);
}

TEST(DecomposeSvd, InvariantsAcrossSizes) {
    for (std::size_t n : {2, 3, 7, 8, 16, 31, 64, 100}) {
        for (std::size_t k : {1, 3, 5, 7}) {
            if (k >= n) continue;
            const auto a = build_adjacency(n, k);
            const auto b = decompose_svd(a);
            SCOPED_TRACE("n=" + std::to_string(n) + " k=" + std::to_string(k));
            EXPECT_LT(orthogonality_error(b.psi), 1e-10);
            EXPECT_LT(orthogonality_error(b.gamma), 1e-10);
            EXPECT_LT(reconstruction_error(b, a), 1e-9);
            for (Eigen::Index i = 0; i + 1 < b.sigma.size(); ++i) {
                EXPECT_GE(b.sigma(i), b.sigma(i + 1) - 1e-10 * b.sigma(0));
            }
            EXPECT_GE(b.sigma.minCoeff(), 0.0);
            for (Eigen::Index c = 0; c < b.psi.cols(); ++c) {
                Eigen::Index arg = 0;
                const double peak = b.psi.col(c).cwiseAbs().maxCoeff(&arg);
                EXPECT_GT(b.psi(arg, c), 0.0) << "column " << c << " peak " << peak;
            }
            const auto oracle = circulant_singular_oracle(a);
            for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(b.sigma(static_cast<Eigen::Index>(i)), oracle[i], 1e-9);
        }
    }
}

TEST(DecomposeSvd, TiedColumnsAreLexicographic) {
    const auto b = decompose_svd(build_adjacency(16, 3));
    const double tol = 1e-10 * b.sigma(0);
    for (Eigen::Index c = 0; c + 1 < b.psi.cols(); ++c) {
        if (std::abs(b.sigma(c) - b.sigma(c + 1)) > tol) continue;
        const Vector x = b.psi.col(c);
        const Vector y = b.psi.col(c + 1);
        EXPECT_TRUE(std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(), y.data() + y.size()))
            << "columns " << c << "," << c + 1;
    }
}

TEST(DecomposeSvd, DeterministicBytes) {
    const auto a = build_adjacency(48, 5);
    EXPECT_EQ(serialize_basis(decompose_svd(a)), serialize_basis(decompose_svd(a)));
}

TEST(DecomposeSvd, RankDeficientNullSpaceIsCompleted) {
    // A_2 with n=4 has a zero singular value.
    const auto a = build_adjacency(4, 2);
    const auto b = decompose_svd(a);
    EXPECT_NEAR(b.sigma(3), 0.0, 1e-12);
    EXPECT_LT(orthogonality_error(b.psi), 1e-12);
    EXPECT_LT(orthogonality_error(b.gamma), 1e-12);
    EXPECT_LT(reconstruction_error(b, a), 1e-12);
}

TEST(DecomposeEvd, FourthRootsOfUnity) {
    const auto e = decompose_evd(build_adjacency(4, 1));
    const std::complex<double> expected[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
    for (int m = 0; m < 4; ++m) EXPECT_LT(std::abs(e.lambda(m) - expected[m]), 1e-12) << m;
}

TEST(DecomposeEvd, ReconstructsAndIsUnitary) {
    for (std::size_t n : {4, 9, 32, 128}) {
        for (std::size_t k : {1, 2, 3, 5}) {
            if (k >= n) continue;
            const auto a = build_adjacency(n, k);
            const auto e = decompose_evd(a);
            const ComplexMatrix r = e.u * e.lambda.asDiagonal() * e.u.adjoint();
            EXPECT_LT((r - a.entries().cast<std::complex<double>>()).cwiseAbs().maxCoeff(), 1e-9);
            const ComplexMatrix g = e.u.adjoint() * e.u;
            EXPECT_LT((g - ComplexMatrix::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff(), 1e-10);
            for (std::size_t m = 0; m < n; ++m) {
                std::complex<double> closed = 0.0;
                for (std::size_t d = 1; d <= k; ++d) {
                    closed += std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(m * d) / static_cast<double>(n));
                }
                EXPECT_LT(std::abs(e.lambda(static_cast<Eigen::Index>(m)) - closed), 1e-10);
            }
        }
    }
}

TEST(DecomposeEvd, MagnitudesMatchSingularValues) {
    const auto a = build_adjacency(8, 3);
    const auto e = decompose_evd(a);
    std::vector<double> mags;
    for (Eigen::Index m = 0; m < 8; ++m) mags.push_back(std::abs(e.lambda(m)));
    std::sort(mags.begin(), mags.end(), std::greater<>());
    const auto b = decompose_svd(a);
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(mags[i], b.sigma(i), 1e-9);
}

TEST(SingularOracle, SpecExamples) {
    const auto ones = circulant_singular_oracle(build_adjacency(16, 1));
    for (double v : ones) EXPECT_NEAR(v, 1.0, 1e-12);

    const auto a3 = circulant_singular_oracle(build_adjacency(8, 3));
    const double expected[8] = {3.0, 2.4142, 2.4142, 1.0, 1.0, 1.0, 0.4142, 0.4142};
    for (int i = 0; i < 8; ++i) EXPECT_NEAR(a3[i], expected[i], 1e-4);

    const auto a2 = circulant_singular_oracle(build_adjacency(4, 2));
    EXPECT_NEAR(a2[0], 2.0, 1e-12);
    EXPECT_NEAR(a2[1], std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(a2[2], std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(a2[3], 0.0, 1e-12);
}

TEST(SingularOracle, MatchesBruteForceDft) {
    for (std::size_t n : {6, 17, 40}) {
        for (std::size_t k : {1, 2, 5}) {
            const auto a = build_adjacency(n, k);
            const auto fast = circulant_singular_oracle(a);
            const auto slow = dft_magnitudes(a);
            for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(fast[i], slow[i], 1e-12);
        }
    }
}

class BasisFile : public ::testing::Test {
protected:
    void SetUp() override {
        basis = decompose_svd(build_adjacency(32, 3));
        bytes = serialize_basis(basis);
    }
    GraphBasis basis;
    std::vector<std::uint8_t> bytes;
};

TEST_F(BasisFile, LayoutMatchesFormat) {
    const std::size_t n = 32;
    EXPECT_EQ(bytes.size(), 20 + (2 * n * n + n) * 8 + 32);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "GFTB");
    std::uint32_t header[4];
    std::memcpy(header, bytes.data() + 4, sizeof header);
    EXPECT_EQ(header[0], 1u);
    EXPECT_EQ(header[1], n);
    EXPECT_EQ(header[2], 3u);
    EXPECT_EQ(header[3], 1u);
    double first;
    std::memcpy(&first, bytes.data() + 20, 8);
    EXPECT_EQ(first, basis.psi(0, 0));
}

TEST_F(BasisFile, SaveLoadIsBitExact) {
    test::TempDir dir;
    save_basis(basis, dir.file("b.gftb"));
    const auto loaded = load_basis(dir.file("b.gftb"));
    EXPECT_EQ(serialize_basis(loaded), bytes);
    EXPECT_EQ(loaded.fingerprint, basis.fingerprint);
    EXPECT_EQ(loaded.n, 32u);
    EXPECT_EQ(loaded.k, 3u);
}

TEST_F(BasisFile, CorruptionsGiveDistinctErrors) {
    auto magic = bytes;
    magic[1] = 'x';
    EXPECT_THROW(deserialize_basis(magic), MalformedHeaderError);

    auto flipped = bytes;
    flipped[500] ^= 0x10;
    EXPECT_THROW(deserialize_basis(flipped), FingerprintMismatchError);

    auto version = bytes;
    version[4] = 2;
    EXPECT_THROW(deserialize_basis(version), VersionMismatchError);

    EXPECT_THROW(deserialize_basis(std::span(bytes).first(bytes.size() - 1)), TruncatedPayloadError);
    EXPECT_THROW(deserialize_basis(std::span(bytes).first(10)), TruncatedPayloadError);

    auto topology = bytes;
    topology[16] = 7;
    EXPECT_THROW(deserialize_basis(topology), MalformedHeaderError);

    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_THROW(deserialize_basis(trailing), MalformedHeaderError);
}

TEST_F(BasisFile, RejectsNonOrthogonalPsiWithValidHash) {
    GraphBasis bad = basis;
    bad.psi(0, 0) += 1e-3;
    EXPECT_THROW(deserialize_basis(serialize_basis(bad)), DecompositionError);
}

TEST_F(BasisFile, MissingFileIsIoError) {
    EXPECT_THROW(load_basis("/nonexistent/dir/basis.gftb"), IoError);
}

TEST(Fingerprint, DependsOnNKAndPsi) {
    const auto b = decompose_svd(build_adjacency(16, 3));
    EXPECT_EQ(b.fingerprint, basis_fingerprint(16, 3, b.psi));
    EXPECT_NE(b.fingerprint, basis_fingerprint(16, 2, b.psi));
    Matrix p = b.psi;
    p(3, 3) = -p(3, 3);
    EXPECT_NE(b.fingerprint, basis_fingerprint(16, 3, p));
}
