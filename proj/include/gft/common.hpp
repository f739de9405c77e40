#pragma once

#include <array>
#include <complex>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <openssl/evp.h>

#include "gft/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary formats are written with native little-endian stores");

namespace gft {

/// Dense row-major real matrix; rows are frames, columns are bins or samples.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ComplexMatrix =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Waveform = std::vector<double>;

/// SHA-256 digest binding spectrograms, masks and checkpoints to one basis.
using Fingerprint = std::array<std::uint8_t, 32>;

inline Fingerprint sha256(std::span<const std::uint8_t> bytes) {
    Fingerprint out{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != out.size()) {
        throw Error("SHA-256 digest failed");
    }
    return out;
}

inline std::string to_hex(const Fingerprint& fp) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    s.reserve(64);
    for (auto b : fp) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xF]);
    }
    return s;
}

/// printf("%.9g"), the precision used by every CSV the project emits.
inline std::string fmt9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace detail {

/// Append-only little-endian byte sink used by the binary writers.
class ByteWriter {
public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void put_bytes(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
    void put_doubles(const double* p, std::size_t count) {
        const auto* b = reinterpret_cast<const std::uint8_t*>(p);
        bytes_.insert(bytes_.end(), b, b + count * sizeof(double));
    }
    [[nodiscard]] const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked cursor over a byte buffer; throws TruncatedPayloadError on overrun.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}
    template <typename T>
    T get() {
        T v;
        take(&v, sizeof(T));
        return v;
    }
    void get_doubles(double* dst, std::size_t count) { take(dst, count * sizeof(double)); }
    void get_bytes(std::uint8_t* dst, std::size_t count) { take(dst, count); }
    [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }
    [[nodiscard]] std::size_t position() const { return pos_; }

private:
    void take(void* dst, std::size_t count) {
        if (count > remaining()) throw TruncatedPayloadError("unexpected end of payload");
        std::memcpy(dst, bytes_.data() + pos_, count);
        pos_ += count;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) out.insert(out.end(), buf, buf + got);
    const bool failed = std::ferror(f) != 0;
    std::fclose(f);
    if (failed) throw IoError("read error on " + path);
    return out;
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot create " + path);
    const std::size_t put = std::fwrite(bytes.data(), 1, bytes.size(), f);
    const bool failed = std::fclose(f) != 0 || put != bytes.size();
    if (failed) throw IoError("write error on " + path);
}

}  // namespace detail

}  // namespace gft
