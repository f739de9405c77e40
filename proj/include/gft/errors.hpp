#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gft {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter lies outside its domain (k >= n, empty input, negative rate...).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Operand shapes disagree (frame length vs basis size, mask vs spectrogram).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// The SVD did not converge or produced factors that fail validation.
class DecompositionError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss/gradient, imaginary residual above threshold, and similar.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Two artifacts were produced with different graph bases.
class BasisMismatchError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Binary file formats (basis, checkpoint).
class FormatError : public Error {
public:
    using Error::Error;
};
class MalformedHeaderError : public FormatError {
public:
    using FormatError::FormatError;
};
class TruncatedPayloadError : public FormatError {
public:
    using FormatError::FormatError;
};
class FingerprintMismatchError : public FormatError {
public:
    using FormatError::FormatError;
};
class VersionMismatchError : public FormatError {
public:
    using FormatError::FormatError;
};

// WAV container.
class WavError : public Error {
public:
    using Error::Error;
};
class MalformedRiffError : public WavError {
public:
    using WavError::WavError;
};
class UnsupportedLayoutError : public WavError {
public:
    using WavError::WavError;
};
class SampleRateMismatchError : public WavError {
public:
    using WavError::WavError;
};

/// Manifest CSV problem; carries the 1-based line number.
class ManifestError : public Error {
public:
    ManifestError(std::size_t line, const std::string& what)
        : Error("manifest line " + std::to_string(line) + ": " + what), line_(line) {}
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace gft
