#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relmap {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (non-finite data, bad parameter).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Shapes of two inputs disagree, or a requested shape is not attainable.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure; the message always carries the offending path.
class IoError : public Error {
public:
    using Error::Error;
};

/// NIfTI header or body could not be decoded.
class ParseError : public Error {
public:
    ParseError(std::string field, std::size_t offset, const std::string& what)
        : Error("nifti: field '" + field + "' at byte " + std::to_string(offset) + ": " + what),
          field_(std::move(field)), offset_(offset) {}

    const std::string& field() const noexcept { return field_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::string field_;
    std::size_t offset_;
};

/// Volume bundle directory is inconsistent.
class BundleError : public Error {
public:
    enum class Kind { MissingFile, SizeMismatch, UnknownSequence, MalformedMetadata };

    BundleError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// Failure talking to a classifier. Connection and timeout failures are retryable.
class OracleError : public Error {
public:
    enum class Kind { Connection, Timeout, HttpStatus, MalformedResponse, OutOfRange, Internal };

    OracleError(Kind kind, const std::string& what, int http_status = 0)
        : Error(what), kind_(kind), http_status_(http_status) {}

    Kind kind() const noexcept { return kind_; }
    int http_status() const noexcept { return http_status_; }
    bool retryable() const noexcept { return kind_ == Kind::Connection || kind_ == Kind::Timeout; }

private:
    Kind kind_;
    int http_status_;
};

/// An internal invariant was broken. Indicates a bug, never bad input.
class InvariantError : public Error {
public:
    using Error::Error;
};

}  // namespace relmap
