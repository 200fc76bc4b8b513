#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace semlp {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// Raised when an operation needs state that was never produced (missing
// forward cache, absent normalization parameters).
class StateError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class BatchTooSmallError : public Error {
public:
    using Error::Error;
};

class GenerationError : public Error {
public:
    using Error::Error;
};

class NormalizationError : public Error {
public:
    using Error::Error;
};

enum class LoadFailure { io, bad_magic, version_mismatch, truncated, checksum, malformed, invariant, pairing };

const char* to_string(LoadFailure failure) noexcept;

class LoadError : public Error {
public:
    LoadError(LoadFailure failure, const std::string& what)
        : Error(std::string(to_string(failure)) + ": " + what), failure_(failure) {}

    LoadFailure failure() const noexcept { return failure_; }

private:
    LoadFailure failure_;
};

// CSV parse failure; carries the 1-based data row numbers that were rejected.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::vector<std::size_t> rows = {})
        : Error(what), rows_(std::move(rows)) {}

    const std::vector<std::size_t>& rows() const noexcept { return rows_; }

private:
    std::vector<std::size_t> rows_;
};

} // namespace semlp
