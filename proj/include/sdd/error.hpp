#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdd {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape mismatch, non-finite values, out-of-domain parameters.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A linear system that cannot be solved at the requested regularization.
class NumericalRankError : public Error {
public:
    using Error::Error;
};

/// A required subset of the data (treatment arm, (T, M) cell) is empty.
class InsufficientData : public Error {
public:
    using Error::Error;
};

/// Scoring requested without a ground-truth reference.
class UnsupportedEvaluation : public Error {
public:
    using Error::Error;
};

/// A statistic that is not defined for the given sample.
class UndefinedStatistic : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Line numbers are 1-based; column 0 means "whole line".
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, std::size_t column,
               const std::string& what)
        : Error(source + ":" + std::to_string(line) +
                (column > 0 ? ":" + std::to_string(column) : std::string{}) + ": " + what),
          line_(line),
          column_(column) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

}  // namespace sdd
