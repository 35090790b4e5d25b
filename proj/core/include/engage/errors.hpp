#pragma once

#include <stdexcept>
#include <string>

namespace engage {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented contract (ranges, shapes, preconditions).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed file content. The message names the file and the 1-based line.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what);

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

/// Requested time range has no overlap with the available samples.
class EmptySliceError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Missing, unreadable or unwritable file or directory.
class IoError : public Error {
public:
    using Error::Error;
};

/// Iterative solver stopped at its iteration cap without meeting tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_residual);
    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

}  // namespace engage
