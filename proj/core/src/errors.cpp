#include "engage/errors.hpp"

namespace engage {

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : ValidationError(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

ConvergenceError::ConvergenceError(const std::string& what, double last_residual)
    : Error(what + " (last residual " + std::to_string(last_residual) + ")"),
      last_residual_(last_residual) {}

}  // namespace engage
