#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace icmm {

inline constexpr const char* kVersion = "0.1.0";

// Configuration / usage problems. CLI exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent input data. CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure (non-positive-definite matrix, degenerate conditional,
// infeasible constraint state). CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Syntax error in the hypothesis language; carries a byte offset into the text.
struct HypothesisParseError : ConfigError {
  HypothesisParseError(const std::string& msg, std::size_t pos)
      : ConfigError(msg + " at position " + std::to_string(pos)), position(pos) {}
  std::size_t position;
};

}  // namespace icmm
