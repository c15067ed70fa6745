#pragma once

#include <stdexcept>
#include <string>

namespace drsl {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape / dimension mismatches between operands.
struct ShapeError : Error {
  using Error::Error;
};

// Non-finite values, domain violations (log of non-positive, zero norms, ...).
struct NumericError : Error {
  using Error::Error;
};

// API contract violations: backward on a non-scalar, reusing a consumed tape,
// evaluating on an empty dataset, noise injection on a test split.
struct ContractError : Error {
  using Error::Error;
};

// Invalid parameter values: out-of-range labels, bad loss/attack parameters.
struct ValueError : Error {
  using Error::Error;
};

// Malformed input files (bad magic, truncation, inconsistent counts).
struct FormatError : Error {
  using Error::Error;
};

// Invalid experiment configuration; message enumerates every problem found.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace drsl
