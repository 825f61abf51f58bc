#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace resprob {

// All time quantities are integer microseconds.
using usec_t = std::int64_t;

// Bad or inconsistent user input (config files, PMF files, CLI values).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numeric procedure failed to deliver a trustworthy result.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The model itself rejects the request (divergent reservation, deadline
// below the resolution of the collapsed chain, ...).
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace resprob
