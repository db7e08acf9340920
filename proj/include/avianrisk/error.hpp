#pragma once

#include <stdexcept>

namespace avianrisk {

// Malformed input data or configuration; the CLI maps this to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failure during an otherwise valid run (e.g. training divergence); exit 3.
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace avianrisk
