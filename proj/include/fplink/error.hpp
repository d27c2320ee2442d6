#pragma once

#include <stdexcept>
#include <string>

namespace fplink {

// Data-level failure (bad input file, unknown counter, untrained model, ...).
// The CLI maps these to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fplink
