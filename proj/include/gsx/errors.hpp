#pragma once

#include <stdexcept>

namespace gsx {

/// Raised when an iterative numerical search fails to converge or bracket.
struct convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace gsx
