#pragma once

#include <stdexcept>
#include <string>

namespace riskbandit {

/// Invalid parameters or configuration.
struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Raised when an entropic exponent leaves the admissible curvature range.
struct overflow_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Iterative solver did not reach its tolerance.
struct convergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operation requires a strongly convex loss.
struct not_strongly_convex : std::logic_error {
    using std::logic_error::logic_error;
};

/// Broken internal invariant (indicates a bug or corrupted state).
struct invariant_error : std::logic_error {
    using std::logic_error::logic_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw config_error(what);
}

}  // namespace riskbandit
