#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace mannlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Thrown when two vectors (or a vector and a space) disagree on dimension.
class DimensionError : public std::invalid_argument {
 public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown for arguments outside an operation's admissible domain.
class DomainError : public std::invalid_argument {
 public:
    using std::invalid_argument::invalid_argument;
};

/// Raised by iterative solvers that hit their iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

/// Default absolute tolerance for inequality checks.
inline constexpr double kSlackTol = 1e-9;

/// Tolerance for an inequality whose larger side has the given magnitude:
/// kSlackTol scaled by (1 + |magnitude|).
inline double scaled_tol(double magnitude, double base = kSlackTol) {
    return base * (1.0 + std::abs(magnitude));
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_finite(const Vector& v, const char* what) {
    if (!v.allFinite()) {
        throw DomainError(std::string(what) + ": non-finite entry");
    }
}

}  // namespace mannlab
