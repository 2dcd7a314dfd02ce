#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "mannlab/common.hpp"

namespace mannlab {

enum class NormKind { euclidean, lp };

/// A real finite-dimensional smooth normed space: R^dim with either the
/// Euclidean norm or a p-norm (p >= 2), together with the smoothness
/// constants consumed by the parameter conditions.
///
/// K2 is the square of the 2-uniform smoothness constant K in
///   ||x + y||^2 <= ||x||^2 + 2 <y, J(x)> + 2 K^2 ||y||^2.
/// For the Euclidean norm this is an identity with K^2 = 1/2. For p-norms
/// the default is K^2 = (p - 1) / 2, which validate_smooth_constant()
/// re-checks by sampling.
struct Space {
    int dim = 1;
    NormKind kind = NormKind::euclidean;
    double p = 2.0;
    /// Smoothness order q in (1, 2]; 2 for every built-in norm.
    double q = 2.0;
    double K2 = 0.5;
    /// q-smoothness constant, only read by the q-generalized step-size
    /// condition. Defaults to 2 K^2 so that the q = 2 case reduces to the
    /// K-based condition.
    double Cq = 1.0;

    static Space euclidean(int dim);
    static Space lp(int dim, double p, std::optional<double> K2_override = std::nullopt);

    /// Conjugate exponent p / (p - 1) of the dual norm.
    double dual_exponent() const;
    /// min{1, lambda / K^2}: the largest admissible averaging weight.
    double mu(double lambda) const;

    std::string describe() const;
};

double norm(const Space& s, const Vector& x);

/// ||x||^2. For the Euclidean norm this is computed as x.x so that it
/// agrees bit-for-bit with pairing(s, x, x).
double norm_squared(const Space& s, const Vector& x);

/// Norm of a functional in the dual space (q-norm, 1/p + 1/q = 1).
double dual_norm(const Space& s, const Vector& functional);

/// Normalized duality map J(x). Single-valued because every built-in norm
/// is smooth; J(0) = 0.
Vector duality_map(const Space& s, const Vector& x);

/// <y, J(x)>.
double pairing(const Space& s, const Vector& y, const Vector& x);

/// Monte-Carlo lower estimate of the modulus of smoothness
///   rho(t) = sup { (||x + y|| + ||x - y||) / 2 - 1 : ||x|| = 1, ||y|| <= t }.
/// Sampled y always have ||y|| = t (the objective is convex in y, so the
/// supremum sits on the sphere). For a fixed seed the same directions are
/// used for every t, which makes the estimate nondecreasing in t.
double modulus_smoothness_estimate(const Space& s, double t, int n_samples, std::uint64_t seed);

struct SmoothConstantReport {
    double K2 = 0.0;
    int n_samples = 0;
    /// Largest raw excess of ||x+y||^2 over ||x||^2 + 2<y,J(x)> + 2K^2||y||^2.
    double max_excess = 0.0;
    /// Number of samples whose excess is beyond the scaled tolerance.
    int violations = 0;
    /// max over samples of (||x+y||^2 - ||x||^2 - 2<y,J(x)>) / (2||y||^2).
    double empirical_K2 = 0.0;

    bool ok() const { return violations == 0; }
};

SmoothConstantReport validate_smooth_constant(const Space& s, int n_samples, std::uint64_t seed,
                                              double tol = kSlackTol);

void check_dim(const Space& s, const Vector& x, const char* what);

}  // namespace mannlab
