#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mannlab/common.hpp"
#include "mannlab/space.hpp"

namespace mannlab {

/// T(x) = A x + b.
struct AffineRep {
    Matrix A;
    Vector b;
};

/// An affine subspace {offset + basis * c}. Columns of basis are
/// orthonormal and offset is orthogonal to them (minimum-norm point).
/// An empty set models an inconsistent fixed-point equation.
struct FixedSet {
    bool empty = false;
    Vector offset;
    Matrix basis;

    int dimension() const { return empty ? -1 : static_cast<int>(basis.cols()); }
    bool is_whole_space() const { return !empty && basis.cols() == offset.size(); }
    bool is_point() const { return !empty && basis.cols() == 0; }

    /// Euclidean nearest point of the set to u.
    Vector project(const Vector& u) const;
    /// Euclidean distance of x to the set.
    double distance(const Vector& x) const;
    std::string describe() const;

    static FixedSet whole_space(int dim);
    static FixedSet point(const Vector& p);
    static FixedSet span(const Matrix& columns, const Vector& offset);
};

/// Whether the claimed strict-pseudocontraction level is backed by a
/// closed-form argument (Euclidean gallery members) or only by sampling.
enum class Admissibility { proven, empirical };

/// A self-map of the whole space with a claimed strict-pseudocontraction
/// level lambda, i.e.
///   <Tx - Ty, J(x - y)> <= ||x - y||^2 - lambda ||x - y - (Tx - Ty)||^2.
/// Immutable after construction; evaluation is pure.
class Operator {
 public:
    using Map = std::function<Vector(const Vector&)>;

    Operator(std::string name, Space space, double lambda, Map map,
             std::optional<AffineRep> affine = std::nullopt,
             std::optional<FixedSet> fixed_set = std::nullopt,
             Admissibility admissibility = Admissibility::empirical);

    Vector operator()(const Vector& x) const;

    const std::string& name() const { return name_; }
    const Space& space() const { return space_; }
    double lambda() const { return lambda_; }
    const std::optional<AffineRep>& affine() const { return affine_; }
    const std::optional<FixedSet>& fixed_set() const { return fixed_set_; }
    Admissibility admissibility() const { return admissibility_; }
    /// (lambda + 1) / lambda.
    double lipschitz_bound() const { return (lambda_ + 1.0) / lambda_; }

 private:
    std::string name_;
    Space space_;
    double lambda_;
    Map map_;
    std::optional<AffineRep> affine_;
    std::optional<FixedSet> fixed_set_;
    Admissibility admissibility_;
};

/// Parameters for the gallery constructors; each constructor reads only
/// the fields it needs.
struct GalleryParams {
    std::vector<double> eigenvalues;  // diagonal
    Matrix A;                         // affine
    Vector b;                         // affine
    double kappa = 0.25;              // clipped_quadratic
    double radius = 1.0;              // clipped_quadratic
};

/// Scalar admissibility of an eigenvalue for a symmetric linear map in a
/// Euclidean space: mu <= 1 - lambda (1 - mu)^2, i.e. mu in [1 - 1/lambda, 1].
bool eigenvalue_admissible(double mu, double lambda);

/// Builds a gallery operator. Names:
///   identity, constant_zero, negation, diagonal, affine, clipped_quadratic.
/// clipped_quadratic acts coordinate-wise as s -> s - kappa * c|c| with
/// c = clamp(s, -radius, radius); its fixed-point set is {0}.
/// Throws DomainError for unknown names or parameters that are not
/// admissible at the requested lambda.
Operator gallery(const std::string& name, const Space& space, double lambda,
                 const GalleryParams& params = {});

std::vector<std::string> gallery_names();

struct Witness {
    Vector x;
    Vector y;
    double violation = 0.0;
};

enum class Verdict { certified, refuted };

struct Certificate {
    std::string operator_id;
    double lambda_tested = 0.0;
    int n_pairs = 0;
    std::uint64_t seed = 0;
    double sampling_box = 0.0;
    /// max(0, largest excess of <Tx-Ty, J(x-y)> over the right-hand side).
    double max_violation = 0.0;
    Verdict verdict = Verdict::certified;
    std::optional<Witness> witness;
    /// Largest observed ||Tx - Ty|| - L ||x - y|| with L = (lambda+1)/lambda.
    double lipschitz_excess = 0.0;

    bool certified() const { return verdict == Verdict::certified; }
};

inline constexpr double kDefaultSamplingBox = 10.0;
inline constexpr int kDefaultPairs = 1000;

/// Sampling-based check of the strict-pseudocontraction inequality at
/// level lambda over pairs drawn uniformly from [-box, box]^dim. A pair
/// refutes when its excess exceeds kSlackTol scaled by the larger side.
Certificate certify(const Operator& T, double lambda, int n_pairs, std::uint64_t seed,
                    double sampling_box = kDefaultSamplingBox);

/// T_alpha = (1 - alpha) I + alpha T.
class AveragedMap {
 public:
    AveragedMap(Operator base, double alpha);

    Vector operator()(const Vector& x) const;
    /// Same as operator() but reuses a precomputed T(x).
    Vector apply(const Vector& x, const Vector& tx) const;

    const Operator& base() const { return base_; }
    double alpha() const { return alpha_; }

 private:
    Operator base_;
    double alpha_;
};

AveragedMap averaged(const Operator& T, double alpha);

struct Lemma21Report {
    double alpha = 0.0;
    double lambda = 0.0;
    double K2 = 0.0;
    int n_pairs = 0;
    /// Smallest value of RHS - LHS of
    ///   ||T_a x - T_a y||^2 <= ||x-y||^2 - 2a(lambda - K^2 a)||Tx-Ty-(x-y)||^2.
    double min_slack = 0.0;
    int violations = 0;
    /// alpha <= min{1, lambda/K^2}: the range where T_alpha must be nonexpansive.
    bool nonexpansive_applicable = false;
    /// Largest ||T_a x - T_a y|| - ||x - y||.
    double max_expansion = 0.0;
    int nonexpansive_violations = 0;

    bool ok() const { return violations == 0 && nonexpansive_violations == 0; }
};

Lemma21Report check_lemma21(const Operator& T, double alpha, int n_pairs, std::uint64_t seed,
                            double sampling_box = kDefaultSamplingBox);

/// F(T). For affine maps solves (A - I)x = -b; otherwise returns the stored
/// closed-form set. Throws DomainError when neither is available.
FixedSet fixed_points_oracle(const Operator& T);

}  // namespace mannlab
