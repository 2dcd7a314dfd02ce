#include "mannlab/space.hpp"

#include <sstream>

#include "mannlab/rng.hpp"

namespace mannlab {

Space Space::euclidean(int dim) {
    if (dim < 1) throw DomainError("space: dim must be >= 1");
    Space s;
    s.dim = dim;
    s.kind = NormKind::euclidean;
    s.p = 2.0;
    s.q = 2.0;
    s.K2 = 0.5;
    s.Cq = 2.0 * s.K2;
    return s;
}

Space Space::lp(int dim, double p, std::optional<double> K2_override) {
    if (dim < 1) throw DomainError("space: dim must be >= 1");
    if (!(p >= 2.0) || !std::isfinite(p)) {
        throw DomainError("space: p-norm requires finite p >= 2");
    }
    Space s;
    s.dim = dim;
    s.kind = NormKind::lp;
    s.p = p;
    s.q = 2.0;
    s.K2 = K2_override.value_or((p - 1.0) / 2.0);
    if (!(s.K2 > 0.0)) throw DomainError("space: K2 must be positive");
    s.Cq = 2.0 * s.K2;
    return s;
}

double Space::dual_exponent() const { return p / (p - 1.0); }

double Space::mu(double lambda) const { return std::min(1.0, lambda / K2); }

std::string Space::describe() const {
    std::ostringstream os;
    if (kind == NormKind::euclidean) {
        os << "euclidean(dim=" << dim << ")";
    } else {
        os << "lp(dim=" << dim << ", p=" << p << ")";
    }
    return os.str();
}

void check_dim(const Space& s, const Vector& x, const char* what) {
    if (x.size() != s.dim) {
        std::ostringstream os;
        os << what << ": dimension " << x.size() << " does not match space dimension " << s.dim;
        throw DimensionError(os.str());
    }
}

namespace {

// Scaled p-norm: m * (sum (|x_i|/m)^p)^(1/p) with m = max |x_i|.
double scaled_pnorm(const Vector& x, double p) {
    const double m = x.cwiseAbs().maxCoeff();
    if (m == 0.0) return 0.0;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) acc += std::pow(std::abs(x[i]) / m, p);
    return m * std::pow(acc, 1.0 / p);
}

}  // namespace

double norm(const Space& s, const Vector& x) {
    check_dim(s, x, "norm");
    if (s.kind == NormKind::euclidean) return x.norm();
    return scaled_pnorm(x, s.p);
}

double norm_squared(const Space& s, const Vector& x) {
    check_dim(s, x, "norm_squared");
    if (s.kind == NormKind::euclidean) return x.dot(x);
    const double n = scaled_pnorm(x, s.p);
    return n * n;
}

double dual_norm(const Space& s, const Vector& functional) {
    check_dim(s, functional, "dual_norm");
    if (s.kind == NormKind::euclidean) return functional.norm();
    return scaled_pnorm(functional, s.dual_exponent());
}

Vector duality_map(const Space& s, const Vector& x) {
    check_dim(s, x, "duality_map");
    if (s.kind == NormKind::euclidean) return x;
    const double n = scaled_pnorm(x, s.p);
    Vector j = Vector::Zero(x.size());
    if (n == 0.0) return j;
    // ||x||^{2-p} |x_i|^{p-1} sign(x_i) = ||x|| (|x_i| / ||x||)^{p-1} sign(x_i)
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x[i] == 0.0) continue;
        const double mag = n * std::pow(std::abs(x[i]) / n, s.p - 1.0);
        j[i] = x[i] > 0.0 ? mag : -mag;
    }
    return j;
}

double pairing(const Space& s, const Vector& y, const Vector& x) {
    check_dim(s, y, "pairing");
    check_dim(s, x, "pairing");
    if (s.kind == NormKind::euclidean) return y.dot(x);
    return y.dot(duality_map(s, x));
}

namespace {

Vector random_unit(const Space& s, Sampler& rng) {
    for (;;) {
        Vector v = rng.normal_vector(s.dim);
        const double n = norm(s, v);
        if (n > 1e-12) return v / n;
    }
}

}  // namespace

double modulus_smoothness_estimate(const Space& s, double t, int n_samples, std::uint64_t seed) {
    if (!(t >= 0.0)) throw DomainError("modulus_smoothness_estimate: t must be >= 0");
    if (n_samples < 1) throw DomainError("modulus_smoothness_estimate: n_samples must be >= 1");
    if (t == 0.0) return 0.0;
    Sampler rng(seed);
    double best = 0.0;
    for (int k = 0; k < n_samples; ++k) {
        const Vector x = random_unit(s, rng);
        const Vector y = t * random_unit(s, rng);
        const double v = 0.5 * (norm(s, x + y) + norm(s, x - y)) - 1.0;
        best = std::max(best, v);
    }
    return best;
}

SmoothConstantReport validate_smooth_constant(const Space& s, int n_samples, std::uint64_t seed,
                                              double tol) {
    if (n_samples < 1) throw DomainError("validate_smooth_constant: n_samples must be >= 1");
    SmoothConstantReport r;
    r.K2 = s.K2;
    r.n_samples = n_samples;
    r.max_excess = -std::numeric_limits<double>::infinity();
    Sampler rng(seed);
    for (int k = 0; k < n_samples; ++k) {
        const Vector x = rng.normal_vector(s.dim);
        const Vector y = rng.normal_vector(s.dim) * std::exp(rng.uniform(-3.0, 3.0));
        const double lhs = norm_squared(s, x + y);
        const double ny2 = norm_squared(s, y);
        const double linear = norm_squared(s, x) + 2.0 * pairing(s, y, x);
        const double rhs = linear + 2.0 * s.K2 * ny2;
        const double excess = lhs - rhs;
        r.max_excess = std::max(r.max_excess, excess);
        if (excess > scaled_tol(std::max(lhs, rhs), tol)) ++r.violations;
        if (ny2 > 0.0) r.empirical_K2 = std::max(r.empirical_K2, (lhs - linear) / (2.0 * ny2));
    }
    return r;
}

}  // namespace mannlab
