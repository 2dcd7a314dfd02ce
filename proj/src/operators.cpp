#include "mannlab/operators.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <sstream>

#include "mannlab/rng.hpp"

namespace mannlab {

// ---------------------------------------------------------------------------
// FixedSet

FixedSet FixedSet::whole_space(int dim) {
    FixedSet f;
    f.offset = Vector::Zero(dim);
    f.basis = Matrix::Identity(dim, dim);
    return f;
}

FixedSet FixedSet::point(const Vector& p) {
    FixedSet f;
    f.offset = p;
    f.basis = Matrix(p.size(), 0);
    return f;
}

FixedSet FixedSet::span(const Matrix& columns, const Vector& offset) {
    if (columns.rows() != offset.size()) throw DimensionError("FixedSet::span: row mismatch");
    FixedSet f;
    if (columns.cols() == 0) return point(offset);
    Eigen::JacobiSVD<Matrix> svd(columns, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    const double cutoff = 1e-12 * std::max(1.0, sv.maxCoeff());
    int rank = 0;
    while (rank < sv.size() && sv[rank] > cutoff) ++rank;
    f.basis = svd.matrixU().leftCols(rank);
    f.offset = offset - f.basis * (f.basis.transpose() * offset);
    return f;
}

Vector FixedSet::project(const Vector& u) const {
    if (empty) throw DomainError("FixedSet::project: empty set");
    if (u.size() != offset.size()) throw DimensionError("FixedSet::project: dimension mismatch");
    if (basis.cols() == 0) return offset;
    return offset + basis * (basis.transpose() * (u - offset));
}

double FixedSet::distance(const Vector& x) const { return (x - project(x)).norm(); }

std::string FixedSet::describe() const {
    if (empty) return "empty";
    if (is_whole_space()) return "whole space";
    std::ostringstream os;
    if (is_point()) {
        os << "point";
    } else {
        os << "affine subspace of dimension " << basis.cols();
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Operator

Operator::Operator(std::string name, Space space, double lambda, Map map,
                   std::optional<AffineRep> affine, std::optional<FixedSet> fixed_set,
                   Admissibility admissibility)
    : name_(std::move(name)),
      space_(space),
      lambda_(lambda),
      map_(std::move(map)),
      affine_(std::move(affine)),
      fixed_set_(std::move(fixed_set)),
      admissibility_(admissibility) {
    if (!(lambda_ > 0.0 && lambda_ < 1.0)) {
        throw DomainError("operator '" + name_ + "': lambda must lie in (0, 1)");
    }
    if (!map_) throw DomainError("operator '" + name_ + "': empty map");
    if (affine_) {
        if (affine_->A.rows() != space_.dim || affine_->A.cols() != space_.dim ||
            affine_->b.size() != space_.dim) {
            throw DimensionError("operator '" + name_ + "': affine representation has wrong shape");
        }
    }
}

Vector Operator::operator()(const Vector& x) const {
    check_dim(space_, x, "operator");
    return map_(x);
}

// ---------------------------------------------------------------------------
// Gallery

bool eigenvalue_admissible(double mu, double lambda) {
    // mu <= 1 - lambda (1 - mu)^2  <=>  mu in [1 - 1/lambda, 1]
    constexpr double eps = 1e-12;
    return mu <= 1.0 + eps && mu >= 1.0 - 1.0 / lambda - eps;
}

std::vector<std::string> gallery_names() {
    return {"identity", "constant_zero", "negation", "diagonal", "affine", "clipped_quadratic"};
}

namespace {

Admissibility admissibility_for(const Space& s) {
    return s.kind == NormKind::euclidean ? Admissibility::proven : Admissibility::empirical;
}

Operator make_affine(std::string name, const Space& s, double lambda, Matrix A, Vector b) {
    AffineRep rep{A, b};
    auto map = [A = std::move(A), b = std::move(b)](const Vector& x) -> Vector {
        return A * x + b;
    };
    return Operator(std::move(name), s, lambda, std::move(map), std::move(rep), std::nullopt,
                    admissibility_for(s));
}

Operator make_diagonal(std::string name, const Space& s, double lambda,
                       const std::vector<double>& eigenvalues) {
    if (static_cast<int>(eigenvalues.size()) != s.dim) {
        throw DimensionError(name + ": expected " + std::to_string(s.dim) + " eigenvalues, got " +
                             std::to_string(eigenvalues.size()));
    }
    Vector d(s.dim);
    for (int i = 0; i < s.dim; ++i) {
        const double mu = eigenvalues[static_cast<std::size_t>(i)];
        if (!std::isfinite(mu) || !eigenvalue_admissible(mu, lambda)) {
            std::ostringstream os;
            os << name << ": eigenvalue " << mu << " outside [" << 1.0 - 1.0 / lambda
               << ", 1] admissible at lambda=" << lambda;
            throw DomainError(os.str());
        }
        d[i] = mu;
    }
    Matrix A = d.asDiagonal();
    return make_affine(std::move(name), s, lambda, std::move(A), Vector::Zero(s.dim));
}

// Euclidean: <Ad, d> <= |d|^2 - lambda |(I - A)d|^2 for all d
// <=> I - sym(A) - lambda (I - A)^T (I - A) is positive semidefinite.
void check_affine_admissible(const Matrix& A, double lambda) {
    const Eigen::Index n = A.rows();
    const Matrix I = Matrix::Identity(n, n);
    const Matrix R = I - A;
    const Matrix M = I - 0.5 * (A + A.transpose()) - lambda * R.transpose() * R;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (M + M.transpose()), Eigen::EigenvaluesOnly);
    const double scale = 1.0 + A.cwiseAbs().maxCoeff();
    if (es.eigenvalues().minCoeff() < -1e-12 * scale * scale) {
        std::ostringstream os;
        os << "affine: matrix is not " << lambda
           << "-strictly pseudocontractive (min eigenvalue of the certificate matrix "
           << es.eigenvalues().minCoeff() << ")";
        throw DomainError(os.str());
    }
}

}  // namespace

Operator gallery(const std::string& name, const Space& s, double lambda,
                 const GalleryParams& params) {
    if (!(lambda > 0.0 && lambda < 1.0)) {
        throw DomainError("gallery: lambda must lie in (0, 1)");
    }
    const int d = s.dim;
    if (name == "identity") {
        return make_diagonal(name, s, lambda, std::vector<double>(static_cast<std::size_t>(d), 1.0));
    }
    if (name == "constant_zero") {
        return make_diagonal(name, s, lambda, std::vector<double>(static_cast<std::size_t>(d), 0.0));
    }
    if (name == "negation") {
        return make_diagonal(name, s, lambda, std::vector<double>(static_cast<std::size_t>(d), -1.0));
    }
    if (name == "diagonal") {
        return make_diagonal(name, s, lambda, params.eigenvalues);
    }
    if (name == "affine") {
        if (params.A.rows() != d || params.A.cols() != d) {
            throw DimensionError("affine: A must be dim x dim");
        }
        const Vector b = params.b.size() == 0 ? Vector::Zero(d) : params.b;
        if (b.size() != d) throw DimensionError("affine: b must have length dim");
        if (!params.A.allFinite() || !b.allFinite()) throw DomainError("affine: non-finite entries");
        if (s.kind == NormKind::euclidean) check_affine_admissible(params.A, lambda);
        return make_affine(name, s, lambda, params.A, b);
    }
    if (name == "clipped_quadratic") {
        const double kappa = params.kappa;
        const double radius = params.radius;
        if (!(kappa >= 0.0) || !(radius > 0.0) || !std::isfinite(kappa) || !std::isfinite(radius)) {
            throw DomainError("clipped_quadratic: need kappa >= 0 and radius > 0");
        }
        // Difference quotients of s - kappa c|c| lie in [1 - 2 kappa radius, 1].
        if (2.0 * kappa * radius * lambda > 1.0 + 1e-12) {
            std::ostringstream os;
            os << "clipped_quadratic: 2 kappa radius lambda = " << 2.0 * kappa * radius * lambda
               << " exceeds 1";
            throw DomainError(os.str());
        }
        auto map = [kappa, radius](const Vector& x) -> Vector {
            Vector out(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                const double c = std::clamp(x[i], -radius, radius);
                out[i] = x[i] - kappa * c * std::abs(c);
            }
            return out;
        };
        FixedSet fs = kappa > 0.0 ? FixedSet::point(Vector::Zero(d)) : FixedSet::whole_space(d);
        return Operator(name, s, lambda, std::move(map), std::nullopt, std::move(fs),
                        admissibility_for(s));
    }
    throw DomainError("gallery: unknown operator '" + name + "'");
}

// ---------------------------------------------------------------------------
// Certification

Certificate certify(const Operator& T, double lambda, int n_pairs, std::uint64_t seed,
                    double sampling_box) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("certify: lambda must lie in (0, 1)");
    if (n_pairs < 1) throw DomainError("certify: n_pairs must be >= 1");
    if (!(sampling_box > 0.0)) throw DomainError("certify: sampling box must be positive");

    const Space& s = T.space();
    Certificate c;
    c.operator_id = T.name();
    c.lambda_tested = lambda;
    c.n_pairs = n_pairs;
    c.seed = seed;
    c.sampling_box = sampling_box;
    c.lipschitz_excess = -std::numeric_limits<double>::infinity();
    const double L = (lambda + 1.0) / lambda;

    double worst = 0.0;
    Sampler rng(seed);
    for (int k = 0; k < n_pairs; ++k) {
        const Vector x = rng.uniform_box(s.dim, sampling_box);
        const Vector y = rng.uniform_box(s.dim, sampling_box);
        const Vector d = x - y;
        const Vector e = T(x) - T(y);
        const double lhs = pairing(s, e, d);
        const double rhs = norm_squared(s, d) - lambda * norm_squared(s, d - e);
        const double excess = lhs - rhs;
        worst = std::max(worst, excess);
        const double beyond = excess - scaled_tol(std::max(std::abs(lhs), std::abs(rhs)));
        if (beyond > 0.0 && (!c.witness || excess > c.witness->violation)) {
            c.witness = Witness{x, y, excess};
        }
        const double nd = norm(s, d);
        c.lipschitz_excess = std::max(c.lipschitz_excess, norm(s, e) - L * nd);
    }
    c.max_violation = worst;
    c.verdict = c.witness ? Verdict::refuted : Verdict::certified;
    return c;
}

// ---------------------------------------------------------------------------
// Averaged map

AveragedMap::AveragedMap(Operator base, double alpha) : base_(std::move(base)), alpha_(alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("averaged: alpha must lie in [0, 1]");
}

Vector AveragedMap::operator()(const Vector& x) const {
    if (alpha_ == 0.0) {
        check_dim(base_.space(), x, "averaged");
        return x;
    }
    return apply(x, base_(x));
}

Vector AveragedMap::apply(const Vector& x, const Vector& tx) const {
    return alpha_ * tx + (1.0 - alpha_) * x;
}

AveragedMap averaged(const Operator& T, double alpha) { return AveragedMap(T, alpha); }

Lemma21Report check_lemma21(const Operator& T, double alpha, int n_pairs, std::uint64_t seed,
                            double sampling_box) {
    if (n_pairs < 1) throw DomainError("check_lemma21: n_pairs must be >= 1");
    const AveragedMap Ta = averaged(T, alpha);
    const Space& s = T.space();
    Lemma21Report r;
    r.alpha = alpha;
    r.lambda = T.lambda();
    r.K2 = s.K2;
    r.n_pairs = n_pairs;
    r.nonexpansive_applicable = alpha <= s.mu(T.lambda());
    r.min_slack = std::numeric_limits<double>::infinity();
    r.max_expansion = -std::numeric_limits<double>::infinity();
    const double weight = 2.0 * alpha * (T.lambda() - s.K2 * alpha);

    Sampler rng(seed);
    for (int k = 0; k < n_pairs; ++k) {
        const Vector x = rng.uniform_box(s.dim, sampling_box);
        const Vector y = rng.uniform_box(s.dim, sampling_box);
        const Vector tx = T(x);
        const Vector ty = T(y);
        const Vector ax = Ta.apply(x, tx);
        const Vector ay = Ta.apply(y, ty);
        const Vector d = x - y;
        const double lhs = norm_squared(s, ax - ay);
        const double nd2 = norm_squared(s, d);
        const double rhs = nd2 - weight * norm_squared(s, (tx - ty) - d);
        const double slack = rhs - lhs;
        r.min_slack = std::min(r.min_slack, slack);
        if (-slack > scaled_tol(std::max(std::abs(lhs), std::abs(rhs)))) ++r.violations;
        if (r.nonexpansive_applicable) {
            const double nd = std::sqrt(nd2);
            const double expansion = norm(s, ax - ay) - nd;
            r.max_expansion = std::max(r.max_expansion, expansion);
            if (expansion > scaled_tol(nd)) ++r.nonexpansive_violations;
        }
    }
    if (!r.nonexpansive_applicable) r.max_expansion = 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Fixed points

FixedSet fixed_points_oracle(const Operator& T) {
    if (T.affine()) {
        const Matrix& A = T.affine()->A;
        const Vector& b = T.affine()->b;
        const Eigen::Index n = A.rows();
        const Matrix M = A - Matrix::Identity(n, n);
        Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const auto& sv = svd.singularValues();
        const double scale = std::max(1.0, sv.size() ? sv.maxCoeff() : 0.0);
        svd.setThreshold(1e-12);
        const int rank = static_cast<int>(svd.rank());
        const Vector particular = svd.solve(-b);
        const double residual = (M * particular + b).norm();
        if (residual > 1e-9 * (1.0 + b.norm()) * scale) {
            FixedSet f;
            f.empty = true;
            f.offset = Vector::Zero(n);
            f.basis = Matrix(n, 0);
            return f;
        }
        const Matrix null_basis = svd.matrixV().rightCols(n - rank);
        return FixedSet::span(null_basis, particular);
    }
    if (T.fixed_set()) return *T.fixed_set();
    throw DomainError("fixed_points_oracle: operator '" + T.name() +
                      "' has neither an affine representation nor a stored fixed-point set");
}

}  // namespace mannlab
