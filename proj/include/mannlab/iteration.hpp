#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mannlab/common.hpp"
#include "mannlab/operators.hpp"
#include "mannlab/schedules.hpp"

namespace mannlab {

// ---------------------------------------------------------------------------
// Stepping

/// State of the modified Mann iteration at step n.
struct IterationState {
    std::size_t n = 0;
    Vector x;   // x_n
    Vector tx;  // T x_n
    Vector y;   // y_n = T_{alpha_n} x_n
    double residual = 0.0;  // ||x_n - T x_n||
};

IterationState initial_state(const Operator& T, const ScheduleSet& s, const Vector& x0);

/// x_{n+1} = beta u + gamma x + (1 - beta - gamma) y,  y = alpha T x + (1 - alpha) x.
Vector mann_update(double alpha, double beta, double gamma, const Vector& u, const Vector& x,
                   const Vector& tx);

/// The two-term scheme x_{n+1} = beta u + (1 - beta) [alpha T x + (1 - alpha) x].
Vector halpern_update(double alpha, double beta, const Vector& u, const Vector& x, const Vector& tx);

/// One step of the modified Mann iteration. Throws DomainError when the
/// schedule at n leaves alpha, beta, gamma in [0,1] with beta + gamma <= 1.
IterationState step(const Operator& T, const ScheduleSet& s, const Vector& u,
                    const IterationState& state);

// ---------------------------------------------------------------------------
// Diagnostics

/// Inequality slacks for the step x_n -> x_{n+1}, given a fixed point z
/// (the anchor limit) and a fixed point p for the boundedness bound.
/// Each slack is RHS - LHS; the matching *_tol is kSlackTol scaled by the
/// larger side.
struct StepDiagnostics {
    double dist_to_z = 0.0;        // ||x_n - z||
    double anchor_pairing = 0.0;   // <u - z, J(x_{n+1} - z)>
    double ineq35_slack = 0.0;     // (1-b)||x_n-z||^2 + 2b<u-z,J(x_{n+1}-z)> - ||x_{n+1}-z||^2
    double ineq35_tol = 0.0;
    double key_ineq_slack = 0.0;   // ||x_n-z||^2 - ||x_{n+1}-z||^2 + b||u-z||^2 - 2a(1-b-g)(lambda-K^2 a)||x_n-Tx_n||^2
    double key_ineq_tol = 0.0;
};

struct StepParams {
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
};

StepDiagnostics diagnose_step(const Operator& T, const StepParams& params, const Vector& u,
                              const Vector& x, const Vector& tx, const Vector& x_next,
                              const Vector& z);

/// One row per stored point x_n. Step-dependent fields (anchor pairing and
/// the two inequality slacks) are empty on the final point.
struct DiagnosticsRow {
    std::size_t n = 0;
    double residual = 0.0;
    std::optional<double> dist_to_z;
    std::optional<double> anchor_pairing;
    std::optional<double> bound_slack;  // max{||x_0-p||, ||u-p||} - ||x_n - p||
    std::optional<double> ineq35_slack;
    std::optional<double> key_ineq_slack;
    double ineq35_tol = 0.0;
    double key_ineq_tol = 0.0;
};

/// Per-step report over a stored trajectory xs = (x_0, ..., x_N).
std::vector<DiagnosticsRow> diagnostics(const Operator& T, const ScheduleSet& s, const Vector& u,
                                        const std::vector<Vector>& xs, const Vector& z,
                                        const Vector& p);

// ---------------------------------------------------------------------------
// Runs

enum class StopReason { residual, max_iter, divergence };
enum class CaseLabel { case1, case2, unknown };

std::string to_string(StopReason r);
std::string to_string(CaseLabel c);

struct RunOptions {
    std::size_t max_iter = 100000;
    /// Stop as soon as ||x_n - T x_n|| <= residual_tol; 0 disables the rule.
    double residual_tol = 1e-8;
    /// Designated limit (anchor limit) for dist_to_z and the inequalities.
    std::optional<Vector> z;
    /// A point of F(T) for the boundedness bound and the divergence guard.
    std::optional<Vector> p;
    /// Keep every x_n in the trace.
    bool record_points = false;
    /// Step with halpern_update instead of mann_update (gamma must be zero).
    bool two_term_scheme = false;
    /// Abort when ||x_n|| > guard_factor * max{||x_0-p||, ||u-p||} + ||p||.
    double guard_factor = 100.0;
};

struct RunSummary {
    double min_bound_slack = std::numeric_limits<double>::infinity();
    double min_ineq35_slack = std::numeric_limits<double>::infinity();
    double min_key_ineq_slack = std::numeric_limits<double>::infinity();
    std::size_t bound_violations = 0;
    std::size_t ineq35_violations = 0;
    std::size_t key_ineq_violations = 0;
    /// Max over the last 10% of rows.
    double tail_max_residual = 0.0;
    std::optional<double> tail_max_anchor_pairing;
    /// First n with residual <= 1e-6.
    std::optional<std::size_t> first_below_1e6;
};

struct IterationTrace {
    std::vector<DiagnosticsRow> rows;
    std::vector<Vector> points;  // filled when record_points
    Vector final_x;
    std::size_t iterations = 0;
    StopReason stop = StopReason::max_iter;
    CaseLabel case_label = CaseLabel::unknown;
    double final_residual = 0.0;
    std::optional<double> final_dist_to_z;
    RunSummary summary;
};

/// Runs the modified Mann iteration from x0 with anchor u. Validates the
/// schedule ranges for every step before iterating.
IterationTrace run(const Operator& T, const ScheduleSet& s, const Vector& u, const Vector& x0,
                   const RunOptions& options);

/// Case 2 when some ascent Gamma_k < Gamma_{k+1} occurs after the first 10%
/// of the sequence; Case 1 otherwise.
CaseLabel classify_case(const std::vector<double>& gamma_seq);

// ---------------------------------------------------------------------------
// Anchor path x_t = t u + (1 - t) T x_t

enum class AnchorMethod { automatic, direct, newton, damped };

std::string to_string(AnchorMethod m);

struct AnchorOptions {
    double tol = 1e-10;
    AnchorMethod method = AnchorMethod::automatic;
    int max_iter = 1000000;  // damped iteration cap (per attempt)
    int max_halvings = 6;
};

struct AnchorPath {
    double t = 0.0;
    Vector x_t;
    double solver_residual = 0.0;  // ||x_t - (t u + (1-t) T x_t)||
    int iterations = 0;
    AnchorMethod method = AnchorMethod::direct;
};

/// Solves x = t u + (1 - t) T x. Affine maps use a direct linear solve;
/// other maps use Newton's method with a finite-difference Jacobian
/// (automatic) or the damped iteration
///   z_{k+1} = (1 - s) z_k + s (t u + (1 - t) T z_k),  s = a / (1 - t + t a),
/// a = min{1, lambda/K^2}, halving s on stagnation.
/// Throws ConvergenceError if the residual does not reach tol, DomainError
/// for t outside (0,1) or a singular linear system.
AnchorPath anchor_solve(const Operator& T, const Vector& u, double t, const AnchorOptions& opts = {},
                        const Vector* warm_start = nullptr);

inline constexpr double kCauchyThreshold = 1e-4;

struct AnchorLimit {
    std::vector<AnchorPath> path;
    /// ||x_{t_k} - x_{t_{k+1}}|| for consecutive grid points.
    std::vector<double> cauchy_diffs;
    bool cauchy_ok = false;
    Vector z;
    std::string note;
};

/// Default grid 1e-1, 1e-2, ..., 1e-6.
std::vector<double> default_t_grid();

/// Follows the anchor path down a strictly decreasing grid in (0,1) and
/// designates z = x_{t_min}. The Cauchy check requires the successive
/// differences to be nonincreasing and the last one to be <= kCauchyThreshold;
/// a failed check is reported in the result, not thrown.
AnchorLimit anchor_limit(const Operator& T, const Vector& u, const std::vector<double>& t_grid,
                         const AnchorOptions& opts = {});

// ---------------------------------------------------------------------------
// Mainge tau sequence

struct TauAnalysis {
    std::vector<double> gamma_seq;
    /// True when no ascent Gamma_k < Gamma_{k+1} exists (Case 1 marker).
    bool monotone = false;
    /// First index with an ascent at or before it.
    std::optional<std::size_t> n0;
    /// tau[n - n0] = max{k <= n : Gamma_k < Gamma_{k+1}} for n in [n0, len).
    std::vector<std::size_t> tau;
    bool nondecreasing = true;
    /// Gamma_{tau(n)} <= Gamma_{tau(n)+1} for every n >= n0.
    bool estimate_ascent = true;
    /// Gamma_n <= Gamma_{tau(n)+1} for every n >= n0.
    bool estimate_dominated = true;

    bool ok() const { return nondecreasing && estimate_ascent && estimate_dominated; }
    std::size_t tau_at(std::size_t n) const { return tau.at(n - *n0); }
};

/// Throws DomainError for fewer than two values.
TauAnalysis mainge_tau(const std::vector<double>& gamma_seq);

// ---------------------------------------------------------------------------
// Recursion a_{n+1} = (1 - t_n) a_n + t_n c_n

struct Lemma22Result {
    std::vector<double> a;  // a_0 .. a_horizon
    /// Hypotheses, decided symbolically when both sequences are closed forms.
    std::optional<bool> t_sum_diverges;
    std::optional<bool> c_limsup_nonpositive;

    double final_value() const { return a.back(); }
};

/// Simulates the recursion with equality. Throws DomainError for a0 < 0 or
/// t_n outside [0,1].
Lemma22Result lemma22_harness(const std::function<double(std::size_t)>& t_seq,
                              const std::function<double(std::size_t)>& c_seq, double a0,
                              std::size_t horizon);

Lemma22Result lemma22_harness(const Sequence& t_seq, const Sequence& c_seq, double a0,
                              std::size_t horizon);

}  // namespace mannlab
