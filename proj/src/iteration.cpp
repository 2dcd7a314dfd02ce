#include "mannlab/iteration.hpp"

#include <Eigen/LU>

#include <sstream>

namespace mannlab {

// ---------------------------------------------------------------------------
// Stepping

namespace {

void check_step_params(double alpha, double beta, double gamma, std::size_t n) {
    if (!(alpha >= 0.0 && alpha <= 1.0 && beta >= 0.0 && beta <= 1.0 && gamma >= 0.0 &&
          gamma <= 1.0 && beta + gamma <= 1.0)) {
        std::ostringstream os;
        os << "schedule out of range at n=" << n << " (alpha=" << alpha << ", beta=" << beta
           << ", gamma=" << gamma << ")";
        throw DomainError(os.str());
    }
}

IterationState make_state(const Operator& T, double alpha, std::size_t n, Vector x) {
    IterationState st;
    st.n = n;
    st.tx = T(x);
    st.y = alpha * st.tx + (1.0 - alpha) * x;
    st.residual = norm(T.space(), x - st.tx);
    st.x = std::move(x);
    return st;
}

}  // namespace

IterationState initial_state(const Operator& T, const ScheduleSet& s, const Vector& x0) {
    check_dim(T.space(), x0, "initial_state");
    require_finite(x0, "initial_state");
    return make_state(T, s.alpha_at(0), 0, x0);
}

Vector mann_update(double alpha, double beta, double gamma, const Vector& u, const Vector& x,
                   const Vector& tx) {
    const Vector y = alpha * tx + (1.0 - alpha) * x;
    return beta * u + gamma * x + (1.0 - beta - gamma) * y;
}

Vector halpern_update(double alpha, double beta, const Vector& u, const Vector& x, const Vector& tx) {
    const Vector y = alpha * tx + (1.0 - alpha) * x;
    return beta * u + (1.0 - beta) * y;
}

IterationState step(const Operator& T, const ScheduleSet& s, const Vector& u,
                    const IterationState& state) {
    check_dim(T.space(), u, "step");
    const std::size_t n = state.n;
    const double alpha = s.alpha_at(n);
    const double beta = s.beta_at(n);
    const double gamma = s.gamma_at(n);
    check_step_params(alpha, beta, gamma, n);
    Vector next = mann_update(alpha, beta, gamma, u, state.x, state.tx);
    return make_state(T, s.alpha_at(n + 1), n + 1, std::move(next));
}

// ---------------------------------------------------------------------------
// Diagnostics

StepDiagnostics diagnose_step(const Operator& T, const StepParams& prm, const Vector& u,
                              const Vector& x, const Vector& tx, const Vector& x_next,
                              const Vector& z) {
    const Space& sp = T.space();
    const double K2 = sp.K2;
    const double lambda = T.lambda();
    const Vector dn = x - z;
    const Vector dnext = x_next - z;
    const Vector ud = u - z;
    const double g_n = norm_squared(sp, dn);
    const double g_next = norm_squared(sp, dnext);

    StepDiagnostics d;
    d.dist_to_z = std::sqrt(g_n);
    d.anchor_pairing = pairing(sp, ud, dnext);

    const double rhs35 = (1.0 - prm.beta) * g_n + 2.0 * prm.beta * d.anchor_pairing;
    d.ineq35_slack = rhs35 - g_next;
    d.ineq35_tol = scaled_tol(std::max(std::abs(rhs35), g_next));

    const double lhs_key = 2.0 * prm.alpha * (1.0 - prm.beta - prm.gamma) *
                           (lambda - K2 * prm.alpha) * norm_squared(sp, x - tx);
    const double rhs_key = g_n - g_next + prm.beta * norm_squared(sp, ud);
    d.key_ineq_slack = rhs_key - lhs_key;
    d.key_ineq_tol = scaled_tol(std::max(std::abs(lhs_key), std::abs(rhs_key)));
    return d;
}

namespace {

StepParams params_at(const ScheduleSet& s, std::size_t n) {
    return {s.alpha_at(n), s.beta_at(n), s.gamma_at(n)};
}

void fill_step(DiagnosticsRow& row, const StepDiagnostics& d) {
    row.dist_to_z = d.dist_to_z;
    row.anchor_pairing = d.anchor_pairing;
    row.ineq35_slack = d.ineq35_slack;
    row.ineq35_tol = d.ineq35_tol;
    row.key_ineq_slack = d.key_ineq_slack;
    row.key_ineq_tol = d.key_ineq_tol;
}

double bound_radius(const Space& sp, const Vector& x0, const Vector& u, const Vector& p) {
    return std::max(norm(sp, x0 - p), norm(sp, u - p));
}

}  // namespace

std::vector<DiagnosticsRow> diagnostics(const Operator& T, const ScheduleSet& s, const Vector& u,
                                        const std::vector<Vector>& xs, const Vector& z,
                                        const Vector& p) {
    std::vector<DiagnosticsRow> rows;
    if (xs.empty()) return rows;
    const Space& sp = T.space();
    const double radius = bound_radius(sp, xs.front(), u, p);
    rows.reserve(xs.size());
    for (std::size_t n = 0; n < xs.size(); ++n) {
        DiagnosticsRow row;
        row.n = n;
        const Vector tx = T(xs[n]);
        row.residual = norm(sp, xs[n] - tx);
        row.dist_to_z = norm(sp, xs[n] - z);
        row.bound_slack = radius - norm(sp, xs[n] - p);
        if (n + 1 < xs.size()) {
            fill_step(row, diagnose_step(T, params_at(s, n), u, xs[n], tx, xs[n + 1], z));
        }
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Runs

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::residual: return "residual";
        case StopReason::max_iter: return "max_iter";
        case StopReason::divergence: return "divergence";
    }
    return "?";
}

std::string to_string(CaseLabel c) {
    switch (c) {
        case CaseLabel::case1: return "case1";
        case CaseLabel::case2: return "case2";
        case CaseLabel::unknown: return "unknown";
    }
    return "?";
}

CaseLabel classify_case(const std::vector<double>& g) {
    if (g.size() < 2) return CaseLabel::unknown;
    for (std::size_t k = g.size() / 10; k + 1 < g.size(); ++k) {
        if (g[k] < g[k + 1]) return CaseLabel::case2;
    }
    return CaseLabel::case1;
}

namespace {

void summarize(IterationTrace& trace) {
    RunSummary& sm = trace.summary;
    const auto& rows = trace.rows;
    const std::size_t tail_len = std::max<std::size_t>(1, rows.size() / 10);
    const std::size_t tail_begin = rows.size() - tail_len;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const DiagnosticsRow& r = rows[i];
        if (r.bound_slack) {
            sm.min_bound_slack = std::min(sm.min_bound_slack, *r.bound_slack);
        }
        if (r.ineq35_slack) {
            sm.min_ineq35_slack = std::min(sm.min_ineq35_slack, *r.ineq35_slack);
            if (*r.ineq35_slack < -r.ineq35_tol) ++sm.ineq35_violations;
        }
        if (r.key_ineq_slack) {
            sm.min_key_ineq_slack = std::min(sm.min_key_ineq_slack, *r.key_ineq_slack);
            if (*r.key_ineq_slack < -r.key_ineq_tol) ++sm.key_ineq_violations;
        }
        if (!sm.first_below_1e6 && r.residual <= 1e-6) sm.first_below_1e6 = r.n;
        if (i >= tail_begin) {
            sm.tail_max_residual = std::max(sm.tail_max_residual, r.residual);
            if (r.anchor_pairing) {
                sm.tail_max_anchor_pairing =
                    std::max(sm.tail_max_anchor_pairing.value_or(-std::numeric_limits<double>::infinity()),
                             *r.anchor_pairing);
            }
        }
    }
}

}  // namespace

IterationTrace run(const Operator& T, const ScheduleSet& s, const Vector& u, const Vector& x0,
                   const RunOptions& opt) {
    const Space& sp = T.space();
    check_dim(sp, u, "run");
    check_dim(sp, x0, "run");
    require_finite(u, "run: u");
    require_finite(x0, "run: x0");
    if (opt.z) check_dim(sp, *opt.z, "run: z");
    if (opt.p) check_dim(sp, *opt.p, "run: p");
    for (std::size_t n = 0; n < opt.max_iter; ++n) {
        check_step_params(s.alpha_at(n), s.beta_at(n), s.gamma_at(n), n);
    }
    if (opt.two_term_scheme && !s.gamma.identically_zero(opt.max_iter + s.index_offset)) {
        throw DomainError("run: the two-term scheme requires gamma = 0");
    }

    const Vector anchor_ref = opt.p ? *opt.p : (opt.z ? *opt.z : Vector::Zero(sp.dim));
    const double radius = bound_radius(sp, x0, u, anchor_ref);
    const double guard = opt.guard_factor * radius + norm(sp, anchor_ref);
    const std::optional<double> p_radius =
        opt.p ? std::optional<double>(radius) : std::nullopt;

    IterationTrace trace;
    trace.rows.reserve(std::min<std::size_t>(opt.max_iter + 1, 1u << 22));
    std::vector<double> gamma_seq;

    IterationState st = initial_state(T, s, x0);
    auto base_row = [&](const IterationState& state) {
        DiagnosticsRow row;
        row.n = state.n;
        row.residual = state.residual;
        if (opt.z) {
            const double d = norm(sp, state.x - *opt.z);
            row.dist_to_z = d;
            gamma_seq.push_back(d * d);
        }
        if (p_radius) row.bound_slack = *p_radius - norm(sp, state.x - *opt.p);
        return row;
    };

    for (;;) {
        DiagnosticsRow row = base_row(st);
        if (opt.record_points) trace.points.push_back(st.x);
        const bool converged = opt.residual_tol > 0.0 && st.residual <= opt.residual_tol;
        if (converged || st.n >= opt.max_iter) {
            trace.stop = converged ? StopReason::residual : StopReason::max_iter;
            trace.rows.push_back(row);
            break;
        }
        IterationState next;
        if (opt.two_term_scheme) {
            const std::size_t n = st.n;
            Vector xn = halpern_update(s.alpha_at(n), s.beta_at(n), u, st.x, st.tx);
            next = make_state(T, s.alpha_at(n + 1), n + 1, std::move(xn));
        } else {
            next = step(T, s, u, st);
        }
        if (opt.z) fill_step(row, diagnose_step(T, params_at(s, st.n), u, st.x, st.tx, next.x, *opt.z));
        trace.rows.push_back(row);
        if (!next.x.allFinite() || norm(sp, next.x) > guard) {
            st = std::move(next);
            trace.rows.push_back(base_row(st));
            if (opt.record_points) trace.points.push_back(st.x);
            trace.stop = StopReason::divergence;
            break;
        }
        st = std::move(next);
    }

    trace.final_x = st.x;
    trace.iterations = st.n;
    trace.final_residual = st.residual;
    if (opt.z) {
        trace.final_dist_to_z = norm(sp, st.x - *opt.z);
        trace.case_label = classify_case(gamma_seq);
    }
    summarize(trace);
    if (p_radius) {
        for (const auto& r : trace.rows) {
            if (*r.bound_slack < -scaled_tol(*p_radius)) ++trace.summary.bound_violations;
        }
    }
    return trace;
}

// ---------------------------------------------------------------------------
// Anchor path

std::string to_string(AnchorMethod m) {
    switch (m) {
        case AnchorMethod::automatic: return "automatic";
        case AnchorMethod::direct: return "direct";
        case AnchorMethod::newton: return "newton";
        case AnchorMethod::damped: return "damped";
    }
    return "?";
}

namespace {

double anchor_residual(const Operator& T, const Vector& u, double t, const Vector& x) {
    return norm(T.space(), x - (t * u + (1.0 - t) * T(x)));
}

AnchorPath solve_direct(const Operator& T, const Vector& u, double t) {
    if (!T.affine()) throw DomainError("anchor_solve: direct method needs an affine operator");
    const Matrix& A = T.affine()->A;
    const Vector& b = T.affine()->b;
    const Eigen::Index n = A.rows();
    // t I + (1 - t)(I - A) rather than I - (1 - t) A: the latter cancels
    // catastrophically on eigenvalue-1 directions when t is small.
    const Matrix M = t * Matrix::Identity(n, n) + (1.0 - t) * (Matrix::Identity(n, n) - A);
    const Vector rhs = t * u + (1.0 - t) * b;
    Eigen::FullPivLU<Matrix> lu(M);
    if (!lu.isInvertible()) throw DomainError("anchor_solve: singular linear system");
    Vector x = lu.solve(rhs);
    x += lu.solve(Vector(rhs - M * x));
    AnchorPath r;
    r.t = t;
    r.x_t = std::move(x);
    r.solver_residual = anchor_residual(T, u, t, r.x_t);
    r.iterations = 1;
    r.method = AnchorMethod::direct;
    return r;
}

AnchorPath solve_damped(const Operator& T, const Vector& u, double t, const AnchorOptions& opts,
                        Vector x) {
    const double a = T.space().mu(T.lambda());
    double s = a / (1.0 - t + t * a);
    AnchorPath r;
    r.t = t;
    r.method = AnchorMethod::damped;
    for (int attempt = 0; attempt <= opts.max_halvings; ++attempt, s *= 0.5) {
        const Vector start = x;
        double res0 = anchor_residual(T, u, t, x);
        bool blew_up = false;
        for (int k = 0; k < opts.max_iter; ++k) {
            const Vector g = t * u + (1.0 - t) * T(x);
            const double res = norm(T.space(), x - g);
            ++r.iterations;
            if (res <= opts.tol) {
                r.x_t = std::move(x);
                r.solver_residual = res;
                return r;
            }
            if (!std::isfinite(res) || res > 10.0 * res0 + 1.0) {
                blew_up = true;
                break;
            }
            x = (1.0 - s) * x + s * g;
        }
        if (blew_up) x = start;
    }
    std::ostringstream os;
    os << "anchor_solve: damped iteration did not reach tol " << opts.tol << " at t=" << t;
    throw ConvergenceError(os.str());
}

Matrix fd_jacobian(const Operator& T, const Vector& x) {
    const Eigen::Index n = x.size();
    Matrix J(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
        Vector xp = x;
        Vector xm = x;
        xp[j] += h;
        xm[j] -= h;
        J.col(j) = (T(xp) - T(xm)) / (xp[j] - xm[j]);
    }
    return J;
}

AnchorPath solve_newton(const Operator& T, const Vector& u, double t, const AnchorOptions& opts,
                        Vector x) {
    const Space& sp = T.space();
    const Eigen::Index n = x.size();
    auto F = [&](const Vector& v) -> Vector { return v - t * u - (1.0 - t) * T(v); };
    AnchorPath r;
    r.t = t;
    r.method = AnchorMethod::newton;
    Vector fx = F(x);
    double res = norm(sp, fx);
    for (int k = 0; k < 100 && res > 0.0; ++k) {
        ++r.iterations;
        const Matrix J = Matrix::Identity(n, n) - (1.0 - t) * fd_jacobian(T, x);
        Eigen::PartialPivLU<Matrix> lu(J);
        const Vector delta = lu.solve(Vector(-fx));
        if (!delta.allFinite()) break;
        double step = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls, step *= 0.5) {
            const Vector trial = x + step * delta;
            const Vector ft = F(trial);
            const double rt = norm(sp, ft);
            if (rt < res || (rt == res && ls == 0)) {
                x = trial;
                fx = ft;
                res = rt;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        if (step * delta.norm() <= 1e-15 * (1.0 + x.norm())) break;
    }
    if (res <= opts.tol) {
        r.x_t = std::move(x);
        r.solver_residual = res;
        return r;
    }
    // Newton stalled: finish with the damped iteration from the current point.
    AnchorPath fallback = solve_damped(T, u, t, opts, std::move(x));
    fallback.iterations += r.iterations;
    return fallback;
}

}  // namespace

AnchorPath anchor_solve(const Operator& T, const Vector& u, double t, const AnchorOptions& opts,
                        const Vector* warm_start) {
    if (!(t > 0.0 && t < 1.0)) throw DomainError("anchor_solve: t must lie in (0, 1)");
    check_dim(T.space(), u, "anchor_solve");
    require_finite(u, "anchor_solve: u");
    AnchorMethod m = opts.method;
    if (m == AnchorMethod::automatic) m = T.affine() ? AnchorMethod::direct : AnchorMethod::newton;
    Vector start = warm_start ? *warm_start : u;
    switch (m) {
        case AnchorMethod::direct: return solve_direct(T, u, t);
        case AnchorMethod::damped: return solve_damped(T, u, t, opts, std::move(start));
        case AnchorMethod::newton:
        case AnchorMethod::automatic: return solve_newton(T, u, t, opts, std::move(start));
    }
    throw DomainError("anchor_solve: unknown method");
}

std::vector<double> default_t_grid() { return {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}; }

AnchorLimit anchor_limit(const Operator& T, const Vector& u, const std::vector<double>& t_grid,
                         const AnchorOptions& opts) {
    if (t_grid.empty()) throw DomainError("anchor_limit: empty t grid");
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        if (!(t_grid[k] > 0.0 && t_grid[k] < 1.0)) throw DomainError("anchor_limit: t outside (0,1)");
        if (k > 0 && !(t_grid[k] < t_grid[k - 1])) {
            throw DomainError("anchor_limit: t grid must be strictly decreasing");
        }
    }
    AnchorLimit out;
    for (double t : t_grid) {
        const Vector* warm = out.path.empty() ? nullptr : &out.path.back().x_t;
        out.path.push_back(anchor_solve(T, u, t, opts, warm));
    }
    for (std::size_t k = 0; k + 1 < out.path.size(); ++k) {
        out.cauchy_diffs.push_back(norm(T.space(), out.path[k].x_t - out.path[k + 1].x_t));
    }
    out.z = out.path.back().x_t;

    std::ostringstream note;
    if (out.cauchy_diffs.empty()) {
        out.cauchy_ok = false;
        note << "single grid point: no Cauchy check possible";
    } else {
        bool decreasing = true;
        for (std::size_t k = 0; k + 1 < out.cauchy_diffs.size(); ++k) {
            const double a = out.cauchy_diffs[k];
            if (out.cauchy_diffs[k + 1] > a + 1e-12 * (1.0 + a)) decreasing = false;
        }
        const double last = out.cauchy_diffs.back();
        out.cauchy_ok = decreasing && last <= kCauchyThreshold;
        note << "last difference " << last;
        if (!decreasing) note << "; differences not decreasing";
        if (last > kCauchyThreshold) note << "; exceeds threshold " << kCauchyThreshold;
    }
    out.note = note.str();
    return out;
}

// ---------------------------------------------------------------------------
// Mainge tau

TauAnalysis mainge_tau(const std::vector<double>& g) {
    if (g.size() < 2) throw DomainError("mainge_tau: need at least two values");
    TauAnalysis a;
    a.gamma_seq = g;
    const std::size_t len = g.size();
    std::optional<std::size_t> last;
    for (std::size_t n = 0; n < len; ++n) {
        if (n + 1 < len && g[n] < g[n + 1]) last = n;
        if (!last) continue;
        if (!a.n0) a.n0 = n;
        a.tau.push_back(*last);
    }
    if (!a.n0) {
        a.monotone = true;
        return a;
    }
    for (std::size_t i = 0; i < a.tau.size(); ++i) {
        const std::size_t n = *a.n0 + i;
        const std::size_t k = a.tau[i];
        if (i > 0 && k < a.tau[i - 1]) a.nondecreasing = false;
        if (!(g[k] <= g[k + 1])) a.estimate_ascent = false;
        if (!(g[n] <= g[k + 1])) a.estimate_dominated = false;
    }
    return a;
}

// ---------------------------------------------------------------------------
// Recursion harness

Lemma22Result lemma22_harness(const std::function<double(std::size_t)>& t_seq,
                              const std::function<double(std::size_t)>& c_seq, double a0,
                              std::size_t horizon) {
    if (!(a0 >= 0.0)) throw DomainError("lemma22_harness: a0 must be nonnegative");
    Lemma22Result r;
    r.a.reserve(horizon + 1);
    r.a.push_back(a0);
    double a = a0;
    for (std::size_t n = 0; n < horizon; ++n) {
        const double t = t_seq(n);
        if (!(t >= 0.0 && t <= 1.0)) {
            throw DomainError("lemma22_harness: t_n outside [0,1] at n=" + std::to_string(n));
        }
        a = (1.0 - t) * a + t * c_seq(n);
        r.a.push_back(a);
    }
    return r;
}

Lemma22Result lemma22_harness(const Sequence& t_seq, const Sequence& c_seq, double a0,
                              std::size_t horizon) {
    Lemma22Result r = lemma22_harness([&](std::size_t n) { return t_seq(n); },
                                      [&](std::size_t n) { return c_seq(n); }, a0, horizon);
    r.t_sum_diverges = t_seq.series_diverges();
    if (auto lim = c_seq.limit()) r.c_limsup_nonpositive = *lim <= 0.0;
    return r;
}

}  // namespace mannlab
