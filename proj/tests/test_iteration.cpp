#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "mannlab/iteration.hpp"
#include "mannlab/rng.hpp"

using namespace mannlab;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector x(static_cast<int>(v.size()));
    int i = 0;
    for (double a : v) x[i++] = a;
    return x;
}

ScheduleSet make(Sequence a, Sequence b, Sequence g, std::size_t offset = 0) {
    ScheduleSet s;
    s.alpha = std::move(a);
    s.beta = std::move(b);
    s.gamma = std::move(g);
    s.index_offset = offset;
    return s;
}

Operator diag_op(std::vector<double> e, double lambda) {
    GalleryParams p;
    p.eigenvalues = std::move(e);
    return gallery("diagonal", Space::euclidean(static_cast<int>(p.eigenvalues.size())), lambda, p);
}

// The same diagonal map with its structure hidden, so the anchor solver
// cannot take the linear shortcut.
Operator opaque(const Operator& T) {
    return Operator(T.name() + "_opaque", T.space(), T.lambda(), [T](const Vector& x) { return T(x); });
}

bool same_bits(const Vector& a, const Vector& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST(Step, ScalarNegationExample) {
    const Operator T = gallery("negation", Space::euclidean(1), 0.5);
    const ScheduleSet s = make(Sequence::constant(0.5), Sequence::constant(0.5), Sequence::constant(0.25));
    const IterationState s0 = initial_state(T, s, vec({1}));
    EXPECT_EQ(s0.y[0], 0.0);
    const IterationState s1 = step(T, s, vec({0}), s0);
    EXPECT_EQ(s1.n, 1u);
    EXPECT_EQ(s1.x[0], 0.25);
}

TEST(Step, IdentityCollapsesToAnchorAverage) {
    const Operator T = gallery("identity", Space::euclidean(3), 0.5);
    Sampler rng(1);
    for (int k = 0; k < 100; ++k) {
        const double a = rng.uniform(), b = rng.uniform(0, 0.5), g = rng.uniform(0, 0.5);
        const Vector u = rng.normal_vector(3), x = rng.normal_vector(3);
        const Vector next = mann_update(a, b, g, u, x, T(x));
        EXPECT_LE((next - (b * u + (1 - b) * x)).norm(), 1e-14);
    }
}

TEST(Step, BetaOneJumpsToAnchor) {
    const Operator T = diag_op({1, -1}, 0.5);
    const ScheduleSet s = make(Sequence::constant(0.3), Sequence::table({1.0, 0.5}), Sequence::zero());
    const Vector u = vec({4, -3});
    EXPECT_EQ(step(T, s, u, initial_state(T, s, vec({1, 1}))).x, u);
}

TEST(Step, OutOfRangeScheduleThrows) {
    const Operator T = gallery("identity", Space::euclidean(1), 0.5);
    const ScheduleSet s = make(Sequence::constant(0.5), Sequence::constant(0.7), Sequence::constant(0.5));
    EXPECT_THROW(step(T, s, vec({0}), initial_state(T, s, vec({1}))), DomainError);
}

TEST(Run, IdentityMatchesTelescopingProduct) {
    const Operator T = gallery("identity", Space::euclidean(3), 0.5);
    const ScheduleSet s = make(Sequence::constant(0.5), Sequence::harmonic(), Sequence::zero(), 1);
    const Vector u = vec({1, -2, 0.5}), x0 = vec({4, 0, -3});
    RunOptions o;
    o.max_iter = 1000;
    o.residual_tol = 0.0;
    o.record_points = true;
    const IterationTrace tr = run(T, s, u, x0, o);
    ASSERT_EQ(tr.points.size(), 1001u);
    const double d0 = (x0 - u).norm();
    for (std::size_t n = 0; n < tr.points.size(); ++n) {
        EXPECT_NEAR((tr.points[n] - u).norm(), d0 / (n + 1.0), 1e-13) << n;
    }
}

TEST(Run, ScalarNegationMatchesIndependentSimulation) {
    const double lambda = 0.5, K2 = 0.5;
    const Operator T = gallery("negation", Space::euclidean(1), lambda);
    const ScheduleSet s = make(Sequence::constant(0.3), Sequence::harmonic(), Sequence::constant(0.2), 1);
    RunOptions o;
    o.max_iter = 500;
    o.residual_tol = 0.0;
    o.z = vec({0});
    o.p = vec({0});
    const IterationTrace tr = run(T, s, vec({0}), vec({1}), o);

    double x = 1.0;
    for (std::size_t n = 0; n < 500; ++n) {
        const double a = 0.3, b = 1.0 / (n + 2.0), g = 0.2;
        const double next = g * x + (1 - b - g) * (a * -x + (1 - a) * x);
        const auto& row = tr.rows[n];
        EXPECT_NEAR(row.residual, 2 * std::abs(x), 1e-15);
        EXPECT_NEAR(*row.anchor_pairing, 0.0, 0.0);
        const double key = x * x - next * next - 2 * a * (1 - b - g) * (lambda - K2 * a) * 4 * x * x;
        EXPECT_NEAR(*row.key_ineq_slack, key, 1e-15);
        EXPECT_GE(*row.key_ineq_slack, -row.key_ineq_tol);
        x = next;
    }
    EXPECT_NEAR(tr.final_x[0], x, 1e-300);
    EXPECT_LE(tr.final_residual, 1e-12);
}

TEST(Run, DiagonalConvergesToProjectionOfAnchor) {
    const Operator T = diag_op({1, -1}, 0.5);
    const ScheduleSet s = make(Sequence::constant(0.4), Sequence::harmonic(), Sequence::zero(), 1);
    RunOptions o;
    o.max_iter = 100000;
    o.z = vec({1, 0});
    o.p = vec({1, 0});
    const IterationTrace tr = run(T, s, vec({1, 1}), vec({2, 2}), o);
    EXPECT_LE(*tr.final_dist_to_z, 1e-3);
    EXPECT_EQ(tr.summary.bound_violations, 0u);
    EXPECT_EQ(tr.summary.ineq35_violations, 0u);
    EXPECT_EQ(tr.summary.key_ineq_violations, 0u);
}

TEST(Run, LastRowHasNoStepFields) {
    const Operator T = gallery("negation", Space::euclidean(2), 0.5);
    RunOptions o;
    o.max_iter = 5;
    o.z = vec({0, 0});
    const IterationTrace tr = run(T, make(Sequence::constant(0.5), Sequence::harmonic(), Sequence::zero(), 1),
                                  vec({1, 1}), vec({1, -1}), o);
    ASSERT_EQ(tr.rows.size(), 6u);
    EXPECT_TRUE(tr.rows[4].ineq35_slack.has_value());
    EXPECT_FALSE(tr.rows[5].ineq35_slack.has_value());
    EXPECT_FALSE(tr.rows[5].anchor_pairing.has_value());
    EXPECT_TRUE(tr.rows[5].dist_to_z.has_value());
}

TEST(Run, ResidualStopRule) {
    const Operator T = gallery("negation", Space::euclidean(2), 0.5);
    RunOptions o;
    o.residual_tol = 1e-6;
    const IterationTrace tr = run(T, make(Sequence::constant(0.4), Sequence::harmonic(), Sequence::zero(), 1),
                                  vec({0, 0}), vec({1, -1}), o);
    EXPECT_EQ(tr.stop, StopReason::residual);
    EXPECT_LE(tr.final_residual, 1e-6);
    EXPECT_LT(tr.iterations, 100u);
}

TEST(Run, DivergenceGuardFires) {
    const Operator T("expander", Space::euclidean(2), 0.5, [](const Vector& x) { return Vector(3.0 * x); });
    RunOptions o;
    o.max_iter = 10000;
    const IterationTrace tr = run(T, make(Sequence::constant(1.0), Sequence::harmonic(), Sequence::zero(), 1),
                                  vec({0, 0}), vec({1, 1}), o);
    EXPECT_EQ(tr.stop, StopReason::divergence);
    EXPECT_LT(tr.iterations, 100u);
}

TEST(Run, TwoTermSchemeRequiresZeroGamma) {
    const Operator T = gallery("identity", Space::euclidean(1), 0.5);
    RunOptions o;
    o.max_iter = 10;
    o.two_term_scheme = true;
    EXPECT_THROW(run(T, make(Sequence::constant(0.5), Sequence::harmonic(), Sequence::constant(0.1), 1),
                     vec({0}), vec({1}), o),
                 DomainError);
}

TEST(Run, ZeroGammaIsBitwiseTwoTermScheme) {
    const Operator T = diag_op({1, 1, -1, 0.5, 0.9, -0.8, 0, 0.25}, 0.4);
    const ScheduleSet s = make(Sequence::constant(0.4), Sequence::power(1, 0.5), Sequence::zero(), 4);
    const Vector u = vec({1, 2, 0.03, -0.02, 0.03, 0.02, -0.03, 0.02});
    const Vector x0 = vec({-2, 0.5, 3, -1, 2, 1, -3, 0.5});
    RunOptions o;
    o.max_iter = 5000;
    o.residual_tol = 0.0;
    o.record_points = true;
    const IterationTrace three = run(T, s, u, x0, o);
    o.two_term_scheme = true;
    const IterationTrace two = run(T, s, u, x0, o);
    ASSERT_EQ(three.points.size(), two.points.size());
    for (std::size_t n = 0; n < two.points.size(); ++n) ASSERT_TRUE(same_bits(three.points[n], two.points[n])) << n;
}

TEST(Diagnostics, MatchesRunRows) {
    const Operator T = diag_op({1, -1, 0.5}, 0.5);
    const ScheduleSet s = make(Sequence::constant(0.4), Sequence::harmonic(), Sequence::constant(0.1), 1);
    const Vector u = vec({1, 1, 1}), z = vec({1, 0, 0});
    RunOptions o;
    o.max_iter = 50;
    o.residual_tol = 0.0;
    o.record_points = true;
    o.z = z;
    o.p = z;
    const IterationTrace tr = run(T, s, u, vec({3, -2, 5}), o);
    const auto rows = diagnostics(T, s, u, tr.points, z, z);
    ASSERT_EQ(rows.size(), tr.rows.size());
    for (std::size_t n = 0; n < rows.size(); ++n) {
        EXPECT_EQ(rows[n].residual, tr.rows[n].residual);
        EXPECT_EQ(rows[n].ineq35_slack, tr.rows[n].ineq35_slack);
        EXPECT_EQ(rows[n].key_ineq_slack, tr.rows[n].key_ineq_slack);
        EXPECT_EQ(rows[n].bound_slack, tr.rows[n].bound_slack);
    }
}

TEST(Diagnostics, IdentityAnchorPairingVanishes) {
    const Operator T = gallery("identity", Space::euclidean(2), 0.5);
    const Vector u = vec({1, -1});
    RunOptions o;
    o.max_iter = 100;
    o.residual_tol = 0.0;
    o.z = u;
    const IterationTrace tr = run(T, make(Sequence::constant(0.5), Sequence::harmonic(), Sequence::zero(), 1),
                                  u, vec({5, 5}), o);
    for (std::size_t n = 0; n + 1 < tr.rows.size(); ++n) EXPECT_EQ(*tr.rows[n].anchor_pairing, 0.0);
}

TEST(ClassifyCase, Labels) {
    EXPECT_EQ(classify_case({5, 4, 3, 2, 1, 0.5, 0.2, 0.1, 0.05, 0.01, 0.0}), CaseLabel::case1);
    EXPECT_EQ(classify_case({5, 4, 3, 2, 1, 0.5, 0.7, 0.1, 0.05, 0.01, 0.0}), CaseLabel::case2);
    // An early ascent inside the first 10% does not count.
    std::vector<double> g(100);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = 100.0 - static_cast<double>(k);
    g[1] = 200.0;
    EXPECT_EQ(classify_case(g), CaseLabel::case1);
}

TEST(Anchor, NegationClosedForm) {
    const Operator T = gallery("negation", Space::euclidean(3), 0.5);
    const Vector u = vec({1, -2, 3});
    for (double t : {0.5, 0.1, 1e-3}) {
        const AnchorPath p = anchor_solve(T, u, t);
        EXPECT_LE((p.x_t - t * u / (2 - t)).norm(), 1e-14) << t;
        EXPECT_EQ(p.method, AnchorMethod::direct);
    }
}

TEST(Anchor, IdentityStaysAtAnchor) {
    const Operator T = gallery("identity", Space::euclidean(2), 0.5);
    const Vector u = vec({0.3, 7});
    for (double t : {0.9, 0.01, 1e-6}) EXPECT_LE((anchor_solve(T, u, t).x_t - u).norm(), 1e-12);
}

TEST(Anchor, DiagonalSmallT) {
    const Operator T = diag_op({1, -1}, 0.5);
    const double t = 1e-3;
    const AnchorPath p = anchor_solve(T, vec({1, 1}), t);
    EXPECT_NEAR(p.x_t[0], 1.0, 1e-14);
    EXPECT_NEAR(p.x_t[1], t / (2 - t), 1e-16);
    EXPECT_NEAR(p.x_t[1], 5.0025e-4, 1e-8);
}

TEST(Anchor, SolversAgree) {
    const Operator T = diag_op({1, -1, 0.5, 0}, 0.5);
    const Operator hidden = opaque(T);
    const Vector u = vec({1, 1, -2, 0.5});
    for (double t : {0.3, 1e-2, 1e-3}) {
        const Vector direct = anchor_solve(T, u, t).x_t;
        AnchorOptions damped;
        damped.method = AnchorMethod::damped;
        AnchorOptions newton;
        newton.method = AnchorMethod::newton;
        const AnchorPath d = anchor_solve(hidden, u, t, damped);
        const AnchorPath n = anchor_solve(hidden, u, t, newton);
        EXPECT_EQ(d.method, AnchorMethod::damped);
        EXPECT_LE((d.x_t - direct).norm(), 1e-8) << t;
        EXPECT_LE((n.x_t - direct).norm(), 1e-8) << t;
        EXPECT_LE(d.solver_residual, 1e-10);
    }
}

TEST(Anchor, NonlinearOperatorInPNorm) {
    GalleryParams p;
    p.kappa = 0.25;
    const Operator T = gallery("clipped_quadratic", Space::lp(3, 4.0), 0.4, p);
    const Vector u = vec({0.5, -0.2, 0.1});
    const AnchorPath a = anchor_solve(T, u, 0.05);
    const Vector resid = a.x_t - (0.05 * u + 0.95 * T(a.x_t));
    EXPECT_LE(resid.norm(), 1e-10);
    AnchorOptions damped;
    damped.method = AnchorMethod::damped;
    EXPECT_LE((anchor_solve(T, u, 0.05, damped).x_t - a.x_t).norm(), 1e-8);
}

TEST(Anchor, RejectsTOutsideOpenInterval) {
    const Operator T = gallery("identity", Space::euclidean(1), 0.5);
    EXPECT_THROW(anchor_solve(T, vec({1}), 0.0), DomainError);
    EXPECT_THROW(anchor_solve(T, vec({1}), 1.0), DomainError);
}

TEST(AnchorLimit, ClosedFormLimits) {
    const AnchorLimit id = anchor_limit(gallery("identity", Space::euclidean(2), 0.5), vec({2, 3}),
                                        default_t_grid());
    EXPECT_LE((id.z - vec({2, 3})).norm(), 1e-12);
    EXPECT_TRUE(id.cauchy_ok);
    const AnchorLimit neg = anchor_limit(gallery("negation", Space::euclidean(2), 0.5), vec({2, 3}),
                                         default_t_grid());
    EXPECT_LE(neg.z.norm(), 1e-5);
    EXPECT_TRUE(neg.cauchy_ok);
    const AnchorLimit d = anchor_limit(diag_op({1, -1, 0.5}, 0.5), vec({1, 1, 1}), default_t_grid());
    EXPECT_LE((d.z - vec({1, 0, 0})).norm(), 1e-5);
    EXPECT_TRUE(d.cauchy_ok);
    ASSERT_EQ(d.cauchy_diffs.size(), 5u);
}

TEST(AnchorLimit, CoarseGridFailsCauchyCheck) {
    const AnchorLimit d = anchor_limit(diag_op({1, 0.99}, 0.5), vec({1, 1}), {0.5, 0.1});
    EXPECT_FALSE(d.cauchy_ok);
    EXPECT_FALSE(d.note.empty());
}

TEST(AnchorLimit, SinglePointGridIsNotCauchy) {
    const AnchorLimit d = anchor_limit(diag_op({1, -1}, 0.5), vec({1, 1}), {1e-3});
    EXPECT_FALSE(d.cauchy_ok);
}

namespace {

// Brute-force tau(n) = max{k <= n : g[k] < g[k+1]}, or -1 if none.
long brute_tau(const std::vector<double>& g, std::size_t n) {
    long best = -1;
    for (std::size_t k = 0; k <= n && k + 1 < g.size(); ++k) {
        if (g[k] < g[k + 1]) best = static_cast<long>(k);
    }
    return best;
}

}  // namespace

TEST(MaingeTau, WorkedExample) {
    const TauAnalysis t = mainge_tau({3, 1, 2, 0, 5});
    ASSERT_FALSE(t.monotone);
    EXPECT_EQ(*t.n0, 1u);
    EXPECT_EQ(t.tau, (std::vector<std::size_t>{1, 1, 3, 3}));
    EXPECT_TRUE(t.estimate_ascent);
    EXPECT_TRUE(t.estimate_dominated);
    EXPECT_TRUE(t.ok());
}

TEST(MaingeTau, DecreasingIsMonotone) {
    const TauAnalysis t = mainge_tau({5, 4, 3, 2, 1});
    EXPECT_TRUE(t.monotone);
    EXPECT_TRUE(t.tau.empty());
    EXPECT_FALSE(t.n0.has_value());
}

TEST(MaingeTau, IncreasingSequence) {
    const TauAnalysis t = mainge_tau({1, 2, 3, 4, 5});
    EXPECT_EQ(*t.n0, 0u);
    for (std::size_t n = 0; n + 1 < 5; ++n) EXPECT_EQ(t.tau_at(n), n);
    // The last index has no successor, so its maximal ascent is the previous one.
    EXPECT_EQ(t.tau_at(4), 3u);
}

TEST(MaingeTau, TooShortThrows) { EXPECT_THROW(mainge_tau({1.0}), DomainError); }

TEST(MaingeTauProperty, MatchesBruteForceOnRandomSequences) {
    Sampler rng(55);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t len = 2 + static_cast<std::size_t>(rng.uniform() * 60);
        std::vector<double> g(len);
        for (auto& v : g) v = rng.uniform();
        const TauAnalysis t = mainge_tau(g);
        if (t.monotone) {
            for (std::size_t n = 0; n < len; ++n) EXPECT_EQ(brute_tau(g, n), -1);
            continue;
        }
        EXPECT_TRUE(t.ok());
        for (std::size_t n = 0; n < len; ++n) {
            const long b = brute_tau(g, n);
            if (n < *t.n0) {
                EXPECT_EQ(b, -1);
            } else {
                EXPECT_EQ(static_cast<long>(t.tau_at(n)), b);
                EXPECT_LE(g[t.tau_at(n)], g[t.tau_at(n) + 1]);
                EXPECT_LE(g[n], g[t.tau_at(n) + 1]);
            }
        }
    }
}

TEST(Lemma22, OneStepAnnihilation) {
    const auto r = lemma22_harness(Sequence::constant(1.0), Sequence::constant(1e-12), 5.0, 3);
    EXPECT_NEAR(r.a[1], 1e-12, 1e-24);
}

TEST(Lemma22, HarmonicMatchesClosedForm) {
    // n a_n = H_n for t_n = c_n = 1/(n+1), a_0 = 1.
    const auto r = lemma22_harness(Sequence::harmonic(), Sequence::harmonic(), 1.0, 10000);
    double H = 0.0;
    for (std::size_t n = 1; n <= 10000; ++n) {
        H += 1.0 / static_cast<double>(n);
        EXPECT_NEAR(r.a[n], H / static_cast<double>(n), 1e-12 * H / static_cast<double>(n)) << n;
    }
    EXPECT_LT(r.final_value(), 1e-2);
    EXPECT_TRUE(*r.t_sum_diverges);
    EXPECT_TRUE(*r.c_limsup_nonpositive);
}

TEST(Lemma22, PositiveLimsupDoesNotVanish) {
    const auto r = lemma22_harness(Sequence::harmonic(), Sequence::constant(0.1), 1.0, 10000);
    EXPECT_NEAR(r.final_value(), 0.1, 1e-3);
    EXPECT_FALSE(*r.c_limsup_nonpositive);
}

TEST(Lemma22, RejectsBadInput) {
    EXPECT_THROW(lemma22_harness(Sequence::harmonic(), Sequence::zero(), -1.0, 10), DomainError);
    EXPECT_THROW(lemma22_harness(Sequence::constant(1.5), Sequence::zero(), 1.0, 10), DomainError);
}

TEST(Lemma22Property, VanishesForRandomAdmissibleSequences) {
    Sampler rng(9);
    for (int k = 0; k < 20; ++k) {
        const double b = rng.uniform(0.3, 1.0);
        const double cb = rng.uniform(0.5, 1.0);
        const auto r = lemma22_harness(Sequence::power(1.0, b), Sequence::power(rng.uniform(0.1, 1.0), cb),
                                       rng.uniform(0, 10), 20000);
        EXPECT_LT(r.final_value(), 0.1) << "b=" << b << " cb=" << cb;
    }
}
