#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mannlab/common.hpp"

namespace mannlab {

enum class SequenceKind { constant, power, zero, harmonic, table };

/// A closed-form or tabulated parameter sequence, evaluable at every n >= 0.
///   constant(c): c
///   power(a, b): a / (n + 1)^b
///   zero:        0
///   harmonic:    1 / (n + 1)
///   table(v):    v[n], repeating the last entry past the end
class Sequence {
 public:
    static Sequence constant(double c);
    static Sequence power(double a, double b);
    static Sequence zero();
    static Sequence harmonic();
    static Sequence table(std::vector<double> values);

    double operator()(std::size_t n) const;

    SequenceKind kind() const { return kind_; }
    double a() const { return a_; }
    double b() const { return b_; }
    const std::vector<double>& values() const { return values_; }

    bool closed_form() const { return kind_ != SequenceKind::table; }
    /// Exact limit for closed forms (+inf for power with b < 0); nullopt for tables.
    std::optional<double> limit() const;
    /// Exact divergence of sum_n s_n for closed forms; nullopt for tables.
    std::optional<bool> series_diverges() const;
    /// True when every term is zero (decided exactly for closed forms,
    /// over the given horizon for tables).
    bool identically_zero(std::size_t horizon) const;

    std::string describe() const;

 private:
    SequenceKind kind_ = SequenceKind::zero;
    double a_ = 0.0;
    double b_ = 0.0;
    std::vector<double> values_;
};

/// The three parameter sequences of the modified Mann iteration. Step n of
/// a run reads the sequences at index n + index_offset, which lets a
/// schedule skip leading terms that would leave the admissible ranges
/// (e.g. gamma_0 = 1 for the harmonic sequence).
struct ScheduleSet {
    Sequence alpha = Sequence::constant(0.5);
    Sequence beta = Sequence::harmonic();
    Sequence gamma = Sequence::zero();
    std::size_t index_offset = 0;

    double alpha_at(std::size_t n) const { return alpha(n + index_offset); }
    double beta_at(std::size_t n) const { return beta(n + index_offset); }
    double gamma_at(std::size_t n) const { return gamma(n + index_offset); }

    std::string describe() const;
};

/// Thresholds for finite-horizon decisions on tabulated sequences.
inline constexpr double kTailFraction = 0.5;
inline constexpr double kTailMargin = 1e-3;
inline constexpr double kVanishingLevel = 0.05;
inline constexpr double kDivergenceThreshold = 5.0;

struct ConditionResult {
    std::string condition;
    bool pass = false;
    double margin = 0.0;
    std::string note;
};

struct VerdictReport {
    std::string theorem;
    std::vector<ConditionResult> conditions;

    bool pass() const;
    /// Throws std::out_of_range when the condition is not in the report.
    const ConditionResult& at(const std::string& condition) const;
    /// Names of failing conditions.
    std::vector<std::string> failures() const;
};

enum class LegacyTheorem { zhou, chai_song };

/// Hypotheses of the relaxed strong-convergence theorem in 2-uniformly
/// smooth spaces:
///   ranges: beta_n in (0,1), gamma_n in [0,1), beta_n + gamma_n < 1;
///   (i)   alpha_n in [0, mu], mu = min{1, lambda/K^2}, and
///         liminf alpha_n (lambda - K^2 alpha_n) > 0;
///   (ii)  beta_n -> 0 and sum beta_n = inf;
///   (iii) limsup gamma_n < 1.
VerdictReport validate_theorem31(const ScheduleSet& s, double lambda, double K2,
                                 std::size_t horizon);

/// q-uniformly smooth variant: (i) uses mu = min{1, (q lambda / Cq)^{1/(q-1)}}
/// and the margin liminf alpha_n (q lambda - Cq alpha_n^{q-1}) > 0.
VerdictReport validate_theorem32(const ScheduleSet& s, double lambda, double q, double Cq,
                                 std::size_t horizon);

/// The stricter conditions of the earlier results:
///   zhou:      (i) alpha_n in [a, mu], a > 0; (ii) as above;
///              (iii) |alpha_{n+1} - alpha_n| -> 0; (iv) 0 < liminf gamma <= limsup gamma < 1.
///   chai_song: scheme gamma = 0; (i) as zhou; (ii) sum |alpha_{n+1} - alpha_n| < inf;
///              (iii) beta_n -> 0, sum beta_n = inf, sum |beta_{n+1} - beta_n| < inf.
VerdictReport validate_legacy(const ScheduleSet& s, LegacyTheorem which, double lambda, double K2,
                              std::size_t horizon);

std::string to_string(LegacyTheorem which);

}  // namespace mannlab
