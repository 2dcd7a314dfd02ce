#include "mannlab/schedules.hpp"

#include <sstream>

namespace mannlab {

// ---------------------------------------------------------------------------
// Sequence

Sequence Sequence::constant(double c) {
    if (!std::isfinite(c)) throw DomainError("constant sequence: non-finite value");
    Sequence s;
    s.kind_ = SequenceKind::constant;
    s.a_ = c;
    return s;
}

Sequence Sequence::power(double a, double b) {
    if (!std::isfinite(a) || !std::isfinite(b)) throw DomainError("power sequence: non-finite parameter");
    Sequence s;
    s.kind_ = SequenceKind::power;
    s.a_ = a;
    s.b_ = b;
    return s;
}

Sequence Sequence::zero() { return Sequence{}; }

Sequence Sequence::harmonic() {
    Sequence s;
    s.kind_ = SequenceKind::harmonic;
    return s;
}

Sequence Sequence::table(std::vector<double> values) {
    if (values.empty()) throw DomainError("table sequence: no values");
    for (double v : values) {
        if (!std::isfinite(v)) throw DomainError("table sequence: non-finite value");
    }
    Sequence s;
    s.kind_ = SequenceKind::table;
    s.values_ = std::move(values);
    return s;
}

double Sequence::operator()(std::size_t n) const {
    const double m = static_cast<double>(n) + 1.0;
    switch (kind_) {
        case SequenceKind::constant: return a_;
        case SequenceKind::power: return a_ / std::pow(m, b_);
        case SequenceKind::zero: return 0.0;
        case SequenceKind::harmonic: return 1.0 / m;
        case SequenceKind::table: return values_[std::min(n, values_.size() - 1)];
    }
    return 0.0;
}

std::optional<double> Sequence::limit() const {
    switch (kind_) {
        case SequenceKind::constant: return a_;
        case SequenceKind::power:
            if (a_ == 0.0) return 0.0;
            if (b_ > 0.0) return 0.0;
            if (b_ == 0.0) return a_;
            return a_ > 0.0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
        case SequenceKind::zero: return 0.0;
        case SequenceKind::harmonic: return 0.0;
        case SequenceKind::table: return std::nullopt;
    }
    return std::nullopt;
}

std::optional<bool> Sequence::series_diverges() const {
    switch (kind_) {
        case SequenceKind::constant: return a_ != 0.0;
        case SequenceKind::power: return a_ != 0.0 && b_ <= 1.0;
        case SequenceKind::zero: return false;
        case SequenceKind::harmonic: return true;
        case SequenceKind::table: return std::nullopt;
    }
    return std::nullopt;
}

bool Sequence::identically_zero(std::size_t horizon) const {
    switch (kind_) {
        case SequenceKind::constant: return a_ == 0.0;
        case SequenceKind::power: return a_ == 0.0;
        case SequenceKind::zero: return true;
        case SequenceKind::harmonic: return false;
        case SequenceKind::table:
            for (std::size_t n = 0; n < std::max<std::size_t>(horizon, 1); ++n) {
                if ((*this)(n) != 0.0) return false;
            }
            return true;
    }
    return false;
}

std::string Sequence::describe() const {
    std::ostringstream os;
    switch (kind_) {
        case SequenceKind::constant: os << "constant(" << a_ << ")"; break;
        case SequenceKind::power: os << "power(" << a_ << "," << b_ << ")"; break;
        case SequenceKind::zero: os << "zero"; break;
        case SequenceKind::harmonic: os << "harmonic"; break;
        case SequenceKind::table: os << "table[" << values_.size() << "]"; break;
    }
    return os.str();
}

std::string ScheduleSet::describe() const {
    std::ostringstream os;
    os << "alpha=" << alpha.describe() << ";beta=" << beta.describe()
       << ";gamma=" << gamma.describe();
    if (index_offset != 0) os << ";offset=" << index_offset;
    return os.str();
}

// ---------------------------------------------------------------------------
// Verdict report

bool VerdictReport::pass() const {
    return std::all_of(conditions.begin(), conditions.end(),
                       [](const ConditionResult& c) { return c.pass; });
}

const ConditionResult& VerdictReport::at(const std::string& condition) const {
    for (const auto& c : conditions) {
        if (c.condition == condition) return c;
    }
    throw std::out_of_range(theorem + ": no condition " + condition);
}

std::vector<std::string> VerdictReport::failures() const {
    std::vector<std::string> out;
    for (const auto& c : conditions) {
        if (!c.pass) out.push_back(c.condition);
    }
    return out;
}

std::string to_string(LegacyTheorem which) {
    return which == LegacyTheorem::zhou ? "zhou" : "chai_song";
}

namespace {

constexpr const char* kSymbolic = "asymptotic condition verified symbolically";
constexpr const char* kFinite = "asymptotic condition verified at finite horizon";

// Values of a schedule sequence over the step indices [0, horizon).
struct Window {
    const Sequence& seq;
    std::size_t offset;
    std::size_t horizon;

    double at(std::size_t n) const { return seq(n + offset); }
    std::size_t tail_begin() const {
        return static_cast<std::size_t>(std::floor(static_cast<double>(horizon) * (1.0 - kTailFraction)));
    }
    template <typename F>
    double tail_min(F&& f) const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t n = tail_begin(); n < horizon; ++n) m = std::min(m, f(at(n)));
        return m;
    }
    template <typename F>
    double tail_max(F&& f) const {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t n = tail_begin(); n < horizon; ++n) m = std::max(m, f(at(n)));
        return m;
    }
    double min() const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < horizon; ++n) m = std::min(m, at(n));
        return m;
    }
    double max() const {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t n = 0; n < horizon; ++n) m = std::max(m, at(n));
        return m;
    }
    double partial_sum() const {
        double acc = 0.0;
        for (std::size_t n = 0; n < horizon; ++n) acc += at(n);
        return acc;
    }
    double tail_max_jump() const {
        double m = 0.0;
        for (std::size_t n = std::max<std::size_t>(tail_begin(), 1); n < horizon; ++n) {
            m = std::max(m, std::abs(at(n) - at(n - 1)));
        }
        return m;
    }
    double tail_variation() const {
        double acc = 0.0;
        for (std::size_t n = std::max<std::size_t>(tail_begin(), 1); n < horizon; ++n) {
            acc += std::abs(at(n) - at(n - 1));
        }
        return acc;
    }
};

Window window(const Sequence& s, const ScheduleSet& set, std::size_t horizon) {
    return Window{s, set.index_offset, horizon};
}

ConditionResult check_ranges(const ScheduleSet& s, std::size_t horizon) {
    ConditionResult r{"ranges", true, std::numeric_limits<double>::infinity(), ""};
    std::ostringstream bad;
    for (std::size_t n = 0; n < horizon; ++n) {
        const double a = s.alpha_at(n);
        const double b = s.beta_at(n);
        const double g = s.gamma_at(n);
        r.margin = std::min(r.margin, 1.0 - b - g);
        if (r.pass && !(a >= 0.0 && a <= 1.0 && b > 0.0 && b < 1.0 && g >= 0.0 && g < 1.0 &&
                        b + g < 1.0)) {
            r.pass = false;
            bad << "out of range at n=" << n << " (alpha=" << a << ", beta=" << b
                << ", gamma=" << g << ")";
        }
    }
    r.note = r.pass ? "beta_n in (0,1), gamma_n in [0,1), beta_n + gamma_n < 1 over horizon"
                    : bad.str();
    return r;
}

std::string alpha_zero_note(const ScheduleSet& s, std::size_t horizon) {
    for (std::size_t n = 0; n < horizon; ++n) {
        if (s.alpha_at(n) == 0.0) {
            return "; alpha_n = 0 at n=" + std::to_string(n) +
                   " is allowed by alpha_n in [0, mu] but not by alpha_n in (0,1)";
        }
    }
    return "";
}

// Shared structure of condition (i) for both smoothness variants.
template <typename Margin>
ConditionResult check_step_margin(const ScheduleSet& s, double mu, Margin margin,
                                  std::size_t horizon) {
    ConditionResult r{"(i)", false, 0.0, ""};
    const Window w = window(s.alpha, s, horizon);
    const double lo = w.min();
    const double hi = w.max();
    const bool member = lo >= 0.0 && hi <= mu * (1.0 + 1e-15);
    bool asymptotic = false;
    if (auto lim = s.alpha.limit()) {
        r.margin = std::isfinite(*lim) ? margin(*lim) : -std::numeric_limits<double>::infinity();
        asymptotic = r.margin > 0.0;
        r.note = kSymbolic;
    } else {
        r.margin = w.tail_min(margin);
        asymptotic = r.margin >= kTailMargin;
        r.note = kFinite;
    }
    r.pass = member && asymptotic;
    std::ostringstream os;
    os << r.note << "; alpha_n in [" << lo << ", " << hi << "], mu=" << mu;
    if (!member) os << " (membership fails)";
    r.note = os.str() + alpha_zero_note(s, horizon);
    return r;
}

ConditionResult check_beta(const ScheduleSet& s, std::size_t horizon) {
    ConditionResult r{"(ii)", false, 0.0, ""};
    const Window w = window(s.beta, s, horizon);
    r.margin = w.partial_sum();
    if (auto lim = s.beta.limit()) {
        r.pass = *lim == 0.0 && *s.beta.series_diverges();
        r.note = std::string(kSymbolic) + (r.pass ? "" : (*lim != 0.0 ? "; beta_n does not vanish"
                                                                      : "; sum beta_n converges"));
    } else {
        const bool vanishes = w.tail_max([](double v) { return v; }) <= kVanishingLevel;
        const bool diverges = r.margin >= kDivergenceThreshold;
        r.pass = vanishes && diverges;
        r.note = kFinite;
    }
    return r;
}

ConditionResult check_gamma_limsup(const ScheduleSet& s, std::size_t horizon) {
    ConditionResult r{"(iii)", false, 0.0, ""};
    if (auto lim = s.gamma.limit()) {
        r.margin = 1.0 - *lim;
        r.pass = r.margin > 0.0;
        r.note = kSymbolic;
    } else {
        r.margin = 1.0 - window(s.gamma, s, horizon).tail_max([](double v) { return v; });
        r.pass = r.margin >= kTailMargin;
        r.note = kFinite;
    }
    return r;
}

void require_horizon(std::size_t horizon, std::size_t min) {
    if (horizon < min) throw DomainError("validator: horizon too short");
}

// Legacy (i): alpha_n in [a, mu] for some a in (0, mu).
ConditionResult check_alpha_bounded_below(const ScheduleSet& s, double mu, std::size_t horizon) {
    ConditionResult r{"(i)", false, 0.0, ""};
    const Window w = window(s.alpha, s, horizon);
    double inf = w.min();
    double sup = w.max();
    if (auto lim = s.alpha.limit()) {
        inf = std::min(inf, *lim);
        sup = std::max(sup, *lim);
        r.note = kSymbolic;
    } else {
        r.note = kFinite;
    }
    r.margin = inf;
    r.pass = inf > 0.0 && sup <= mu * (1.0 + 1e-15);
    std::ostringstream os;
    os << r.note << "; inf alpha=" << inf << ", sup alpha=" << sup << ", mu=" << mu;
    r.note = os.str();
    return r;
}

}  // namespace

VerdictReport validate_theorem31(const ScheduleSet& s, double lambda, double K2,
                                 std::size_t horizon) {
    require_horizon(horizon, 1);
    if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("validate_theorem31: lambda in (0,1)");
    if (!(K2 > 0.0)) throw DomainError("validate_theorem31: K2 must be positive");
    const double mu = std::min(1.0, lambda / K2);
    VerdictReport v{"theorem31", {}};
    v.conditions.push_back(check_ranges(s, horizon));
    v.conditions.push_back(check_step_margin(
        s, mu, [&](double a) { return a * (lambda - K2 * a); }, horizon));
    v.conditions.push_back(check_beta(s, horizon));
    v.conditions.push_back(check_gamma_limsup(s, horizon));
    return v;
}

VerdictReport validate_theorem32(const ScheduleSet& s, double lambda, double q, double Cq,
                                 std::size_t horizon) {
    require_horizon(horizon, 1);
    if (!(q > 1.0)) throw DomainError("validate_theorem32: q must exceed 1");
    if (!(Cq > 0.0)) throw DomainError("validate_theorem32: Cq must be positive");
    if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("validate_theorem32: lambda in (0,1)");
    const double mu = std::min(1.0, std::pow(q * lambda / Cq, 1.0 / (q - 1.0)));
    VerdictReport v{"theorem32", {}};
    v.conditions.push_back(check_ranges(s, horizon));
    v.conditions.push_back(check_step_margin(
        s, mu, [&](double a) { return a * (q * lambda - Cq * std::pow(a, q - 1.0)); }, horizon));
    v.conditions.push_back(check_beta(s, horizon));
    v.conditions.push_back(check_gamma_limsup(s, horizon));
    return v;
}

VerdictReport validate_legacy(const ScheduleSet& s, LegacyTheorem which, double lambda, double K2,
                              std::size_t horizon) {
    require_horizon(horizon, 2);
    if (!(lambda > 0.0 && lambda < 1.0)) throw DomainError("validate_legacy: lambda in (0,1)");
    if (!(K2 > 0.0)) throw DomainError("validate_legacy: K2 must be positive");
    const double mu = std::min(1.0, lambda / K2);
    VerdictReport v{to_string(which), {}};
    v.conditions.push_back(check_ranges(s, horizon));

    if (which == LegacyTheorem::zhou) {
        v.conditions.push_back(check_alpha_bounded_below(s, mu, horizon));
        v.conditions.push_back(check_beta(s, horizon));

        ConditionResult iii{"(iii)", true, 0.0, kSymbolic};
        if (!s.alpha.closed_form()) {
            iii.margin = window(s.alpha, s, horizon).tail_max_jump();
            iii.pass = iii.margin <= kTailMargin;
            iii.note = kFinite;
        }
        v.conditions.push_back(iii);

        ConditionResult iv{"(iv)", false, 0.0, ""};
        double lo = 0.0;
        double hi = 0.0;
        if (auto lim = s.gamma.limit()) {
            lo = hi = *lim;
            iv.pass = lo > 0.0 && hi < 1.0;
            iv.note = kSymbolic;
        } else {
            const Window w = window(s.gamma, s, horizon);
            lo = w.tail_min([](double g) { return g; });
            hi = w.tail_max([](double g) { return g; });
            iv.pass = lo >= kTailMargin && hi <= 1.0 - kTailMargin;
            iv.note = kFinite;
        }
        iv.margin = std::min(lo, 1.0 - hi);
        std::ostringstream os;
        os << iv.note << "; liminf gamma=" << lo << ", limsup gamma=" << hi;
        iv.note = os.str();
        v.conditions.push_back(iv);
        return v;
    }

    ConditionResult scheme{"scheme", s.gamma.identically_zero(horizon), 0.0,
                           "requires gamma_n = 0 (two-term scheme)"};
    v.conditions.push_back(scheme);
    v.conditions.push_back(check_alpha_bounded_below(s, mu, horizon));

    ConditionResult ii{"(ii)", true, 0.0, kSymbolic};
    if (!s.alpha.closed_form()) {
        ii.margin = window(s.alpha, s, horizon).tail_variation();
        ii.pass = ii.margin <= kTailMargin;
        ii.note = kFinite;
    }
    v.conditions.push_back(ii);

    ConditionResult iii = check_beta(s, horizon);
    iii.condition = "(iii)";
    if (!s.beta.closed_form()) {
        const double var = window(s.beta, s, horizon).tail_variation();
        iii.pass = iii.pass && var <= kTailMargin;
    }
    v.conditions.push_back(iii);
    return v;
}

}  // namespace mannlab
