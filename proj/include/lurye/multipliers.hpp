#pragma once

// Delay-tap and first-order rational multipliers, class membership checks and
// the positivity counterexample for off-lattice taps.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lurye/error.hpp"
#include "lurye/lti.hpp"

namespace lurye {

enum class MultiplierClass { ozf, ozf_odd, altshuller };

[[nodiscard]] inline std::string to_string(MultiplierClass c) {
    switch (c) {
        case MultiplierClass::ozf: return "ozf";
        case MultiplierClass::ozf_odd: return "ozf_odd";
        case MultiplierClass::altshuller: return "altshuller";
    }
    return "unknown";
}

struct Tap {
    double offset = 0.0;  // seconds (continuous) or samples (discrete); positive is causal
    double coeff = 0.0;

    friend bool operator==(const Tap&, const Tap&) = default;
};

/// m = delta - sum h_n delta(. - t_n). For the Altshuller class `period` is T
/// (continuous) or N (discrete).
struct TapMultiplier {
    Domain domain = Domain::discrete;
    std::vector<Tap> taps;
    MultiplierClass claimed = MultiplierClass::ozf;
    double period = 0.0;

    [[nodiscard]] static TapMultiplier identity(Domain d) { return {d, {}, MultiplierClass::altshuller, 1.0}; }

    /// 1 - sum h e^{-j w t}; negative w is the conjugate of |w|.
    [[nodiscard]] Complex operator()(double w) const {
        const double aw = std::abs(w);
        Complex m{1.0, 0.0};
        for (const Tap& t : taps) m -= t.coeff * std::polar(1.0, -aw * t.offset);
        return w < 0.0 ? std::conj(m) : m;
    }
};

enum class MembershipEvidence { validated_first_order, user_asserted };

[[nodiscard]] inline std::string to_string(MembershipEvidence e) {
    return e == MembershipEvidence::validated_first_order ? "validated_first_order" : "user_asserted";
}

struct RationalMultiplier {
    RationalTransferFunction tf;
    MultiplierClass claimed = MultiplierClass::ozf;
    MembershipEvidence evidence = MembershipEvidence::validated_first_order;

    [[nodiscard]] Complex operator()(double w) const { return tf(w); }
};

using Multiplier = std::variant<TapMultiplier, RationalMultiplier>;

[[nodiscard]] inline Complex multiplier_frequency_response(const Multiplier& m, double w) {
    return std::visit([w](const auto& mm) { return mm(w); }, m);
}

[[nodiscard]] inline Domain domain_of(const Multiplier& m) {
    return std::visit(
        [](const auto& mm) {
            if constexpr (std::is_same_v<std::decay_t<decltype(mm)>, TapMultiplier>)
                return mm.domain;
            else
                return mm.tf.domain();
        },
        m);
}

enum class MembershipStatus { member, not_member, asserted };

[[nodiscard]] inline std::string to_string(MembershipStatus s) {
    switch (s) {
        case MembershipStatus::member: return "member";
        case MembershipStatus::not_member: return "not_member";
        case MembershipStatus::asserted: return "asserted";
    }
    return "unknown";
}

struct MembershipVerdict {
    MembershipStatus status = MembershipStatus::member;
    std::string reason;
    double sum_margin = 1.0;            // 1 - sum of |h| (or h)
    std::optional<double> spacing;      // Altshuller T or N
    bool on_lattice = true;

    [[nodiscard]] bool ok() const noexcept { return status != MembershipStatus::not_member; }
};

namespace detail {

inline constexpr double kStrictSumTol = 1e-12;

/// Nonzero integer n with |offset - n T| <= tol |offset|, if any.
inline std::optional<long long> lattice_index(double offset, double T, double tol) {
    const double q = offset / T;
    const double n = std::round(q);
    if (n == 0.0) return std::nullopt;
    if (std::abs(offset - n * T) > tol * std::abs(offset)) return std::nullopt;
    return static_cast<long long>(n);
}

inline MembershipVerdict reject(std::string reason, double margin = 0.0) {
    MembershipVerdict v;
    v.status = MembershipStatus::not_member;
    v.reason = std::move(reason);
    v.sum_margin = margin;
    return v;
}

}  // namespace detail

[[nodiscard]] inline MembershipVerdict validate_class_membership(const TapMultiplier& m) {
    double sum = 0.0, abs_sum = 0.0;
    bool negative = false;
    for (const Tap& t : m.taps) {
        if (!std::isfinite(t.offset) || !std::isfinite(t.coeff)) return detail::reject("non-finite tap");
        if (t.offset == 0.0) return detail::reject("tap at offset 0");
        if (m.domain == Domain::discrete && t.offset != std::round(t.offset))
            return detail::reject("non-integer offset in a discrete multiplier");
        sum += t.coeff;
        abs_sum += std::abs(t.coeff);
        negative = negative || t.coeff < 0.0;
    }

    if (m.claimed == MultiplierClass::ozf_odd) {
        MembershipVerdict v;
        v.sum_margin = 1.0 - abs_sum;
        if (v.sum_margin <= detail::kStrictSumTol)
            return detail::reject(std::abs(v.sum_margin) <= detail::kStrictSumTol ? "non-strict sum" : "sum of |h| >= 1",
                                  v.sum_margin);
        return v;
    }

    if (negative) return detail::reject("negative coefficient", 1.0 - sum);
    MembershipVerdict v;
    v.sum_margin = 1.0 - sum;
    if (v.sum_margin <= detail::kStrictSumTol)
        return detail::reject(std::abs(v.sum_margin) <= detail::kStrictSumTol ? "non-strict sum" : "sum of h >= 1",
                              v.sum_margin);

    if (m.claimed == MultiplierClass::altshuller) {
        v.spacing = m.period;
        if (!(m.period > 0.0)) {
            if (m.taps.empty()) return v;
            return detail::reject("Altshuller period must be positive", v.sum_margin);
        }
        if (m.domain == Domain::discrete && m.period != std::round(m.period))
            return detail::reject("discrete Altshuller period must be an integer", v.sum_margin);
        for (const Tap& t : m.taps) {
            if (!detail::lattice_index(t.offset, m.period, 1e-12)) {
                auto r = detail::reject("tap off the lattice", v.sum_margin);
                r.spacing = m.period;
                r.on_lattice = false;
                return r;
            }
        }
    }
    return v;
}

[[nodiscard]] inline MembershipVerdict validate_class_membership(const RationalMultiplier& m) {
    const auto& num = m.tf.numerator();
    const auto& den = m.tf.denominator();
    const bool first_order = m.tf.domain() == Domain::continuous && m.tf.num_degree() == 1 && m.tf.den_degree() == 1 &&
                             num.size() == 2 && den.size() == 2;
    if (first_order && num[1] != 0.0 && den[1] != 0.0) {
        const double a = num[0] / num[1];
        const double b = den[0] / den[1];
        const double scale = m.tf.gain() * num[1] / den[1];
        if (scale > 0.0 && b > 0.0 && b < a) {
            MembershipVerdict v;
            v.reason = "first-order lead (1+as)/(1+bs) with 0<b<a";
            v.sum_margin = 1.0 - b / a;
            return v;
        }
    }
    if (m.evidence == MembershipEvidence::user_asserted) {
        MembershipVerdict v;
        v.status = MembershipStatus::asserted;
        v.reason = "membership asserted by user";
        return v;
    }
    return detail::reject("rational multiplier is not a validated first-order lead");
}

[[nodiscard]] inline MembershipVerdict validate_class_membership(const Multiplier& m) {
    return std::visit([](const auto& mm) { return validate_class_membership(mm); }, m);
}

/// True iff every offset sits on {nT : n != 0} within 1e-9 relative and the
/// coefficients are nonnegative with sum < 1.
[[nodiscard]] inline bool altshuller_period_check(const TapMultiplier& m, double T) {
    if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "period must be positive");
    double sum = 0.0;
    for (const Tap& t : m.taps) {
        if (t.coeff < 0.0 || !detail::lattice_index(t.offset, T, 1e-9)) return false;
        sum += t.coeff;
    }
    return sum < 1.0 - detail::kStrictSumTol;
}

/// Periodic gain switch N and square wave input u of period T that make the
/// multiplier's inner product negative, truncated to `periods` periods.
struct PositivityCounterexample {
    double period = 1.0;
    double delta = 0.0;
    std::size_t tap_index = 0;
    double truncation = 0.0;
    int periods = 0;
    double per_period_value = 0.0;  // one period of the untruncated periodic signals
    double inner_product = 0.0;     // exact integral over the truncated signals

    [[nodiscard]] double phase(double t) const {
        const double r = std::fmod(t, period);
        return r < 0.0 ? r + period : r;
    }
    [[nodiscard]] double gain(double t) const { return phase(t) < period / 2 ? 1.0 + delta : 1.0 / (1.0 + delta); }
    [[nodiscard]] double nonlinearity(double t, double x) const { return gain(t) * x; }
    [[nodiscard]] double input(double t) const {
        if (t < 0.0 || t >= truncation) return 0.0;
        return phase(t) < period / 2 ? 1.0 : 1.0 + delta;
    }
    [[nodiscard]] double output(double t) const { return nonlinearity(t, input(t)); }
};

namespace detail {

/// Exact integral of u(t - s) y(t) where both signals are piecewise constant on
/// half-period cells over [0, K T). u cells alternate 1, 1+D; y cells 1+D, 1.
inline double shifted_product_integral(double s, double T, int K, double D) {
    const double half = T / 2.0;
    const long long cells = 2LL * K;
    double total = 0.0;
    for (long long i = 0; i < cells; ++i) {
        const double ua = static_cast<double>(i) * half + s;
        const double ub = ua + half;
        const double uval = (i % 2 == 0) ? 1.0 : 1.0 + D;
        const long long j0 = std::max<long long>(0, static_cast<long long>(std::floor(ua / half)) - 1);
        const long long j1 = std::min<long long>(cells - 1, static_cast<long long>(std::floor(ub / half)) + 1);
        for (long long j = j0; j <= j1; ++j) {
            const double ya = static_cast<double>(j) * half;
            const double overlap = std::min(ub, ya + half) - std::max(ua, ya);
            if (overlap > 0.0) total += uval * ((j % 2 == 0) ? 1.0 + D : 1.0) * overlap;
        }
    }
    return total;
}

}  // namespace detail

[[nodiscard]] inline PositivityCounterexample construct_positivity_counterexample(const TapMultiplier& m, double T) {
    if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "period must be positive");
    TapMultiplier as_ozf = m;
    as_ozf.claimed = MultiplierClass::ozf;
    if (const auto v = validate_class_membership(as_ozf); !v.ok())
        throw Error(ErrorCode::InvalidArgument, "not a valid OZF multiplier: " + v.reason);

    // Pick the off-lattice tap that needs the smallest Delta.
    std::optional<std::size_t> best;
    double best_weight = 0.0;
    std::vector<double> mu(m.taps.size(), 0.0);
    for (std::size_t i = 0; i < m.taps.size(); ++i) {
        const Tap& t = m.taps[i];
        if (t.coeff <= 0.0 || detail::lattice_index(t.offset, T, 1e-9)) continue;
        double tau = std::fmod(t.offset, T);
        if (tau < 0.0) tau += T;
        mu[i] = std::min(tau, T - tau);
        if (t.coeff * mu[i] > best_weight) {
            best_weight = t.coeff * mu[i];
            best = i;
        }
    }
    if (!best) throw Error(ErrorCode::NotACounterexampleCandidate, "every tap lies on the period lattice");

    PositivityCounterexample cx;
    cx.period = T;
    cx.tap_index = *best;
    // Smallest root of w D^2 - T D - T = 0, rounded up to one decimal.
    const double root = (T + std::sqrt(T * T + 4.0 * best_weight * T)) / (2.0 * best_weight);
    double delta = std::ceil(root * 10.0 - 1e-9) / 10.0;
    while (T * (1.0 + delta) - best_weight * delta * delta >= 0.0) delta += 0.1;
    cx.delta = delta;

    double sum_h = 0.0, off_lattice = 0.0;
    for (std::size_t i = 0; i < m.taps.size(); ++i) {
        sum_h += m.taps[i].coeff;
        off_lattice += m.taps[i].coeff * mu[i];
    }
    cx.per_period_value = T * (1.0 + delta) * (1.0 - sum_h) - off_lattice * delta * delta;

    auto truncated_value = [&](int K) {
        double value = detail::shifted_product_integral(0.0, T, K, delta);
        for (const Tap& t : m.taps) value -= t.coeff * detail::shifted_product_integral(t.offset, T, K, delta);
        return value;
    };
    int K = 1;
    double value = truncated_value(K);
    while (value >= 0.0) {
        K *= 2;
        if (K > (1 << 22)) throw Error(ErrorCode::InvalidArgument, "truncation did not produce a negative value");
        value = truncated_value(K);
    }
    cx.periods = K;
    cx.truncation = K * T;
    cx.inner_product = value;
    return cx;
}

}  // namespace lurye
