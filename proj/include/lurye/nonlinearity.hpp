#pragma once

// Memoryless, possibly periodically time-varying, slope-restricted maps.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "lurye/error.hpp"

namespace lurye {

struct Saturation {
    double limit = 1.0;
};

struct Deadzone {
    double width = 0.0;
};

struct LinearGain {
    double gain = 1.0;
};

/// Linear interpolation through (x[i], y[i]); the end segments extend.
struct PiecewiseLinear {
    std::vector<double> x;
    std::vector<double> y;
};

using StaticMap = std::variant<Saturation, Deadzone, LinearGain, PiecewiseLinear>;

/// x -> gains[i] x on the i-th of gains.size() equal slots of each period.
struct PeriodicGainSwitch {
    double period = 1.0;
    std::vector<double> gains;
};

/// Deviation map x -> Q(x + c(t)) - Q(c(t)) with c a periodic table sampled
/// every `sample_time`.
struct PeriodicOffset {
    StaticMap base;
    std::vector<double> offsets;
    double sample_time = 1.0;
};

namespace detail {

inline double eval_static(const StaticMap& q, double x) {
    return std::visit(
        [x](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Saturation>) {
                return std::clamp(x, -m.limit, m.limit);
            } else if constexpr (std::is_same_v<T, Deadzone>) {
                if (x <= -m.width) return x + m.width;
                if (x >= m.width) return x - m.width;
                return 0.0;
            } else if constexpr (std::is_same_v<T, LinearGain>) {
                return m.gain * x;
            } else {
                const auto& xs = m.x;
                const auto& ys = m.y;
                if (xs.size() == 1) return ys[0];
                auto it = std::upper_bound(xs.begin(), xs.end(), x);
                std::size_t i = static_cast<std::size_t>(it - xs.begin());
                i = std::clamp<std::size_t>(i, 1, xs.size() - 1);
                const double s = (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
                return ys[i - 1] + s * (x - xs[i - 1]);
            }
        },
        q);
}

inline std::vector<double> static_slopes(const StaticMap& q) {
    return std::visit(
        [](const auto& m) -> std::vector<double> {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Saturation>) {
                return {0.0, 1.0};
            } else if constexpr (std::is_same_v<T, Deadzone>) {
                return {0.0, 1.0};
            } else if constexpr (std::is_same_v<T, LinearGain>) {
                return {m.gain};
            } else {
                std::vector<double> s;
                for (std::size_t i = 1; i < m.x.size(); ++i) s.push_back((m.y[i] - m.y[i - 1]) / (m.x[i] - m.x[i - 1]));
                if (s.empty()) s.push_back(0.0);
                return s;
            }
        },
        q);
}

inline bool static_is_odd(const StaticMap& q) {
    return std::visit(
        [](const auto& m) -> bool {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, PiecewiseLinear>) {
                for (std::size_t i = 0; i < m.x.size(); ++i)
                    if (std::abs(eval_static(StaticMap{m}, -m.x[i]) + m.y[i]) > 1e-12) return false;
                return std::abs(eval_static(StaticMap{m}, 0.0)) <= 1e-12;
            } else {
                return true;
            }
        },
        q);
}

inline void validate_static(const StaticMap& q) {
    if (const auto* s = std::get_if<Saturation>(&q); s && !(s->limit > 0.0))
        throw Error(ErrorCode::InvalidArgument, "saturation limit must be positive");
    if (const auto* d = std::get_if<Deadzone>(&q); d && !(d->width >= 0.0))
        throw Error(ErrorCode::InvalidArgument, "deadzone width must be nonnegative");
    if (const auto* p = std::get_if<PiecewiseLinear>(&q)) {
        if (p->x.empty() || p->x.size() != p->y.size())
            throw Error(ErrorCode::InvalidArgument, "piecewise-linear map needs matching nonempty breakpoints");
        for (std::size_t i = 1; i < p->x.size(); ++i)
            if (!(p->x[i] > p->x[i - 1]))
                throw Error(ErrorCode::InvalidArgument, "piecewise-linear breakpoints must increase");
    }
}

}  // namespace detail

class Nonlinearity {
public:
    using Kind = std::variant<Saturation, Deadzone, LinearGain, PiecewiseLinear, PeriodicGainSwitch, PeriodicOffset>;

    Nonlinearity() : kind_(LinearGain{0.0}) {}

    template <class K>
        requires std::is_constructible_v<Kind, K>
    Nonlinearity(K k) : kind_(std::move(k)) {  // NOLINT(google-explicit-constructor)
        validate();
    }

    [[nodiscard]] static Nonlinearity zero() { return Nonlinearity(LinearGain{0.0}); }

    [[nodiscard]] const Kind& kind() const noexcept { return kind_; }

    [[nodiscard]] double operator()(double t, double x) const {
        return std::visit(
            [t, x](const auto& m) -> double {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, PeriodicGainSwitch>) {
                    double r = std::fmod(t, m.period);
                    if (r < 0.0) r += m.period;
                    auto slot = static_cast<std::size_t>(r / m.period * static_cast<double>(m.gains.size()));
                    slot = std::min(slot, m.gains.size() - 1);
                    return m.gains[slot] * x;
                } else if constexpr (std::is_same_v<T, PeriodicOffset>) {
                    const auto n = static_cast<long long>(std::floor(t / m.sample_time + 1e-9));
                    const auto p = static_cast<long long>(m.offsets.size());
                    const double c = m.offsets[static_cast<std::size_t>(((n % p) + p) % p)];
                    return detail::eval_static(m.base, x + c) - detail::eval_static(m.base, c);
                } else {
                    return detail::eval_static(StaticMap{m}, x);
                }
            },
            kind_);
    }

    /// Time-invariant evaluation (t = 0).
    [[nodiscard]] double operator()(double x) const { return (*this)(0.0, x); }

    [[nodiscard]] bool time_varying() const {
        return std::holds_alternative<PeriodicGainSwitch>(kind_) || std::holds_alternative<PeriodicOffset>(kind_);
    }

    /// Period in time units, 0 for static maps.
    [[nodiscard]] double period() const {
        if (const auto* g = std::get_if<PeriodicGainSwitch>(&kind_)) return g->period;
        if (const auto* o = std::get_if<PeriodicOffset>(&kind_))
            return o->sample_time * static_cast<double>(o->offsets.size());
        return 0.0;
    }

    [[nodiscard]] double min_slope() const {
        const auto s = slopes();
        return *std::min_element(s.begin(), s.end());
    }

    /// Upper slope bound k.
    [[nodiscard]] double slope_bound() const {
        const auto s = slopes();
        return *std::max_element(s.begin(), s.end());
    }

    [[nodiscard]] bool is_monotone() const { return min_slope() >= 0.0; }

    [[nodiscard]] bool is_odd() const {
        if (const auto* o = std::get_if<PeriodicOffset>(&kind_)) {
            return std::all_of(o->offsets.begin(), o->offsets.end(), [](double c) { return c == 0.0; }) &&
                   detail::static_is_odd(o->base);
        }
        if (std::holds_alternative<PeriodicGainSwitch>(kind_)) return true;
        return std::visit(
            [](const auto& m) -> bool {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, PeriodicGainSwitch> || std::is_same_v<T, PeriodicOffset>)
                    return true;
                else
                    return detail::static_is_odd(StaticMap{m});
            },
            kind_);
    }

    [[nodiscard]] std::string name() const {
        static constexpr const char* names[] = {"saturation", "deadzone", "linear", "piecewise_linear",
                                                "periodic_gain_switch", "periodic_offset"};
        return names[kind_.index()];
    }

private:
    [[nodiscard]] std::vector<double> slopes() const {
        return std::visit(
            [](const auto& m) -> std::vector<double> {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, PeriodicGainSwitch>)
                    return m.gains;
                else if constexpr (std::is_same_v<T, PeriodicOffset>)
                    return detail::static_slopes(m.base);
                else
                    return detail::static_slopes(StaticMap{m});
            },
            kind_);
    }

    void validate() const {
        std::visit(
            [](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, PeriodicGainSwitch>) {
                    if (!(m.period > 0.0) || m.gains.empty())
                        throw Error(ErrorCode::InvalidArgument, "gain switch needs a positive period and gains");
                } else if constexpr (std::is_same_v<T, PeriodicOffset>) {
                    detail::validate_static(m.base);
                    if (m.offsets.empty() || !(m.sample_time > 0.0))
                        throw Error(ErrorCode::InvalidArgument, "offset table needs samples and a positive step");
                } else {
                    detail::validate_static(StaticMap{m});
                }
            },
            kind_);
    }

    Kind kind_;
};

}  // namespace lurye
