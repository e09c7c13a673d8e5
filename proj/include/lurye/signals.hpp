#pragma once

// Deterministic exogenous signals r1, r2.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lurye/error.hpp"

namespace lurye {

/// SplitMix64 finalizer; used as a counter-based generator.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Uniform in [0, 1) from (seed, index).
[[nodiscard]] constexpr double hashed_uniform(std::uint64_t seed, std::uint64_t index) noexcept {
    return static_cast<double>(splitmix64(splitmix64(seed) ^ index) >> 11) * 0x1.0p-53;
}

struct SignalSpec {
    enum class Kind { zero, constant, step, sinusoid, periodic_table, sum, noise };

    Kind kind = Kind::zero;
    double value = 0.0;      // constant level or step height
    double start = 0.0;      // step time
    double amplitude = 0.0;  // sinusoid
    double frequency = 0.0;  // rad per time unit
    double phase = 0.0;
    std::vector<double> samples;  // periodic table, samples[n mod P]
    double sample_time = 1.0;     // table / noise hold time
    std::vector<SignalSpec> terms;
    std::uint64_t seed = 0;
    double power = 0.0;  // mean square of the noise

    [[nodiscard]] static SignalSpec zero() { return {}; }
    [[nodiscard]] static SignalSpec constant(double c) {
        SignalSpec s;
        s.kind = Kind::constant;
        s.value = c;
        return s;
    }
    [[nodiscard]] static SignalSpec step(double c, double t0 = 0.0) {
        SignalSpec s;
        s.kind = Kind::step;
        s.value = c;
        s.start = t0;
        return s;
    }
    [[nodiscard]] static SignalSpec sinusoid(double amp, double w, double ph = 0.0) {
        SignalSpec s;
        s.kind = Kind::sinusoid;
        s.amplitude = amp;
        s.frequency = w;
        s.phase = ph;
        return s;
    }
    [[nodiscard]] static SignalSpec periodic_table(std::vector<double> table, double dt = 1.0) {
        if (table.empty()) throw Error(ErrorCode::InvalidArgument, "periodic table needs at least one sample");
        if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample time must be positive");
        SignalSpec s;
        s.kind = Kind::periodic_table;
        s.samples = std::move(table);
        s.sample_time = dt;
        return s;
    }
    [[nodiscard]] static SignalSpec sum(std::vector<SignalSpec> parts) {
        SignalSpec s;
        s.kind = Kind::sum;
        s.terms = std::move(parts);
        return s;
    }
    /// Zero-mean uniform noise of mean square `pow`, held for `dt`.
    [[nodiscard]] static SignalSpec noise(std::uint64_t seed, double pow, double dt = 1.0) {
        if (!(pow >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise power must be nonnegative");
        if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample time must be positive");
        SignalSpec s;
        s.kind = Kind::noise;
        s.seed = seed;
        s.power = pow;
        s.sample_time = dt;
        return s;
    }

    [[nodiscard]] double operator()(double t) const {
        switch (kind) {
            case Kind::zero: return 0.0;
            case Kind::constant: return value;
            case Kind::step: return t >= start ? value : 0.0;
            case Kind::sinusoid: return amplitude * std::sin(frequency * t + phase);
            case Kind::periodic_table: {
                const auto n = static_cast<long long>(std::floor(t / sample_time + 1e-9));
                const auto p = static_cast<long long>(samples.size());
                return samples[static_cast<std::size_t>(((n % p) + p) % p)];
            }
            case Kind::sum: {
                double acc = 0.0;
                for (const auto& s : terms) acc += s(t);
                return acc;
            }
            case Kind::noise: {
                const auto n = static_cast<long long>(std::floor(t / sample_time + 1e-9));
                const double u = hashed_uniform(seed, static_cast<std::uint64_t>(n));
                return std::sqrt(3.0 * power) * (2.0 * u - 1.0);
            }
        }
        return 0.0;
    }

    [[nodiscard]] bool is_zero() const {
        switch (kind) {
            case Kind::zero: return true;
            case Kind::constant:
            case Kind::step: return value == 0.0;
            case Kind::sinusoid: return amplitude == 0.0;
            case Kind::noise: return power == 0.0;
            case Kind::periodic_table:
                for (double v : samples)
                    if (v != 0.0) return false;
                return true;
            case Kind::sum:
                for (const auto& s : terms)
                    if (!s.is_zero()) return false;
                return true;
        }
        return false;
    }

    [[nodiscard]] std::string name() const {
        static constexpr const char* names[] = {"zero",           "constant", "step", "sinusoid",
                                                "periodic_table", "sum",      "noise"};
        return names[static_cast<int>(kind)];
    }
};

}  // namespace lurye
