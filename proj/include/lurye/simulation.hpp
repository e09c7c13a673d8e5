#pragma once

// Time-domain execution of the loop
//   y1 = G u1, u2 = y1 + r2, y2 = phi(t, u2), u1 = r1 - y2
// and the measurements taken on its traces.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "lurye/error.hpp"
#include "lurye/lti.hpp"
#include "lurye/nonlinearity.hpp"
#include "lurye/signals.hpp"

namespace lurye {

struct LuryeSystem {
    StateSpaceRealization plant;
    Nonlinearity phi;
    SignalSpec r1;
    SignalSpec r2;
    std::vector<double> x0;  // state at t0; empty means zero
    double t0 = 0.0;         // start time (sample index for discrete plants)
};

/// What to keep from a run: samples with index >= from, every stride-th one.
/// States are kept only when keep_states is set.
struct RecordOptions {
    std::size_t from = 0;
    std::size_t stride = 1;
    bool keep_states = false;
};

struct SimulationResult {
    Domain domain = Domain::discrete;
    double step = 1.0;
    std::size_t steps = 0;
    std::size_t first_index = 0;
    std::size_t stride = 1;
    std::vector<double> time;
    std::vector<double> y1;
    std::vector<double> y2;
    std::vector<double> u1;
    std::vector<double> u2;
    std::vector<std::vector<double>> states;  // state at each recorded sample, before the update
    std::vector<double> final_state;

    [[nodiscard]] std::size_t size() const noexcept { return time.size(); }
};

namespace detail {

inline std::vector<double> initial_state(const LuryeSystem& sys) {
    const auto n = static_cast<std::size_t>(sys.plant.order());
    if (!sys.plant.consistent()) throw Error(ErrorCode::InvalidArgument, "plant realization has inconsistent sizes");
    if (sys.x0.empty()) return std::vector<double>(n, 0.0);
    if (sys.x0.size() != n) throw Error(ErrorCode::InvalidArgument, "initial state has the wrong dimension");
    return sys.x0;
}

inline void require_explicit(const StateSpaceRealization& p) {
    if (p.D != 0.0) throw Error(ErrorCode::AlgebraicLoop, "plant has direct feedthrough; the loop is implicit");
}

/// Plain row-major copies of the realization for the inner loops.
struct DenseModel {
    std::size_t n = 0;
    std::vector<double> A, B, C;

    explicit DenseModel(const StateSpaceRealization& p) : n(static_cast<std::size_t>(p.order())) {
        A.resize(n * n);
        B.resize(n);
        C.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            B[i] = p.B(static_cast<Eigen::Index>(i));
            C[i] = p.C(static_cast<Eigen::Index>(i));
            for (std::size_t j = 0; j < n; ++j)
                A[i * n + j] = p.A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }

    [[nodiscard]] double output(const double* x) const {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += C[i] * x[i];
        return s;
    }
};

inline void check_finite(const std::vector<double>& x, double t) {
    for (double v : x)
        if (!std::isfinite(v) || std::abs(v) > 1e12)
            throw Error(ErrorCode::NonfiniteState, "state diverged at t=" + std::to_string(t));
}

template <class F>
decltype(auto) with_static_map(const Nonlinearity& phi, F&& f) {
    return std::visit(
        [&](const auto& kind) -> decltype(auto) {
            using K = std::decay_t<decltype(kind)>;
            if constexpr (std::is_same_v<K, Saturation>) {
                const double L = kind.limit;
                return f([L](double, double x) { return std::clamp(x, -L, L); });
            } else if constexpr (std::is_same_v<K, Deadzone>) {
                const double w = kind.width;
                return f([w](double, double x) { return x >= w ? x - w : (x <= -w ? x + w : 0.0); });
            } else if constexpr (std::is_same_v<K, LinearGain>) {
                const double g = kind.gain;
                return f([g](double, double x) { return g * x; });
            } else {
                return f([&phi](double t, double x) { return phi(t, x); });
            }
        },
        phi.kind());
}

}  // namespace detail

/// Exact recursion of the discrete loop for N steps (n = 0 .. N-1).
[[nodiscard]] inline SimulationResult simulate_discrete(const LuryeSystem& sys, std::size_t N,
                                                        const RecordOptions& rec = {}) {
    if (sys.plant.domain != Domain::discrete) throw Error(ErrorCode::InvalidArgument, "plant is not discrete");
    if (N < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be at least one step");
    if (rec.stride < 1) throw Error(ErrorCode::InvalidArgument, "record stride must be positive");
    detail::require_explicit(sys.plant);
    const detail::DenseModel m(sys.plant);
    std::vector<double> x = detail::initial_state(sys), xn(m.n);

    SimulationResult out;
    out.domain = Domain::discrete;
    out.steps = N;
    out.first_index = rec.from;
    out.stride = rec.stride;
    const std::size_t kept = N > rec.from ? (N - rec.from + rec.stride - 1) / rec.stride : 0;
    for (auto* v : {&out.time, &out.y1, &out.y2, &out.u1, &out.u2}) v->reserve(kept);

    detail::with_static_map(sys.phi, [&](auto phi) {
        for (std::size_t k = 0; k < N; ++k) {
            const double t = sys.t0 + static_cast<double>(k);
            const double y1 = m.output(x.data());
            const double u2 = y1 + sys.r2(t);
            const double y2 = phi(t, u2);
            const double u1 = sys.r1(t) - y2;
            if (k >= rec.from && (k - rec.from) % rec.stride == 0) {
                out.time.push_back(t);
                out.y1.push_back(y1);
                out.y2.push_back(y2);
                out.u1.push_back(u1);
                out.u2.push_back(u2);
                if (rec.keep_states) out.states.push_back(x);
            }
            for (std::size_t i = 0; i < m.n; ++i) {
                double s = m.B[i] * u1;
                for (std::size_t j = 0; j < m.n; ++j) s += m.A[i * m.n + j] * x[j];
                xn[i] = s;
            }
            x.swap(xn);
            if ((k & 1023) == 0 || k + 1 == N) detail::check_finite(x, t + 1.0);
        }
        return 0;
    });
    out.final_state = x;
    return out;
}

namespace detail {

/// RK4 loop with the state dimension fixed at compile time when Dim > 0.
template <std::size_t Dim, class Phi>
void rk4_run(const DenseModel& m, Phi phi, const LuryeSystem& sys, double h, std::size_t N, const RecordOptions& rec,
             std::vector<double>& xv, SimulationResult& out) {
    const std::size_t n = Dim > 0 ? Dim : m.n;
    constexpr std::size_t cap = Dim > 0 ? Dim : 1;
    std::array<double, cap> fx{}, f1{}, f2{}, f3{}, f4{}, fs{};
    std::vector<double> dx, d1, d2, d3, d4, ds;
    double *x = fx.data(), *k1 = f1.data(), *k2 = f2.data(), *k3 = f3.data(), *k4 = f4.data(), *xs = fs.data();
    if constexpr (Dim == 0) {
        for (auto* v : {&dx, &d1, &d2, &d3, &d4, &ds}) v->assign(n, 0.0);
        x = dx.data();
        k1 = d1.data();
        k2 = d2.data();
        k3 = d3.data();
        k4 = d4.data();
        xs = ds.data();
    }
    std::copy(xv.begin(), xv.end(), x);
    const double* A = m.A.data();
    const double* B = m.B.data();
    const double* C = m.C.data();
    auto deriv = [&](const double* s, double t, double r1, double r2, double* d) {
        double y1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) y1 += C[i] * s[i];
        const double u1 = r1 - phi(t, y1 + r2);
        for (std::size_t i = 0; i < n; ++i) {
            double acc = B[i] * u1;
            for (std::size_t j = 0; j < n; ++j) acc += A[i * n + j] * s[j];
            d[i] = acc;
        }
    };
    double r1a = sys.r1(sys.t0), r2a = sys.r2(sys.t0);
    for (std::size_t k = 0; k <= N; ++k) {
        const double t = sys.t0 + static_cast<double>(k) * h;
        if (k >= rec.from && (k - rec.from) % rec.stride == 0) {
            double y1 = 0.0;
            for (std::size_t i = 0; i < n; ++i) y1 += C[i] * x[i];
            const double u2 = y1 + r2a;
            const double y2 = phi(t, u2);
            out.time.push_back(t);
            out.y1.push_back(y1);
            out.y2.push_back(y2);
            out.u1.push_back(r1a - y2);
            out.u2.push_back(u2);
            if (rec.keep_states) out.states.emplace_back(x, x + n);
        }
        if (k == N) break;
        const double tm = t + 0.5 * h, te = sys.t0 + static_cast<double>(k + 1) * h;
        const double r1m = sys.r1(tm), r2m = sys.r2(tm), r1e = sys.r1(te), r2e = sys.r2(te);
        deriv(x, t, r1a, r2a, k1);
        for (std::size_t i = 0; i < n; ++i) xs[i] = x[i] + 0.5 * h * k1[i];
        deriv(xs, tm, r1m, r2m, k2);
        for (std::size_t i = 0; i < n; ++i) xs[i] = x[i] + 0.5 * h * k2[i];
        deriv(xs, tm, r1m, r2m, k3);
        for (std::size_t i = 0; i < n; ++i) xs[i] = x[i] + h * k3[i];
        deriv(xs, te, r1e, r2e, k4);
        for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        r1a = r1e;
        r2a = r2e;
        if ((k & 1023) == 0 || k + 1 == N) {
            std::copy(x, x + n, xv.begin());
            check_finite(xv, te);
        }
    }
    std::copy(x, x + n, xv.begin());
}

}  // namespace detail

/// Classical fixed-step RK4 on dx/dt = A x + B u1 with the loop closed at
/// every stage; N = round(T_end / h) steps.
[[nodiscard]] inline SimulationResult simulate_continuous_rk4(const LuryeSystem& sys, double h, double t_end,
                                                              const RecordOptions& rec = {}) {
    if (sys.plant.domain != Domain::continuous) throw Error(ErrorCode::InvalidArgument, "plant is not continuous");
    if (!(h > 0.0) || !(t_end > 0.0)) throw Error(ErrorCode::InvalidArgument, "step and horizon must be positive");
    if (rec.stride < 1) throw Error(ErrorCode::InvalidArgument, "record stride must be positive");
    detail::require_explicit(sys.plant);
    const detail::DenseModel m(sys.plant);
    const auto N = static_cast<std::size_t>(std::llround(t_end / h));
    std::vector<double> x = detail::initial_state(sys);

    SimulationResult out;
    out.domain = Domain::continuous;
    out.step = h;
    out.steps = N;
    out.first_index = rec.from;
    out.stride = rec.stride;
    const std::size_t kept = N + 1 > rec.from ? (N + 1 - rec.from + rec.stride - 1) / rec.stride : 0;
    for (auto* v : {&out.time, &out.y1, &out.y2, &out.u1, &out.u2}) v->reserve(kept);

    detail::with_static_map(sys.phi, [&](auto phi) {
        switch (m.n) {
            case 1: detail::rk4_run<1>(m, phi, sys, h, N, rec, x, out); break;
            case 2: detail::rk4_run<2>(m, phi, sys, h, N, rec, x, out); break;
            case 3: detail::rk4_run<3>(m, phi, sys, h, N, rec, x, out); break;
            case 4: detail::rk4_run<4>(m, phi, sys, h, N, rec, x, out); break;
            default: detail::rk4_run<0>(m, phi, sys, h, N, rec, x, out); break;
        }
        return 0;
    });
    out.final_state = x;
    return out;
}

struct PeriodResult {
    std::optional<int> multiple;
    double residual = 0.0;   // max |y(t + mP) - y(t)| for the reported (or largest tested) multiple
    double amplitude = 0.0;  // max |y| over the test window
};

namespace detail {

/// y at fractional sample index s by linear interpolation.
inline double sample_at(const std::vector<double>& y, double s) {
    const auto i = static_cast<std::size_t>(std::floor(s));
    const double f = s - static_cast<double>(i);
    if (f == 0.0 || i + 1 >= y.size()) return y[std::min(i, y.size() - 1)];
    return y[i] + f * (y[i + 1] - y[i]);
}

}  // namespace detail

/// Smallest m <= m_max with max |y(t + mP) - y(t)| < tol * amplitude after
/// discarding the first `discard` fraction. P is in samples and may be fractional.
[[nodiscard]] inline PeriodResult detect_period(const std::vector<double>& y, double P, int m_max, double tol,
                                                double discard = 0.5) {
    if (!(P > 0.0) || m_max < 1) throw Error(ErrorCode::InvalidArgument, "period and m_max must be positive");
    if (!(discard >= 0.0 && discard < 1.0)) throw Error(ErrorCode::InvalidArgument, "discard must be in [0, 1)");
    const auto start = static_cast<std::size_t>(std::floor(discard * static_cast<double>(y.size())));
    if (y.size() < start + 2 || static_cast<double>(y.size() - 1 - start) <= P)
        throw Error(ErrorCode::WindowTooShort, "test window shorter than one candidate period");
    PeriodResult r;
    for (std::size_t i = start; i < y.size(); ++i) r.amplitude = std::max(r.amplitude, std::abs(y[i]));
    const double last = static_cast<double>(y.size() - 1);
    for (int m = 1; m <= m_max; ++m) {
        const double shift = m * P;
        if (static_cast<double>(start) + shift > last) break;
        double worst = 0.0;
        for (std::size_t i = start; static_cast<double>(i) + shift <= last; ++i)
            worst = std::max(worst, std::abs(detail::sample_at(y, static_cast<double>(i) + shift) - y[i]));
        r.residual = worst;
        if (worst <= tol * r.amplitude) {
            r.multiple = m;
            return r;
        }
    }
    return r;
}

enum class PowerMode { tail_average, period_exact };

/// Power seminorm estimate. period_exact needs the base period P in samples
/// and averages over one detected cycle of the tail.
[[nodiscard]] inline double power_seminorm(const std::vector<double>& y, PowerMode mode = PowerMode::tail_average,
                                           double P = 0.0, int m_max = 64, double tol = 1e-6) {
    if (y.empty()) throw Error(ErrorCode::InvalidArgument, "empty trace");
    if (mode == PowerMode::tail_average) {
        double acc = 0.0, best = 0.0;
        const std::size_t tail = y.size() - y.size() / 4;
        for (std::size_t i = 0; i < y.size(); ++i) {
            acc += y[i] * y[i];
            if (i + 1 >= tail) best = std::max(best, acc / static_cast<double>(i + 1));
        }
        return std::sqrt(best);
    }
    const PeriodResult pr = detect_period(y, P, m_max, tol);
    if (!pr.multiple) throw Error(ErrorCode::NotSettled, "trace has not settled to a periodic cycle");
    const double len = *pr.multiple * P;
    const auto L = static_cast<std::size_t>(std::llround(len));
    if (std::abs(len - static_cast<double>(L)) > 1e-9 || L == 0 || L > y.size())
        throw Error(ErrorCode::InvalidArgument, "exact period average needs an integral period in samples");
    double acc = 0.0;
    for (std::size_t i = y.size() - L; i < y.size(); ++i) acc += y[i] * y[i];
    return std::sqrt(acc / static_cast<double>(L));
}

/// Mean over the trailing `tail` fraction of the trace.
[[nodiscard]] inline double bias_estimate(const std::vector<double>& y, double tail = 0.25) {
    if (y.empty()) throw Error(ErrorCode::InvalidArgument, "empty trace");
    if (!(tail > 0.0 && tail <= 1.0)) throw Error(ErrorCode::InvalidArgument, "tail fraction must be in (0, 1]");
    const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(tail * static_cast<double>(y.size()))));
    double s = 0.0;
    for (std::size_t i = y.size() - count; i < y.size(); ++i) s += y[i];
    return s / static_cast<double>(count);
}

struct LyapunovResult {
    double exponent = 0.0;
    std::size_t steps = 0;
};

/// Two-trajectory estimate: a copy perturbed by d0 along the first state axis
/// after `discard` steps, renormalized to d0 every step.
[[nodiscard]] inline LyapunovResult lyapunov_exponent(const LuryeSystem& sys, std::size_t horizon, double d0 = 1e-8,
                                                      std::size_t discard = 1000) {
    if (sys.plant.domain != Domain::discrete) throw Error(ErrorCode::InvalidArgument, "plant is not discrete");
    if (horizon < 1 || !(d0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "invalid horizon or separation");
    detail::require_explicit(sys.plant);
    const detail::DenseModel m(sys.plant);
    const std::size_t n = m.n;
    if (n == 0) throw Error(ErrorCode::DegenerateSeparation, "plant has no state");
    std::vector<double> x = detail::initial_state(sys), xp(n), tmp(n);

    double sum = 0.0;
    detail::with_static_map(sys.phi, [&](auto phi) {
        auto step = [&](std::vector<double>& s, double t) {
            const double u2 = m.output(s.data()) + sys.r2(t);
            const double u1 = sys.r1(t) - phi(t, u2);
            for (std::size_t i = 0; i < n; ++i) {
                double acc = m.B[i] * u1;
                for (std::size_t j = 0; j < n; ++j) acc += m.A[i * n + j] * s[j];
                tmp[i] = acc;
            }
            s.swap(tmp);
        };
        for (std::size_t k = 0; k < discard; ++k) step(x, sys.t0 + static_cast<double>(k));
        detail::check_finite(x, static_cast<double>(discard));
        xp = x;
        xp[0] += d0;
        for (std::size_t k = discard; k < discard + horizon; ++k) {
            const double t = sys.t0 + static_cast<double>(k);
            step(x, t);
            step(xp, t);
            double d1 = 0.0;
            for (std::size_t i = 0; i < n; ++i) d1 += (xp[i] - x[i]) * (xp[i] - x[i]);
            d1 = std::sqrt(d1);
            if (!(d1 > std::numeric_limits<double>::min()) || !std::isfinite(d1))
                throw Error(ErrorCode::DegenerateSeparation, "trajectory separation collapsed at step " +
                                                                 std::to_string(k));
            sum += std::log(d1 / d0);
            const double scale = d0 / d1;
            for (std::size_t i = 0; i < n; ++i) xp[i] = x[i] + (xp[i] - x[i]) * scale;
            if ((k & 4095) == 0) detail::check_finite(x, t);
        }
        return 0;
    });
    return {sum / static_cast<double>(horizon), horizon};
}

struct Spectrum {
    std::vector<double> magnitude;  // |X_k|, k = 0 .. L-1
    double parseval_residual = 0.0;

    [[nodiscard]] std::size_t length() const noexcept { return magnitude.size(); }
    /// Bin frequency in cycles per sample.
    [[nodiscard]] double frequency(std::size_t k) const {
        return static_cast<double>(k) / static_cast<double>(magnitude.size());
    }
};

/// DFT magnitudes of the last L samples (L a power of two).
[[nodiscard]] inline Spectrum spectrum(const std::vector<double>& y, std::size_t L) {
    if (L == 0 || (L & (L - 1)) != 0) throw Error(ErrorCode::LengthNotPowerOfTwo, "length must be a power of two");
    if (y.size() < L) throw Error(ErrorCode::WindowTooShort, "trace shorter than the transform length");
    std::vector<double> tail(y.end() - static_cast<std::ptrdiff_t>(L), y.end());
    std::vector<std::complex<double>> X;
    Eigen::FFT<double> fft;
    fft.fwd(X, tail);
    Spectrum s;
    s.magnitude.resize(L);
    double time_energy = 0.0, freq_energy = 0.0;
    for (double v : tail) time_energy += v * v;
    for (std::size_t k = 0; k < L; ++k) {
        s.magnitude[k] = std::abs(X[k]);
        freq_energy += std::norm(X[k]);
    }
    freq_energy /= static_cast<double>(L);
    s.parseval_residual = time_energy > 0.0 ? std::abs(freq_energy - time_energy) / time_energy : freq_energy;
    return s;
}

struct PeriodicDecomposition {
    std::vector<double> periodic;  // one period of the per-phase mean
    double periodic_power = 0.0;
    double residual_power = 0.0;
    std::size_t periods = 0;
};

/// Splits y (whole periods from the start) into its per-phase mean and remainder.
[[nodiscard]] inline PeriodicDecomposition decompose_periodic(const std::vector<double>& y, std::size_t period) {
    if (period == 0) throw Error(ErrorCode::InvalidArgument, "period must be positive");
    const std::size_t count = y.size() / period;
    if (count < 100) throw Error(ErrorCode::WindowTooShort, "need at least 100 periods");
    PeriodicDecomposition d;
    d.periods = count;
    d.periodic.assign(period, 0.0);
    for (std::size_t c = 0; c < count; ++c)
        for (std::size_t j = 0; j < period; ++j) d.periodic[j] += y[c * period + j];
    for (double& v : d.periodic) v /= static_cast<double>(count);
    double pp = 0.0, rv = 0.0;
    for (double v : d.periodic) pp += v * v;
    for (std::size_t c = 0; c < count; ++c)
        for (std::size_t j = 0; j < period; ++j) {
            const double r = y[c * period + j] - d.periodic[j];
            rv += r * r;
        }
    d.periodic_power = std::sqrt(pp / static_cast<double>(period));
    d.residual_power = std::sqrt(rv / static_cast<double>(count * period));
    return d;
}

}  // namespace lurye
