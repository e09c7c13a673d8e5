#pragma once

// Multi-attractor search for periodically forced continuous loops: a grid of
// initial states is integrated in stages until each run settles to a cycle
// whose length is a multiple of the forcing period.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <vector>

#include "lurye/simulation.hpp"

namespace lurye {

struct HuntOptions {
    double period = std::numbers::pi;      // forcing period
    std::size_t samples_per_period = 3142;  // RK4 step = period / samples_per_period
    std::size_t stage_periods = 64;
    std::size_t max_periods = 1280;
    int m_max = 3;
    double settle_tol = 1e-7;     // relative residual that ends a run early
    double classify_tol = 1e-4;   // residual accepted at the horizon
    double same_tol = 1e-3;       // relative distance below which two cycles coincide
    std::vector<double> scales{1.0, 10.0, 100.0};
};

/// {0} plus every nonzero direction in {-1,0,1}^n, normalized and scaled.
[[nodiscard]] inline std::vector<std::vector<double>> initial_state_grid(std::size_t n,
                                                                         const std::vector<double>& scales) {
    std::vector<std::vector<double>> out{std::vector<double>(n, 0.0)};
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    for (double s : scales) {
        for (std::size_t code = 0; code < total; ++code) {
            std::vector<double> d(n);
            std::size_t c = code;
            double norm = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                d[i] = static_cast<double>(static_cast<int>(c % 3) - 1);
                c /= 3;
                norm += d[i] * d[i];
            }
            if (norm == 0.0) continue;
            for (double& v : d) v *= s / std::sqrt(norm);
            out.push_back(std::move(d));
        }
    }
    return out;
}

struct HuntRun {
    std::vector<double> x0;
    std::optional<int> multiple;
    double residual = 0.0;
    double horizon = 0.0;    // simulated time
    double amplitude = 0.0;  // max |y2| over the last m_max periods
    double input_peak = 0.0; // max |u2| over the same window
    std::vector<double> y2;  // last m_max periods, one sample per step
    std::optional<std::size_t> attractor;
};

struct Attractor {
    int multiple = 1;
    double amplitude = 0.0;
    double input_peak = 0.0;
    std::vector<double> y2;  // one full cycle (multiple periods)
    std::vector<std::size_t> members;
};

struct HuntResult {
    std::vector<HuntRun> runs;
    std::vector<Attractor> attractors;
    std::size_t unsettled = 0;
    HuntOptions options;
};

namespace detail {

/// max_i |a[i] - b[(i + shift) mod L]| over one cycle of length L.
inline double cycle_distance(const std::vector<double>& a, const std::vector<double>& b, std::size_t L,
                             std::size_t shift, double sign = 1.0) {
    double worst = 0.0;
    for (std::size_t i = 0; i < L; ++i) worst = std::max(worst, std::abs(a[i] - sign * b[(i + shift) % L]));
    return worst;
}

}  // namespace detail

/// Integrates every initial state of the grid with RK4 and clusters the
/// settled cycles. Two cycles are the same attractor when they agree up to a
/// shift by whole forcing periods.
[[nodiscard]] inline HuntResult hunt_attractors(const LuryeSystem& base, const HuntOptions& opt = {}) {
    if (base.plant.domain != Domain::continuous) throw Error(ErrorCode::InvalidArgument, "plant is not continuous");
    if (opt.samples_per_period == 0 || opt.stage_periods == 0 || opt.m_max < 1 ||
        opt.max_periods < opt.stage_periods || opt.stage_periods < static_cast<std::size_t>(opt.m_max) + 1)
        throw Error(ErrorCode::InvalidArgument, "invalid hunt options");
    const std::size_t P = opt.samples_per_period;
    const double h = opt.period / static_cast<double>(P);
    const auto window = static_cast<std::size_t>(opt.m_max + 1) * P;

    HuntResult out;
    out.options = opt;
    for (auto& x0 : initial_state_grid(static_cast<std::size_t>(base.plant.order()), opt.scales)) {
        HuntRun run;
        run.x0 = x0;
        LuryeSystem sys = base;
        sys.x0 = x0;
        sys.t0 = 0.0;
        std::size_t done = 0;
        PeriodResult pr;
        SimulationResult sim;
        while (done < opt.max_periods) {
            const std::size_t stage = std::min(opt.stage_periods, opt.max_periods - done);
            const std::size_t steps = stage * P;
            sim = simulate_continuous_rk4(sys, h, static_cast<double>(steps) * h, {steps - window, 1, false});
            done += stage;
            sys.x0 = sim.final_state;
            sys.t0 = static_cast<double>(done * P) * h;
            pr = detect_period(sim.y2, static_cast<double>(P), opt.m_max, opt.settle_tol, 0.0);
            if (pr.multiple) break;
        }
        run.horizon = static_cast<double>(done * P) * h;
        pr = detect_period(sim.y2, static_cast<double>(P), opt.m_max, opt.classify_tol, 0.0);
        run.multiple = pr.multiple;
        run.residual = pr.residual;
        const std::size_t tail = static_cast<std::size_t>(opt.m_max) * P;
        run.y2.assign(sim.y2.end() - static_cast<std::ptrdiff_t>(tail), sim.y2.end());
        for (std::size_t i = sim.size() - tail; i < sim.size(); ++i) {
            run.amplitude = std::max(run.amplitude, std::abs(sim.y2[i]));
            run.input_peak = std::max(run.input_peak, std::abs(sim.u2[i]));
        }
        out.runs.push_back(std::move(run));
    }

    for (std::size_t r = 0; r < out.runs.size(); ++r) {
        HuntRun& run = out.runs[r];
        if (!run.multiple) {
            ++out.unsettled;
            continue;
        }
        const auto L = static_cast<std::size_t>(*run.multiple) * P;
        for (std::size_t a = 0; a < out.attractors.size() && !run.attractor; ++a) {
            Attractor& att = out.attractors[a];
            if (att.multiple != *run.multiple) continue;
            const double scale = std::max(att.amplitude, run.amplitude);
            for (int s = 0; s < att.multiple; ++s) {
                if (detail::cycle_distance(run.y2, att.y2, L, static_cast<std::size_t>(s) * P) <= opt.same_tol * scale) {
                    run.attractor = a;
                    att.members.push_back(r);
                    break;
                }
            }
        }
        if (!run.attractor) {
            Attractor att;
            att.multiple = *run.multiple;
            att.amplitude = run.amplitude;
            att.input_peak = run.input_peak;
            att.y2.assign(run.y2.begin(), run.y2.begin() + static_cast<std::ptrdiff_t>(L));
            att.members.push_back(r);
            run.attractor = out.attractors.size();
            out.attractors.push_back(std::move(att));
        }
    }
    return out;
}

struct PairRelation {
    double residual = 0.0;  // max_t |y''(t) + y'(t - shift)| / amplitude, minimized over pairs
    std::size_t first = 0;  // attractor of y'
    std::size_t second = 0; // attractor of y''
    std::size_t shift_samples = 0;
};

/// Best agreement with y''(t) = -y'(t - shift) among the cycles of the given
/// multiple, counting every whole-period translate of a cycle as a solution.
[[nodiscard]] inline std::optional<PairRelation> antisymmetric_pair(const HuntResult& hunt, int multiple,
                                                                    std::size_t shift_samples) {
    const std::size_t P = hunt.options.samples_per_period;
    const std::size_t L = static_cast<std::size_t>(multiple) * P;
    std::optional<PairRelation> best;
    for (std::size_t a = 0; a < hunt.attractors.size(); ++a) {
        const Attractor& A = hunt.attractors[a];
        if (A.multiple != multiple) continue;
        for (std::size_t b = 0; b < hunt.attractors.size(); ++b) {
            const Attractor& B = hunt.attractors[b];
            if (B.multiple != multiple) continue;
            const double amp = std::max(A.amplitude, B.amplitude);
            for (int s = 0; s < multiple; ++s) {
                // y'(t - shift) at index i is A[(i - shift + s P) mod L]
                const std::size_t off = (L - shift_samples % L + static_cast<std::size_t>(s) * P) % L;
                const double r = detail::cycle_distance(B.y2, A.y2, L, off, -1.0) / amp;
                if (!best || r < best->residual) best = PairRelation{r, a, b, shift_samples};
            }
        }
    }
    return best;
}

}  // namespace lurye
