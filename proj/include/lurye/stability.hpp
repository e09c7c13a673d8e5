#pragma once

// Frequency-domain certificates for the loop y1 = G u1, y2 = phi(u2).

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "lurye/error.hpp"
#include "lurye/lp.hpp"
#include "lurye/lti.hpp"
#include "lurye/multipliers.hpp"
#include "lurye/nonlinearity.hpp"

namespace lurye {

inline constexpr double kSuitabilityTol = 1e-6;
inline constexpr double kInfiniteSlope = std::numeric_limits<double>::infinity();

[[nodiscard]] inline double inverse_slope(double k) {
    if (!(k > 0.0)) throw Error(ErrorCode::InvalidArgument, "slope bound k must be positive");
    return std::isinf(k) ? 0.0 : 1.0 / k;
}

struct GridInfo {
    Domain domain = Domain::discrete;
    std::size_t points = 0;
    double base_density = 0.0;
    double refinement_factor = 1.0;
    std::size_t refined_intervals = 0;
};

[[nodiscard]] inline GridInfo info_of(const FrequencyGrid& g) {
    return {g.domain, g.points.size(), g.base_density, g.refinement_factor, g.refined_intervals};
}

enum class Table1Variant { printed, eq21 };
enum class LpScaling { lattice, printed };

struct AnalysisOptions {
    std::optional<FrequencyGrid> grid;  // default grid of the plant's domain when empty
    double eps_tol = kSuitabilityTol;
    Table1Variant variant = Table1Variant::printed;
    bool refine = true;  // golden-section polishing of grid extrema
};

struct Extremum {
    double value = 0.0;
    double w = 0.0;
};

namespace detail {

/// Golden-section search for a maximum of f on [a, b].
template <class F>
Extremum golden_max(F&& f, double a, double b) {
    constexpr double inv_phi = 0.6180339887498949;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200; ++it) {
        if (b - a <= 1e-12 * std::max({std::abs(a), std::abs(b), 1e-300})) break;
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return fc >= fd ? Extremum{fc, c} : Extremum{fd, d};
}

}  // namespace detail

/// Maximum of f over the grid, each local maximum polished by golden-section
/// search inside its neighbouring grid cells.
template <class F>
[[nodiscard]] Extremum grid_sup(const std::vector<double>& pts, F&& f, bool refine = true) {
    if (pts.empty()) throw Error(ErrorCode::InvalidArgument, "empty frequency grid");
    std::vector<double> v(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) v[i] = f(pts[i]);
    Extremum best{v[0], pts[0]};
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (v[i] > best.value) best = {v[i], pts[i]};
    if (!refine || pts.size() < 2) return best;
    const std::size_t last = pts.size() - 1;
    for (std::size_t i = 0; i <= last; ++i) {
        const double left = i > 0 ? v[i - 1] : -std::numeric_limits<double>::infinity();
        const double right = i < last ? v[i + 1] : -std::numeric_limits<double>::infinity();
        if (!(v[i] >= left && v[i] >= right && (v[i] > left || v[i] > right))) continue;
        const double a = pts[i > 0 ? i - 1 : 0];
        const double b = pts[i < last ? i + 1 : last];
        const Extremum e = detail::golden_max(f, a, b);
        if (e.value > best.value) best = e;
    }
    return best;
}

template <class F>
[[nodiscard]] Extremum grid_inf(const std::vector<double>& pts, F&& f, bool refine = true) {
    Extremum e = grid_sup(pts, [&f](double w) { return -f(w); }, refine);
    e.value = -e.value;
    return e;
}

namespace detail {

inline void require_stable(const RationalTransferFunction& G) {
    const auto st = is_stable(G);
    if (!st.stable()) throw Error(ErrorCode::UnstablePlant, "plant is " + to_string(st.verdict));
}

inline void require_same_domain(const Multiplier& M, const RationalTransferFunction& G) {
    if (domain_of(M) != G.domain()) throw Error(ErrorCode::InvalidArgument, "multiplier and plant domains differ");
}

inline FrequencyGrid analysis_grid(const AnalysisOptions& opt, Domain d, const std::function<Complex(double)>& fn) {
    if (opt.grid) {
        if (opt.grid->domain != d) throw Error(ErrorCode::InvalidArgument, "grid domain differs from plant domain");
        if (opt.grid->points.empty()) throw Error(ErrorCode::InvalidArgument, "empty frequency grid");
        return *opt.grid;
    }
    return refine_by_phase(default_grid(d), fn);
}

}  // namespace detail

struct SuitabilityResult {
    double margin = 0.0;
    double argmin_w = 0.0;
    bool suitable = false;
    double eps_tol = kSuitabilityTol;
    GridInfo grid;
};

/// min over the grid of Re{M(w) (1/k + G(w))}.
[[nodiscard]] inline SuitabilityResult suitability_margin(const Multiplier& M, const RationalTransferFunction& G,
                                                          double k, const AnalysisOptions& opt = {}) {
    detail::require_same_domain(M, G);
    detail::require_stable(G);
    const double ik = inverse_slope(k);
    auto prod = [&](double w) { return multiplier_frequency_response(M, w) * (ik + G(w)); };
    const FrequencyGrid grid = detail::analysis_grid(opt, G.domain(), prod);
    const Extremum e = grid_inf(grid.points, [&](double w) { return prod(w).real(); }, opt.refine);
    SuitabilityResult r;
    r.margin = e.value;
    r.argmin_w = e.w;
    r.eps_tol = opt.eps_tol;
    r.suitable = e.value > opt.eps_tol;
    r.grid = info_of(grid);
    return r;
}

enum class Source { r1, r2 };
enum class Target { u1, u2, y1, y2 };

struct Channel {
    Source source = Source::r2;
    Target target = Target::y2;

    friend bool operator==(const Channel&, const Channel&) = default;

    [[nodiscard]] bool quadratic() const {
        if (source == Source::r1) return target != Target::y2;
        return target == Target::u2;
    }
};

[[nodiscard]] inline std::string to_string(Channel c) {
    static constexpr const char* targets[] = {"u1", "u2", "y1", "y2"};
    return std::string(c.source == Source::r1 ? "r1" : "r2") + "->" + targets[static_cast<int>(c.target)];
}

[[nodiscard]] inline Channel parse_channel(const std::string& s) {
    for (Source src : {Source::r1, Source::r2})
        for (Target t : {Target::u1, Target::u2, Target::y1, Target::y2})
            if (to_string(Channel{src, t}) == s) return {src, t};
    throw Error(ErrorCode::InvalidArgument, "unknown channel '" + s + "' (expected e.g. r2->y2)");
}

[[nodiscard]] inline std::vector<Channel> all_channels() {
    std::vector<Channel> out;
    for (Source src : {Source::r1, Source::r2})
        for (Target t : {Target::u1, Target::u2, Target::y1, Target::y2}) out.push_back({src, t});
    return out;
}

/// Per-frequency terms of a channel: a h^2 - b h - c = 0 for quadratic
/// channels, h = b / a for the closed-form ones.
struct ChannelTerms {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    bool quadratic = false;

    [[nodiscard]] double value() const {
        if (!quadratic) return b / a;
        const double disc = b * b + 4.0 * a * c;
        if (disc < 0.0) throw Error(ErrorCode::NegativeDiscriminant, "negative discriminant in gain quadratic");
        return (b + std::sqrt(disc)) / (2.0 * a);
    }
    [[nodiscard]] double residual(double h) const { return a * h * h - b * h - c; }
};

[[nodiscard]] inline ChannelTerms channel_terms(Channel ch, Complex M, Complex G, double ik,
                                                Table1Variant variant = Table1Variant::printed) {
    ChannelTerms t;
    t.a = 2.0 * (M * (G + ik)).real();
    t.quadratic = ch.quadratic();
    const double m2 = std::norm(M), g2 = std::norm(G), mg2 = std::norm(M * G);
    const double re_mk = M.real() * ik;
    if (!t.quadratic) {
        if (ch.target == Target::y2)
            t.b = ch.source == Source::r2 ? 1.0 + m2 : 1.0 + mg2;
        else if (ch.target == Target::y1)
            t.b = g2 + m2;
        else
            t.b = 1.0 + m2;
        return t;
    }
    if (ch.source == Source::r1 && ch.target == Target::u1) {
        t.b = 1.0 + mg2;
        t.c = 2.0 * re_mk;
    } else if (ch.source == Source::r1) {
        t.b = g2 * (1.0 + m2);
        t.c = g2 * 2.0 * re_mk;
    } else {
        t.b = g2 + m2;
        t.c = variant == Table1Variant::printed ? re_mk : 2.0 * re_mk;
    }
    return t;
}

struct GainBoundReport {
    Channel channel;
    double bound = 0.0;
    double argmax_w = 0.0;
    double k = 1.0;
    double floor = 0.0;
    bool floor_active = false;
    double margin = 0.0;
    Table1Variant variant = Table1Variant::printed;
    bool variant_sensitive = false;  // r2->u2 differs between the two forms of its constant term
    GridInfo grid;
};

[[nodiscard]] inline GainBoundReport gain_bound(const Multiplier& M, const RationalTransferFunction& G, double k,
                                                Channel channel, const AnalysisOptions& opt = {}) {
    detail::require_same_domain(M, G);
    detail::require_stable(G);
    const double ik = inverse_slope(k);
    auto prod = [&](double w) { return multiplier_frequency_response(M, w) * (ik + G(w)); };
    const FrequencyGrid grid = detail::analysis_grid(opt, G.domain(), prod);

    AnalysisOptions fixed = opt;
    fixed.grid = grid;
    const SuitabilityResult s = suitability_margin(M, G, k, fixed);
    if (!s.suitable)
        throw Error(ErrorCode::NotSuitable, "multiplier is not suitable (margin " + std::to_string(s.margin) + ")");

    GainBoundReport r;
    r.channel = channel;
    r.k = k;
    r.margin = s.margin;
    r.variant = opt.variant;
    r.variant_sensitive = channel == Channel{Source::r2, Target::u2};
    r.grid = info_of(grid);
    if (channel.quadratic()) {
        if (channel.source == Source::r1 && channel.target != Target::u1)
            r.floor = grid_sup(grid.points, [&](double w) { return std::norm(G(w)); }, opt.refine).value;
        else
            r.floor = 1.0;
    }
    auto h = [&](double w) {
        const double v = channel_terms(channel, multiplier_frequency_response(M, w), G(w), ik, opt.variant).value();
        return std::max(v, r.floor);
    };
    const Extremum e = grid_sup(grid.points, h, opt.refine);
    r.bound = e.value;
    r.argmax_w = e.w;
    r.floor_active = channel.quadratic() && e.value <= r.floor;
    return r;
}

struct CircleResult {
    SuitabilityResult suitability;
    bool passes = false;
};

[[nodiscard]] inline CircleResult circle_criterion(const RationalTransferFunction& G, double k,
                                                   const AnalysisOptions& opt = {}) {
    CircleResult r;
    r.suitability = suitability_margin(TapMultiplier::identity(G.domain()), G, k, opt);
    r.passes = r.suitability.suitable;
    return r;
}

struct CriticalGain {
    double value = 0.0;    // bisected to 1e-4 or better
    double rounded = 0.0;  // to two decimals
    bool unbounded = false;
};

namespace detail {

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

/// Largest g in (lo, hi] where pass(g) holds, assuming pass(lo) and a single
/// switch; hi is doubled until pass fails.
template <class P>
CriticalGain bisect_threshold(P&& pass, double lo, double hi, double tol = 1e-6) {
    CriticalGain out;
    while (pass(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) {
            out.unbounded = true;
            out.value = out.rounded = std::numeric_limits<double>::infinity();
            return out;
        }
    }
    while (hi - lo > tol * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        (pass(mid) ? lo : hi) = mid;
    }
    out.value = 0.5 * (lo + hi);
    out.rounded = round2(out.value);
    return out;
}

}  // namespace detail

/// Largest gain scale g for which the identity multiplier keeps a positive margin.
[[nodiscard]] inline CriticalGain circle_critical_gain(const RationalTransferFunction& G, double k,
                                                       const AnalysisOptions& opt = {}) {
    detail::require_stable(G);
    const double ik = inverse_slope(k);
    const FrequencyGrid grid = opt.grid ? *opt.grid : refine_by_phase(default_grid(G.domain()), [&](double w) {
        return G.with_gain(1.0)(w);
    });
    const RationalTransferFunction G1 = G.with_gain(1.0);
    auto pass = [&](double g) {
        return grid_inf(grid.points, [&](double w) { return ik + g * G1(w).real(); }, opt.refine).value > 0.0;
    };
    if (!pass(1e-12)) return {0.0, 0.0, false};
    return detail::bisect_threshold(pass, 1e-12, 1.0);
}

/// Unwrapped phase of a frequency response over the whole real line, built
/// from a grid on [0, w_max] (continuous) or [0, pi] (discrete).
class PhaseProfile {
public:
    PhaseProfile(std::function<Complex(double)> fn, const FrequencyGrid& grid)
        : fn_(std::move(fn)), domain_(grid.domain), pts_(grid.points) {
        if (pts_.empty()) throw Error(ErrorCode::InvalidArgument, "empty frequency grid");
        if (pts_.front() != 0.0) pts_.insert(pts_.begin(), 0.0);
        if (domain_ == Domain::discrete && pts_.back() < std::numbers::pi) pts_.push_back(std::numbers::pi);
        values_.resize(pts_.size());
        phase_.resize(pts_.size());
        values_[0] = fn_(pts_[0]);
        phase_[0] = std::arg(values_[0]);
        for (std::size_t i = 1; i < pts_.size(); ++i) {
            values_[i] = fn_(pts_[i]);
            phase_[i] = phase_[i - 1] + std::arg(values_[i] / values_[i - 1]);
        }
    }

    [[nodiscard]] double at(double w) const {
        if (w < 0.0) return 2.0 * phase_[0] - at(-w);
        if (domain_ == Domain::discrete) {
            const double two_pi = 2.0 * std::numbers::pi;
            const double q = std::floor(w / two_pi);
            double r = w - q * two_pi;
            const double winding = 2.0 * (phase_.back() - phase_.front());
            double base = q * winding;
            if (r > std::numbers::pi) return base + 2.0 * phase_.back() - local(two_pi - r);
            return base + local(r);
        }
        return local(w);
    }

    [[nodiscard]] Complex value(double w) const { return fn_(w); }
    [[nodiscard]] const std::vector<double>& points() const noexcept { return pts_; }
    [[nodiscard]] const std::vector<double>& phases() const noexcept { return phase_; }

private:
    [[nodiscard]] double local(double w) const {
        auto it = std::upper_bound(pts_.begin(), pts_.end(), w);
        const std::size_t i = it == pts_.begin() ? 0 : static_cast<std::size_t>(it - pts_.begin()) - 1;
        if (w == pts_[i]) return phase_[i];
        return phase_[i] + std::arg(fn_(w) / values_[i]);
    }

    std::function<Complex(double)> fn_;
    Domain domain_;
    std::vector<double> pts_;
    std::vector<Complex> values_;
    std::vector<double> phase_;
};

enum class PhaseTest { gap, lp, rational, all_periods };

[[nodiscard]] inline std::string to_string(PhaseTest t) {
    switch (t) {
        case PhaseTest::gap: return "gap";
        case PhaseTest::lp: return "lp";
        case PhaseTest::rational: return "rational";
        case PhaseTest::all_periods: return "all_periods";
    }
    return "unknown";
}

struct PhaseLimitWitness {
    PhaseTest test = PhaseTest::gap;
    double period = 0.0;  // T (continuous) or N (discrete)
    int n = 0;
    int a = 0;
    int b = 0;
    int beta = 0;
    std::vector<int> p_r;
    std::vector<int> n_r;
    std::vector<double> lambda;
    std::vector<double> frequencies;
    double value = 0.0;  // the violating quantity
    double bound = 0.0;  // the limit it exceeds
};

namespace detail {

inline std::function<Complex(double)> shifted(const RationalTransferFunction& G, double ik) {
    return [G, ik](double w) { return ik + G(w); };
}

}  // namespace detail

/// First (w, n) on the grid (mirrored to negative w) with
/// |phase(w) - phase(w + 2 n pi / T)| > pi.
[[nodiscard]] inline std::optional<PhaseLimitWitness> phase_gap_test(const RationalTransferFunction& G, double T,
                                                                     int n_max = 10, double k = kInfiniteSlope,
                                                                     const AnalysisOptions& opt = {}) {
    if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "period must be positive");
    const auto fn = detail::shifted(G, inverse_slope(k));
    const FrequencyGrid grid = detail::analysis_grid(opt, G.domain(), fn);
    const PhaseProfile prof(fn, grid);
    const double step = 2.0 * std::numbers::pi / T;
    const double w_top = prof.points().back();
    std::vector<double> bases;
    bases.reserve(2 * grid.points.size());
    for (auto it = grid.points.rbegin(); it != grid.points.rend(); ++it)
        if (*it > 0.0) bases.push_back(-*it);
    bases.insert(bases.end(), grid.points.begin(), grid.points.end());
    for (double w : bases) {
        const double pw = prof.at(w);
        for (int n = 1; n <= n_max; ++n) {
            const double w2 = w + n * step;
            if (G.domain() == Domain::continuous && std::abs(w2) > w_top) break;
            const double gap = pw - prof.at(w2);
            if (std::abs(gap) > std::numbers::pi + 1e-9) {
                PhaseLimitWitness wit;
                wit.test = PhaseTest::gap;
                wit.period = T;
                wit.n = n;
                wit.frequencies = {w, w2};
                wit.value = std::abs(gap);
                wit.bound = std::numbers::pi;
                return wit;
            }
        }
    }
    return std::nullopt;
}

/// Single-frequency test at w = (a/b)(2 pi / T) for coprime a, b.
[[nodiscard]] inline std::vector<PhaseLimitWitness> rational_phase_limit_test(const RationalTransferFunction& G,
                                                                              double T, int a_max = 10, int b_max = 10,
                                                                              double k = kInfiniteSlope,
                                                                              const AnalysisOptions& opt = {}) {
    if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "period must be positive");
    if (a_max < 1 || b_max < 2) throw Error(ErrorCode::InvalidArgument, "need a_max >= 1 and b_max >= 2");
    const auto fn = detail::shifted(G, inverse_slope(k));
    const FrequencyGrid grid = detail::analysis_grid(opt, G.domain(), fn);
    const PhaseProfile prof(fn, grid);
    std::vector<PhaseLimitWitness> out;
    for (int b = 2; b <= b_max; ++b) {
        for (int a = 1; a <= a_max; ++a) {
            if (std::gcd(a, b) != 1) continue;
            const double w = static_cast<double>(a) / b * 2.0 * std::numbers::pi / T;
            const double phase = prof.at(w);
            const double bound = std::numbers::pi * (1.0 - 1.0 / b);
            if (std::abs(phase) > bound + 1e-9) {
                PhaseLimitWitness wit;
                wit.test = PhaseTest::rational;
                wit.period = T;
                wit.a = a;
                wit.b = b;
                wit.frequencies = {w};
                wit.value = phase;
                wit.bound = bound;
                out.push_back(wit);
            }
        }
    }
    return out;
}

struct PhaseThreshold {
    CriticalGain gain;
    std::optional<PhaseLimitWitness> binding;  // first witness just above the threshold
};

/// Smallest gain scale at which the rational test finds a witness.
[[nodiscard]] inline PhaseThreshold rational_phase_threshold(const RationalTransferFunction& G, double T,
                                                             int a_max = 10, int b_max = 10, double k = kInfiniteSlope,
                                                             const AnalysisOptions& opt = {}) {
    const FrequencyGrid grid =
        opt.grid ? *opt.grid : refine_by_phase(default_grid(G.domain()), [&](double w) { return G.with_gain(1.0)(w); });
    AnalysisOptions fixed = opt;
    fixed.grid = grid;
    auto clean = [&](double g) { return rational_phase_limit_test(G.with_gain(g), T, a_max, b_max, k, fixed).empty(); };
    PhaseThreshold out;
    if (!clean(1e-12)) return out;
    out.gain = detail::bisect_threshold(clean, 1e-12, 1.0, 1e-7);
    if (!out.gain.unbounded) {
        auto w = rational_phase_limit_test(G.with_gain(out.gain.value * (1.0 + 1e-6)), T, a_max, b_max, k, fixed);
        if (!w.empty()) out.binding = w.front();
    }
    return out;
}

[[nodiscard]] inline bool admissible_index(int p, int n) { return (p == 0 && n >= 0) || (p == 1 && n >= 1); }

/// Feasibility LP: lambda >= 0, sum lambda = 1 and
/// sum_r lambda_r Re{G(w_r)(1 - e^{-j w_r l T})} <= 0 for 0 < |l| <= l_max.
/// Feasible means no suitable Altshuller multiplier of period T exists.
[[nodiscard]] inline std::optional<PhaseLimitWitness> lp_phase_limit_test(
    const RationalTransferFunction& G, double T, int beta, const std::vector<int>& p, const std::vector<int>& n,
    int l_max = 50, double k = kInfiniteSlope, LpScaling scaling = LpScaling::lattice) {
    if (!(T > 0.0)) throw Error(ErrorCode::InvalidArgument, "period must be positive");
    if (beta < 2) throw Error(ErrorCode::InvalidArgument, "beta must be an integer greater than 1");
    const auto count = static_cast<std::size_t>(beta - 1);
    if (p.size() != count || n.size() != count)
        throw Error(ErrorCode::InvalidArgument, "need beta-1 entries in each index list");
    if (l_max < 1) throw Error(ErrorCode::InvalidArgument, "l_max must be positive");
    const double ik = inverse_slope(k);

    std::vector<std::size_t> active;
    for (std::size_t r = 0; r < count; ++r)
        if (admissible_index(p[r], n[r])) active.push_back(r);
    if (active.empty()) throw Error(ErrorCode::DegenerateIndexSet, "no admissible (p_r, n_r) pair");

    std::vector<double> w(count);
    std::vector<Complex> g(count);
    for (std::size_t r : active) {
        const double sign = p[r] == 0 ? 1.0 : -1.0;
        w[r] = sign * static_cast<double>(r + 1) * std::numbers::pi / (T * beta) + 2.0 * n[r] * std::numbers::pi / T;
        g[r] = ik + G(w[r]);
    }
    const double lscale = scaling == LpScaling::lattice ? T : 1.0;

    lp::Problem prob;
    prob.num_vars = active.size();
    for (int l = -l_max; l <= l_max; ++l) {
        if (l == 0) continue;
        std::vector<double> row;
        row.reserve(active.size());
        for (std::size_t r : active) row.push_back((g[r] * (1.0 - std::polar(1.0, -w[r] * l * lscale))).real());
        prob.A_le.push_back(std::move(row));
        prob.b_le.push_back(0.0);
    }
    prob.A_eq.push_back(std::vector<double>(active.size(), 1.0));
    prob.b_eq.push_back(1.0);
    const lp::Result res = lp::find_feasible(prob);
    if (!res.feasible) return std::nullopt;

    PhaseLimitWitness wit;
    wit.test = PhaseTest::lp;
    wit.period = T;
    wit.beta = beta;
    wit.p_r = p;
    wit.n_r = n;
    wit.lambda.assign(count, 0.0);
    for (std::size_t i = 0; i < active.size(); ++i) wit.lambda[active[i]] = res.x[i];
    wit.frequencies = w;
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < prob.A_le.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < active.size(); ++j) s += prob.A_le[i][j] * res.x[j];
        worst = std::max(worst, s);
    }
    wit.value = worst;
    wit.bound = 0.0;
    return wit;
}

/// Tries every admissible assignment with p_r in {0,1} and n_r <= n_max.
[[nodiscard]] inline std::optional<PhaseLimitWitness> lp_phase_limit_search(const RationalTransferFunction& G, double T,
                                                                            int beta, int n_max = 1, int l_max = 50,
                                                                            double k = kInfiniteSlope,
                                                                            LpScaling scaling = LpScaling::lattice) {
    std::vector<std::pair<int, int>> options;
    for (int nn = 0; nn <= n_max; ++nn) {
        options.emplace_back(0, nn);
        if (nn >= 1) options.emplace_back(1, nn);
    }
    const auto count = static_cast<std::size_t>(beta - 1);
    std::vector<std::size_t> idx(count, 0);
    for (;;) {
        std::vector<int> p(count), n(count);
        for (std::size_t r = 0; r < count; ++r) std::tie(p[r], n[r]) = options[idx[r]];
        if (auto w = lp_phase_limit_test(G, T, beta, p, n, l_max, k, scaling)) return w;
        std::size_t r = 0;
        while (r < count && ++idx[r] == options.size()) idx[r++] = 0;
        if (r == count) return std::nullopt;
    }
}

struct AllPeriodResult {
    bool passes = true;
    double worst_phase = 0.0;
    double worst_w = 0.0;
    std::optional<double> first_crossing_w;  // first w with |phase| = pi/2
};

/// Necessary condition for suitable Altshuller multipliers at every period:
/// |phase| <= pi/2 on the whole grid.
[[nodiscard]] inline AllPeriodResult all_period_limit_test(const RationalTransferFunction& G, double k = kInfiniteSlope,
                                                           const AnalysisOptions& opt = {}) {
    detail::require_stable(G);
    const auto fn = detail::shifted(G, inverse_slope(k));
    const FrequencyGrid grid = detail::analysis_grid(opt, G.domain(), fn);
    const PhaseProfile prof(fn, grid);
    const auto& pts = prof.points();
    const auto& ph = prof.phases();
    const double limit = std::numbers::pi / 2.0;
    AllPeriodResult r;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (std::abs(ph[i]) > std::abs(r.worst_phase)) {
            r.worst_phase = ph[i];
            r.worst_w = pts[i];
        }
        if (!r.first_crossing_w && i > 0 && std::abs(ph[i]) > limit && std::abs(ph[i - 1]) <= limit) {
            double lo = pts[i - 1], hi = pts[i];
            for (int it = 0; it < 100 && hi - lo > 1e-14 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                (std::abs(prof.at(mid)) > limit ? hi : lo) = mid;
            }
            r.first_crossing_w = 0.5 * (lo + hi);
        }
    }
    r.passes = std::abs(r.worst_phase) <= limit + 1e-9;
    return r;
}

struct SteadyState {
    double u2 = 0.0;
    double y2 = 0.0;
    double residual = 0.0;
};

/// Constant solution of u2 = g (r1 - Q(u2)) + r2 with g = G(0), by bisection.
[[nodiscard]] inline SteadyState steady_state_map(const RationalTransferFunction& G, const Nonlinearity& Q, double r2,
                                                  double r1 = 0.0) {
    if (Q.time_varying()) throw Error(ErrorCode::InvalidArgument, "steady-state map needs a time-invariant map");
    if (!Q.is_monotone()) throw Error(ErrorCode::NonmonotoneNonlinearity, "nonlinearity is not monotone");
    const double g = dc_gain(G);
    if (g < 0.0 && -g * Q.slope_bound() >= 1.0)
        throw Error(ErrorCode::InvalidArgument, "loop dc gain too negative for a unique steady state");
    auto F = [&](double u) { return u + g * Q(u) - (g * r1 + r2); };
    double lo = -1.0, hi = 1.0;
    while (F(lo) > 0.0) lo *= 2.0;
    while (F(hi) < 0.0) hi *= 2.0;
    for (int it = 0; it < 2000; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double f = F(mid);
        if (f == 0.0) {
            lo = hi = mid;
            break;
        }
        (f < 0.0 ? lo : hi) = mid;
    }
    const double u = std::abs(F(lo)) <= std::abs(F(hi)) ? lo : hi;
    SteadyState s;
    s.u2 = u;
    s.y2 = Q(u);
    s.residual = F(u);
    return s;
}

enum class SearchForm { one_tap_causal, one_tap_anticausal, altshuller_lattice };

[[nodiscard]] inline std::string to_string(SearchForm f) {
    switch (f) {
        case SearchForm::one_tap_causal: return "one_tap_causal";
        case SearchForm::one_tap_anticausal: return "one_tap_anticausal";
        case SearchForm::altshuller_lattice: return "altshuller_lattice";
    }
    return "unknown";
}

struct SearchSpec {
    SearchForm form = SearchForm::one_tap_causal;
    double spacing = 1.0;         // unit offset (samples or seconds); lattice period for Altshuller
    int max_taps = 1;             // Altshuller: number of lattice offsets N, -N, 2N, -2N, ...
    std::vector<double> offsets;  // explicit lattice offsets, overrides max_taps
    double step = 0.01;
    double coeff_max = 0.99;
};

struct SearchObjective {
    enum class Kind { margin, bound };
    Kind kind = Kind::margin;
    Channel channel{Source::r2, Target::y2};
};

struct SearchResult {
    TapMultiplier multiplier;
    std::vector<double> coefficients;
    double objective = 0.0;  // refined margin or bound of the winner
    SuitabilityResult suitability;
    std::optional<GainBoundReport> bound;
    std::size_t candidates = 0;
};

[[nodiscard]] inline SearchResult search_multiplier(const RationalTransferFunction& G, double k, const SearchSpec& spec,
                                                    const SearchObjective& objective, const AnalysisOptions& opt = {}) {
    detail::require_stable(G);
    if (!(spec.step > 0.0) || !(spec.coeff_max >= 0.0) || !(spec.spacing > 0.0))
        throw Error(ErrorCode::InvalidArgument, "invalid search box");
    const double ik = inverse_slope(k);
    const Domain d = G.domain();

    std::vector<double> offsets;
    MultiplierClass cls = MultiplierClass::ozf;
    double lo = 0.0;
    switch (spec.form) {
        case SearchForm::one_tap_causal: offsets = {spec.spacing}; break;
        case SearchForm::one_tap_anticausal:
            offsets = {-spec.spacing};
            cls = MultiplierClass::ozf_odd;
            lo = -spec.coeff_max;
            break;
        case SearchForm::altshuller_lattice:
            cls = MultiplierClass::altshuller;
            if (!spec.offsets.empty()) {
                offsets = spec.offsets;
            } else {
                for (int i = 0; static_cast<int>(offsets.size()) < spec.max_taps; ++i) {
                    offsets.push_back((i / 2 + 1) * spec.spacing * (i % 2 == 0 ? 1.0 : -1.0));
                }
            }
            break;
    }
    const auto steps = static_cast<int>(std::floor(spec.coeff_max / spec.step + 1e-9));
    const int lo_steps = lo < 0.0 ? -steps : 0;

    auto plant_fn = [&](double w) { return ik + G(w); };
    const FrequencyGrid grid = detail::analysis_grid(opt, d, plant_fn);
    const std::size_t np = grid.points.size();
    const std::size_t nt = offsets.size();
    std::vector<Complex> gk(np), gg(np);
    std::vector<std::vector<Complex>> ex(nt, std::vector<Complex>(np));
    for (std::size_t i = 0; i < np; ++i) {
        gg[i] = G(grid.points[i]);
        gk[i] = ik + gg[i];
        for (std::size_t t = 0; t < nt; ++t) ex[t][i] = std::polar(1.0, -grid.points[i] * offsets[t]);
    }

    std::vector<int> idx(nt, lo_steps);
    std::optional<std::vector<int>> best;
    double best_value = 0.0;
    std::size_t candidates = 0;
    std::vector<double> c(nt);
    bool done = false;
    while (!done) {
        double sum = 0.0;
        for (std::size_t t = 0; t < nt; ++t) {
            c[t] = idx[t] * spec.step;
            sum += cls == MultiplierClass::ozf_odd ? std::abs(c[t]) : c[t];
        }
        if (sum < 1.0 - 1e-12) {
            ++candidates;
            double margin = std::numeric_limits<double>::infinity();
            double worst = 0.0;
            for (std::size_t i = 0; i < np; ++i) {
                Complex m{1.0, 0.0};
                for (std::size_t t = 0; t < nt; ++t) m -= c[t] * ex[t][i];
                const double re = (m * gk[i]).real();
                margin = std::min(margin, re);
                if (objective.kind == SearchObjective::Kind::bound && re > 0.0)
                    worst = std::max(worst, channel_terms(objective.channel, m, gg[i], ik, opt.variant).value());
            }
            const double score = objective.kind == SearchObjective::Kind::margin ? margin : -worst;
            const bool feasible = margin > opt.eps_tol;
            if (feasible && (!best || score > best_value)) {
                best = idx;
                best_value = score;
            }
        }
        std::size_t t = nt;
        for (;;) {
            if (t == 0) {
                done = true;
                break;
            }
            --t;
            if (++idx[t] <= steps) break;
            idx[t] = lo_steps;
        }
        if (done) break;
    }
    if (!best) throw Error(ErrorCode::NoFeasibleMultiplier, "no suitable multiplier in the search box");

    SearchResult r;
    r.candidates = candidates;
    r.multiplier.domain = d;
    r.multiplier.claimed = cls;
    r.multiplier.period = cls == MultiplierClass::altshuller ? spec.spacing : 0.0;
    for (std::size_t t = 0; t < nt; ++t) {
        const double coeff = (*best)[t] * spec.step;
        r.coefficients.push_back(coeff);
        if (coeff != 0.0) r.multiplier.taps.push_back({offsets[t], coeff});
    }
    AnalysisOptions fixed = opt;
    fixed.grid = grid;
    r.suitability = suitability_margin(r.multiplier, G, k, fixed);
    if (objective.kind == SearchObjective::Kind::margin) {
        r.objective = r.suitability.margin;
    } else {
        r.bound = gain_bound(r.multiplier, G, k, objective.channel, fixed);
        r.objective = r.bound->bound;
    }
    return r;
}

}  // namespace lurye
