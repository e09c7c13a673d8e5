#pragma once

// Rational transfer functions in s or z, their frequency response, poles and a
// controllable-canonical state-space realization.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lurye/error.hpp"

namespace lurye {

using Complex = std::complex<double>;

enum class Domain { continuous, discrete };

[[nodiscard]] inline std::string to_string(Domain d) { return d == Domain::continuous ? "s" : "z"; }

namespace poly {

/// Drops leading zero coefficients; an all-zero polynomial becomes {0}.
[[nodiscard]] inline std::vector<double> trim(std::vector<double> c) {
    auto first = std::find_if(c.begin(), c.end(), [](double v) { return v != 0.0; });
    if (first == c.end()) return {0.0};
    c.erase(c.begin(), first);
    return c;
}

[[nodiscard]] inline int degree(std::span<const double> c) {
    for (std::size_t i = 0; i < c.size(); ++i)
        if (c[i] != 0.0) return static_cast<int>(c.size() - 1 - i);
    return 0;
}

[[nodiscard]] inline bool is_zero(std::span<const double> c) {
    return std::all_of(c.begin(), c.end(), [](double v) { return v == 0.0; });
}

[[nodiscard]] inline Complex evaluate(std::span<const double> c, Complex p) {
    Complex acc{0.0, 0.0};
    for (double v : c) acc = acc * p + v;
    return acc;
}

[[nodiscard]] inline std::vector<double> add(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(std::max(a.size(), b.size()), 0.0);
    std::copy(a.begin(), a.end(), out.end() - static_cast<std::ptrdiff_t>(a.size()));
    for (std::size_t i = 0; i < b.size(); ++i) out[out.size() - b.size() + i] += b[i];
    return trim(std::move(out));
}

[[nodiscard]] inline std::vector<double> multiply(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    return trim(std::move(out));
}

[[nodiscard]] inline std::vector<double> scale(std::span<const double> a, double s) {
    std::vector<double> out(a.begin(), a.end());
    for (double& v : out) v *= s;
    return trim(std::move(out));
}

[[nodiscard]] inline double norm(std::span<const double> c) {
    double s = 0.0;
    for (double v : c) s += v * v;
    return std::sqrt(s);
}

/// Roots via eigenvalues of the companion matrix, with multiplicity.
[[nodiscard]] inline std::vector<Complex> roots(std::span<const double> coeffs) {
    const auto c = trim({coeffs.begin(), coeffs.end()});
    const int n = degree(c);
    if (n == 0) return {};
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) companion(0, j) = -c[static_cast<std::size_t>(j + 1)] / c[0];
    for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    if (solver.info() != Eigen::Success)
        throw Error(ErrorCode::RootFindingFailure, "companion eigensolve did not converge");
    std::vector<Complex> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(solver.eigenvalues()[i]);
    std::sort(out.begin(), out.end(), [](Complex a, Complex b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    return out;
}

}  // namespace poly

/// g * num(p) / den(p), coefficients in descending powers. The gain is kept
/// apart from the polynomials so gain sweeps never touch them.
class RationalTransferFunction {
public:
    RationalTransferFunction() : RationalTransferFunction(Domain::continuous, {1.0}, {1.0}) {}

    RationalTransferFunction(Domain domain, std::vector<double> num, std::vector<double> den, double gain = 1.0)
        : domain_(domain), num_(poly::trim(std::move(num))), den_(poly::trim(std::move(den))), gain_(gain) {
        if (poly::is_zero(den_)) throw Error(ErrorCode::InvalidArgument, "denominator is identically zero");
        auto finite = [](double v) { return std::isfinite(v); };
        if (!std::all_of(num_.begin(), num_.end(), finite) || !std::all_of(den_.begin(), den_.end(), finite) ||
            !std::isfinite(gain_))
            throw Error(ErrorCode::InvalidArgument, "transfer function coefficients must be finite");
    }

    [[nodiscard]] static RationalTransferFunction constant(Domain domain, double value) {
        return {domain, {value}, {1.0}, 1.0};
    }

    [[nodiscard]] Domain domain() const noexcept { return domain_; }
    [[nodiscard]] const std::vector<double>& numerator() const noexcept { return num_; }
    [[nodiscard]] const std::vector<double>& denominator() const noexcept { return den_; }
    [[nodiscard]] double gain() const noexcept { return gain_; }
    [[nodiscard]] int num_degree() const { return poly::degree(num_); }
    [[nodiscard]] int den_degree() const { return poly::degree(den_); }
    [[nodiscard]] bool is_proper() const { return num_degree() <= den_degree(); }
    [[nodiscard]] bool is_strictly_proper() const { return poly::is_zero(num_) || num_degree() < den_degree(); }

    [[nodiscard]] RationalTransferFunction with_gain(double g) const { return {domain_, num_, den_, g}; }

    /// c + G as a single fraction with unit gain.
    [[nodiscard]] RationalTransferFunction plus_constant(double c) const {
        auto scaled_num = poly::scale(num_, gain_);
        auto shifted = poly::add(poly::scale(den_, c), scaled_num);
        return {domain_, shifted, den_, 1.0};
    }

    /// Frequency response at w (rad/s or rad/sample). Negative w is the
    /// conjugate of the positive evaluation, so symmetry is exact.
    [[nodiscard]] Complex operator()(double w) const {
        const double aw = std::abs(w);
        const Complex p = domain_ == Domain::continuous ? Complex{0.0, aw} : std::polar(1.0, aw);
        const Complex d = poly::evaluate(den_, p);
        if (std::abs(d) < 1e-12 * poly::norm(den_))
            throw Error(ErrorCode::PoleOnEvaluationContour, "pole on the evaluation contour at w=" + std::to_string(w));
        const Complex value = gain_ * poly::evaluate(num_, p) / d;
        return w < 0.0 ? std::conj(value) : value;
    }

private:
    Domain domain_;
    std::vector<double> num_;
    std::vector<double> den_;
    double gain_;
};

enum class StabilityVerdict { stable, marginally_stable, unstable };

[[nodiscard]] inline std::string to_string(StabilityVerdict v) {
    switch (v) {
        case StabilityVerdict::stable: return "stable";
        case StabilityVerdict::marginally_stable: return "marginally_stable";
        case StabilityVerdict::unstable: return "unstable";
    }
    return "unknown";
}

struct StabilityResult {
    StabilityVerdict verdict = StabilityVerdict::stable;
    std::vector<Complex> poles;

    [[nodiscard]] bool stable() const noexcept { return verdict == StabilityVerdict::stable; }
};

/// Poles strictly inside the stability region give `stable`; any pole within
/// 1e-9 of the boundary gives `marginally_stable` unless another pole is
/// clearly outside. A constant transfer function is stable with no poles.
[[nodiscard]] inline StabilityResult is_stable(const RationalTransferFunction& tf) {
    constexpr double boundary_tol = 1e-9;
    StabilityResult result;
    result.poles = poly::roots(tf.denominator());
    bool marginal = false;
    for (const Complex& p : result.poles) {
        const double distance = tf.domain() == Domain::continuous ? p.real() : std::abs(p) - 1.0;
        if (std::abs(distance) < boundary_tol) {
            marginal = true;
        } else if (distance > 0.0) {
            result.verdict = StabilityVerdict::unstable;
            return result;
        }
    }
    result.verdict = marginal ? StabilityVerdict::marginally_stable : StabilityVerdict::stable;
    return result;
}

/// Value at w=0 (continuous) or z=1 (discrete).
[[nodiscard]] inline double dc_gain(const RationalTransferFunction& tf) {
    const Complex v = tf(0.0);
    if (std::abs(v.imag()) >= 1e-12)
        throw Error(ErrorCode::InvalidArgument, "dc gain has a non-negligible imaginary part");
    return v.real();
}

struct StateSpaceRealization {
    Domain domain = Domain::discrete;
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    Eigen::RowVectorXd C;
    double D = 0.0;
    bool minimal = true;

    [[nodiscard]] Eigen::Index order() const noexcept { return A.rows(); }

    [[nodiscard]] bool consistent() const {
        const auto n = A.rows();
        return A.cols() == n && B.size() == n && C.size() == n;
    }
};

[[nodiscard]] inline Complex frequency_response(const StateSpaceRealization& ss, double w) {
    const Eigen::Index n = ss.order();
    if (n == 0) return {ss.D, 0.0};
    const double aw = std::abs(w);
    const Complex p = ss.domain == Domain::continuous ? Complex{0.0, aw} : std::polar(1.0, aw);
    Eigen::MatrixXcd resolvent = p * Eigen::MatrixXcd::Identity(n, n) - ss.A.cast<Complex>();
    Eigen::VectorXcd x = resolvent.partialPivLu().solve(ss.B.cast<Complex>());
    const Complex value = (ss.C.cast<Complex>() * x)(0) + ss.D;
    return w < 0.0 ? std::conj(value) : value;
}

namespace detail {

inline int numerical_rank(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    const double tol = s(0) * 1e-10 * static_cast<double>(std::max(m.rows(), m.cols()));
    return static_cast<int>((s.array() > tol).count());
}

}  // namespace detail

/// Controllable canonical form with the gain folded into B:
///   A = [-a1 .. -an; I 0], B = g e1, C = b - b0 a, D = g b0
/// for a monic denominator. Observability is rank-tested to flag minimality.
[[nodiscard]] inline StateSpaceRealization to_state_space(const RationalTransferFunction& tf) {
    if (!tf.is_proper()) throw Error(ErrorCode::ImproperTransferFunction, "numerator degree exceeds denominator degree");
    const auto& den = tf.denominator();
    const int n = tf.den_degree();
    const double lead = den.front();
    std::vector<double> a(den.size());
    for (std::size_t i = 0; i < den.size(); ++i) a[i] = den[i] / lead;

    std::vector<double> b(static_cast<std::size_t>(n + 1), 0.0);
    const auto& num = tf.numerator();
    for (std::size_t i = 0; i < num.size(); ++i) b[b.size() - num.size() + i] = num[i] / lead;

    StateSpaceRealization ss;
    ss.domain = tf.domain();
    ss.D = tf.gain() * b[0];
    ss.A = Eigen::MatrixXd::Zero(n, n);
    ss.B = Eigen::VectorXd::Zero(n);
    ss.C = Eigen::RowVectorXd::Zero(n);
    if (n == 0) return ss;
    for (int j = 0; j < n; ++j) {
        ss.A(0, j) = -a[static_cast<std::size_t>(j + 1)];
        ss.C(j) = b[static_cast<std::size_t>(j + 1)] - b[0] * a[static_cast<std::size_t>(j + 1)];
    }
    for (int i = 1; i < n; ++i) ss.A(i, i - 1) = 1.0;
    ss.B(0) = tf.gain();

    Eigen::MatrixXd ctrb(n, n), obsv(n, n);
    Eigen::VectorXd col = ss.B;
    Eigen::RowVectorXd row = ss.C;
    for (int i = 0; i < n; ++i) {
        ctrb.col(i) = col;
        obsv.row(i) = row;
        col = ss.A * col;
        row = row * ss.A;
    }
    ss.minimal = detail::numerical_rank(ctrb) == n && detail::numerical_rank(obsv) == n;
    return ss;
}

/// Sorted evaluation frequencies plus how they were generated.
struct FrequencyGrid {
    Domain domain = Domain::discrete;
    std::vector<double> points;
    double base_density = 0.0;       // points per decade (continuous) or total points (discrete)
    double refinement_factor = 1.0;  // subdivision applied where the phase moves fast
    std::size_t refined_intervals = 0;

    [[nodiscard]] std::size_t size() const noexcept { return points.size(); }
};

inline constexpr double kDefaultContinuousDensity = 2000.0;
inline constexpr std::size_t kDefaultDiscretePoints = 4096;

/// {0} followed by log-spaced points over [w_min, w_max].
[[nodiscard]] inline FrequencyGrid continuous_grid(double per_decade = kDefaultContinuousDensity, double w_min = 1e-3,
                                                   double w_max = 1e4) {
    if (!(per_decade >= 1.0) || !(w_min > 0.0) || !(w_max > w_min))
        throw Error(ErrorCode::InvalidArgument, "invalid continuous grid parameters");
    FrequencyGrid grid;
    grid.domain = Domain::continuous;
    grid.base_density = per_decade;
    const double decades = std::log10(w_max / w_min);
    const auto count = static_cast<std::size_t>(std::ceil(decades * per_decade)) + 1;
    grid.points.reserve(count + 1);
    grid.points.push_back(0.0);
    for (std::size_t i = 0; i < count; ++i)
        grid.points.push_back(w_min * std::pow(10.0, decades * static_cast<double>(i) / static_cast<double>(count - 1)));
    return grid;
}

/// Uniform points on [0, pi]; conjugate symmetry covers (pi, 2pi).
[[nodiscard]] inline FrequencyGrid discrete_grid(std::size_t count = kDefaultDiscretePoints) {
    if (count < 2) throw Error(ErrorCode::InvalidArgument, "discrete grid needs at least two points");
    FrequencyGrid grid;
    grid.domain = Domain::discrete;
    grid.base_density = static_cast<double>(count);
    grid.points.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        grid.points[i] = std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1);
    return grid;
}

[[nodiscard]] inline FrequencyGrid default_grid(Domain d) {
    return d == Domain::continuous ? continuous_grid() : discrete_grid();
}

/// Subdivides every interval across which the argument of `fn` turns by more
/// than `max_step_deg` into `factor` equal pieces.
[[nodiscard]] inline FrequencyGrid refine_by_phase(const FrequencyGrid& base, const std::function<Complex(double)>& fn,
                                                   double max_step_deg = 2.0, int factor = 10) {
    FrequencyGrid out = base;
    out.refinement_factor = factor;
    out.refined_intervals = 0;
    if (base.points.size() < 2) return out;
    out.points.clear();
    out.points.reserve(base.points.size());
    const double limit = max_step_deg * std::numbers::pi / 180.0;
    Complex prev = fn(base.points[0]);
    out.points.push_back(base.points[0]);
    for (std::size_t i = 1; i < base.points.size(); ++i) {
        const Complex cur = fn(base.points[i]);
        const double turn = std::abs(std::arg(cur / prev));
        if (turn > limit || !std::isfinite(turn)) {
            ++out.refined_intervals;
            const double lo = base.points[i - 1];
            const double hi = base.points[i];
            for (int k = 1; k < factor; ++k) out.points.push_back(lo + (hi - lo) * k / factor);
        }
        out.points.push_back(base.points[i]);
        prev = cur;
    }
    return out;
}

}  // namespace lurye
