#pragma once

// JSON forms of plants, multipliers, nonlinearities, signals and reports.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lurye/error.hpp"
#include "lurye/lti.hpp"
#include "lurye/multipliers.hpp"
#include "lurye/nonlinearity.hpp"
#include "lurye/signals.hpp"
#include "lurye/simulation.hpp"
#include "lurye/stability.hpp"

namespace lurye::io {

using json = nlohmann::json;

namespace detail {

[[noreturn]] inline void field_error(const std::string& path, const std::string& what) {
    throw Error(ErrorCode::ConfigError, "field '" + path + "': " + what);
}

inline const json& require(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) field_error(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) field_error(path.empty() ? key : path + "." + key, "missing");
    return *it;
}

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline double number(const json& j, const std::string& path) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    }
    if (!j.is_number()) field_error(path, "expected a number");
    return j.get<double>();
}

inline double number_or(const json& j, const std::string& key, double fallback, const std::string& path) {
    if (!j.contains(key)) return fallback;
    return number(j.at(key), join(path, key));
}

inline std::vector<double> numbers(const json& j, const std::string& path) {
    if (!j.is_array()) field_error(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) field_error(path, "expected a string");
    return j.get<std::string>();
}

inline json finite_or_string(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    return v;
}

}  // namespace detail

[[nodiscard]] inline Domain domain_from(const json& j, const std::string& path) {
    const auto s = detail::text(j, path);
    if (s == "z" || s == "discrete") return Domain::discrete;
    if (s == "s" || s == "continuous") return Domain::continuous;
    detail::field_error(path, "expected \"s\" or \"z\"");
}

[[nodiscard]] inline json to_json(const RationalTransferFunction& tf) {
    return {{"domain", to_string(tf.domain())}, {"num", tf.numerator()}, {"den", tf.denominator()}, {"g", tf.gain()}};
}

[[nodiscard]] inline RationalTransferFunction tf_from_json(const json& j, const std::string& path = "plant") {
    const Domain d = domain_from(detail::require(j, "domain", path), detail::join(path, "domain"));
    auto num = detail::numbers(detail::require(j, "num", path), detail::join(path, "num"));
    auto den = detail::numbers(detail::require(j, "den", path), detail::join(path, "den"));
    const double g = detail::number_or(j, "g", 1.0, path);
    if (num.empty() || den.empty()) detail::field_error(path, "num and den must be nonempty");
    try {
        return {d, std::move(num), std::move(den), g};
    } catch (const Error& e) {
        detail::field_error(path, e.what());
    }
}

[[nodiscard]] inline json to_json(const StateSpaceRealization& ss) {
    json A = json::array();
    for (Eigen::Index i = 0; i < ss.A.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < ss.A.cols(); ++k) row.push_back(ss.A(i, k));
        A.push_back(row);
    }
    std::vector<double> B(ss.B.data(), ss.B.data() + ss.B.size());
    std::vector<double> C(ss.C.data(), ss.C.data() + ss.C.size());
    return {{"domain", to_string(ss.domain)}, {"A", A}, {"B", B}, {"C", C}, {"D", ss.D}, {"minimal", ss.minimal}};
}

[[nodiscard]] inline StateSpaceRealization ss_from_json(const json& j, const std::string& path = "realization") {
    StateSpaceRealization ss;
    ss.domain = domain_from(detail::require(j, "domain", path), detail::join(path, "domain"));
    const json& A = detail::require(j, "A", path);
    if (!A.is_array()) detail::field_error(detail::join(path, "A"), "expected an array of rows");
    const auto n = static_cast<Eigen::Index>(A.size());
    ss.A.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = detail::numbers(A[static_cast<std::size_t>(i)], path + ".A[" + std::to_string(i) + "]");
        if (static_cast<Eigen::Index>(row.size()) != n) detail::field_error(detail::join(path, "A"), "A must be square");
        for (Eigen::Index k = 0; k < n; ++k) ss.A(i, k) = row[static_cast<std::size_t>(k)];
    }
    const auto B = detail::numbers(detail::require(j, "B", path), detail::join(path, "B"));
    const auto C = detail::numbers(detail::require(j, "C", path), detail::join(path, "C"));
    if (static_cast<Eigen::Index>(B.size()) != n || static_cast<Eigen::Index>(C.size()) != n)
        detail::field_error(path, "B and C must match the size of A");
    ss.B = Eigen::Map<const Eigen::VectorXd>(B.data(), n);
    ss.C = Eigen::Map<const Eigen::RowVectorXd>(C.data(), n);
    ss.D = detail::number_or(j, "D", 0.0, path);
    ss.minimal = true;
    return ss;
}

[[nodiscard]] inline MultiplierClass class_from(const std::string& s, const std::string& path) {
    if (s == "ozf") return MultiplierClass::ozf;
    if (s == "ozf_odd" || s == "odd") return MultiplierClass::ozf_odd;
    if (s == "altshuller") return MultiplierClass::altshuller;
    detail::field_error(path, "expected \"ozf\", \"ozf_odd\" or \"altshuller\"");
}

[[nodiscard]] inline json to_json(const Multiplier& m) {
    if (const auto* t = std::get_if<TapMultiplier>(&m)) {
        json taps = json::array();
        for (const Tap& tap : t->taps) taps.push_back({tap.offset, tap.coeff});
        json out = {{"domain", to_string(t->domain)}, {"taps", taps}, {"class", to_string(t->claimed)}};
        if (t->claimed == MultiplierClass::altshuller) out["period"] = t->period;
        return out;
    }
    const auto& r = std::get<RationalMultiplier>(m);
    json out = to_json(r.tf);
    out["class"] = to_string(r.claimed);
    out["evidence"] = to_string(r.evidence);
    return out;
}

[[nodiscard]] inline Multiplier multiplier_from_json(const json& j, const std::string& path = "multiplier") {
    if (!j.is_object()) detail::field_error(path, "expected an object");
    const MultiplierClass cls =
        j.contains("class") ? class_from(detail::text(j.at("class"), detail::join(path, "class")), detail::join(path, "class"))
                            : MultiplierClass::ozf;
    if (j.contains("num") || j.contains("den")) {
        RationalMultiplier r{tf_from_json(j, path), cls, MembershipEvidence::validated_first_order};
        if (j.contains("evidence") && detail::text(j.at("evidence"), detail::join(path, "evidence")) == "user_asserted")
            r.evidence = MembershipEvidence::user_asserted;
        return r;
    }
    TapMultiplier t;
    t.domain = domain_from(detail::require(j, "domain", path), detail::join(path, "domain"));
    t.claimed = cls;
    if (j.contains("taps")) {
        const json& taps = j.at("taps");
        if (!taps.is_array()) detail::field_error(detail::join(path, "taps"), "expected [[offset, coeff], ...]");
        for (std::size_t i = 0; i < taps.size(); ++i) {
            const auto pair = detail::numbers(taps[i], path + ".taps[" + std::to_string(i) + "]");
            if (pair.size() != 2) detail::field_error(path + ".taps[" + std::to_string(i) + "]", "expected [offset, coeff]");
            t.taps.push_back({pair[0], pair[1]});
        }
    }
    t.period = detail::number_or(j, "period", 0.0, path);
    return t;
}

[[nodiscard]] inline StaticMap static_map_from_json(const json& j, const std::string& path) {
    const auto kind = detail::text(detail::require(j, "kind", path), detail::join(path, "kind"));
    if (kind == "saturation") return Saturation{detail::number_or(j, "limit", 1.0, path)};
    if (kind == "deadzone") return Deadzone{detail::number(detail::require(j, "width", path), detail::join(path, "width"))};
    if (kind == "linear") return LinearGain{detail::number_or(j, "gain", 1.0, path)};
    if (kind == "zero") return LinearGain{0.0};
    if (kind == "piecewise_linear")
        return PiecewiseLinear{detail::numbers(detail::require(j, "x", path), detail::join(path, "x")),
                               detail::numbers(detail::require(j, "y", path), detail::join(path, "y"))};
    detail::field_error(detail::join(path, "kind"), "unknown nonlinearity kind '" + kind + "'");
}

[[nodiscard]] inline Nonlinearity nonlinearity_from_json(const json& j, const std::string& path = "nonlinearity") {
    const auto kind = detail::text(detail::require(j, "kind", path), detail::join(path, "kind"));
    try {
        if (kind == "periodic_gain_switch")
            return PeriodicGainSwitch{detail::number(detail::require(j, "period", path), detail::join(path, "period")),
                                      detail::numbers(detail::require(j, "gains", path), detail::join(path, "gains"))};
        if (kind == "periodic_offset")
            return PeriodicOffset{static_map_from_json(detail::require(j, "base", path), detail::join(path, "base")),
                                  detail::numbers(detail::require(j, "offsets", path), detail::join(path, "offsets")),
                                  detail::number_or(j, "sample_time", 1.0, path)};
        return std::visit([](auto m) { return Nonlinearity(std::move(m)); }, static_map_from_json(j, path));
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        detail::field_error(path, e.what());
    }
}

[[nodiscard]] inline json to_json(const Nonlinearity& phi) {
    return std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, Saturation>)
                return {{"kind", "saturation"}, {"limit", m.limit}};
            else if constexpr (std::is_same_v<T, Deadzone>)
                return {{"kind", "deadzone"}, {"width", m.width}};
            else if constexpr (std::is_same_v<T, LinearGain>)
                return {{"kind", "linear"}, {"gain", m.gain}};
            else if constexpr (std::is_same_v<T, PiecewiseLinear>)
                return {{"kind", "piecewise_linear"}, {"x", m.x}, {"y", m.y}};
            else if constexpr (std::is_same_v<T, PeriodicGainSwitch>)
                return {{"kind", "periodic_gain_switch"}, {"period", m.period}, {"gains", m.gains}};
            else
                return {{"kind", "periodic_offset"},
                        {"base", to_json(Nonlinearity(std::visit([](auto b) { return Nonlinearity(b); }, m.base)))},
                        {"offsets", m.offsets},
                        {"sample_time", m.sample_time}};
        },
        phi.kind());
}

[[nodiscard]] inline SignalSpec signal_from_json(const json& j, const std::string& path) {
    if (j.is_number()) return SignalSpec::constant(j.get<double>());
    const auto kind = detail::text(detail::require(j, "kind", path), detail::join(path, "kind"));
    try {
        if (kind == "zero") return SignalSpec::zero();
        if (kind == "constant")
            return SignalSpec::constant(detail::number(detail::require(j, "value", path), detail::join(path, "value")));
        if (kind == "step")
            return SignalSpec::step(detail::number(detail::require(j, "value", path), detail::join(path, "value")),
                                    detail::number_or(j, "start", 0.0, path));
        if (kind == "sinusoid")
            return SignalSpec::sinusoid(detail::number_or(j, "amplitude", 1.0, path),
                                        detail::number(detail::require(j, "frequency", path), detail::join(path, "frequency")),
                                        detail::number_or(j, "phase", 0.0, path));
        if (kind == "periodic_table")
            return SignalSpec::periodic_table(
                detail::numbers(detail::require(j, "samples", path), detail::join(path, "samples")),
                detail::number_or(j, "sample_time", 1.0, path));
        if (kind == "noise") {
            const json& seed = detail::require(j, "seed", path);
            if (!seed.is_number_unsigned()) detail::field_error(detail::join(path, "seed"), "expected an unsigned integer");
            return SignalSpec::noise(seed.get<std::uint64_t>(),
                                     detail::number(detail::require(j, "power", path), detail::join(path, "power")),
                                     detail::number_or(j, "sample_time", 1.0, path));
        }
        if (kind == "sum") {
            const json& terms = detail::require(j, "terms", path);
            if (!terms.is_array()) detail::field_error(detail::join(path, "terms"), "expected an array");
            std::vector<SignalSpec> parts;
            for (std::size_t i = 0; i < terms.size(); ++i)
                parts.push_back(signal_from_json(terms[i], path + ".terms[" + std::to_string(i) + "]"));
            return SignalSpec::sum(std::move(parts));
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigError) throw;
        detail::field_error(path, e.what());
    }
    detail::field_error(detail::join(path, "kind"), "unknown signal kind '" + kind + "'");
}

[[nodiscard]] inline json to_json(const SignalSpec& s) {
    using K = SignalSpec::Kind;
    json out = {{"kind", s.name()}};
    switch (s.kind) {
        case K::zero: break;
        case K::constant: out["value"] = s.value; break;
        case K::step:
            out["value"] = s.value;
            out["start"] = s.start;
            break;
        case K::sinusoid:
            out["amplitude"] = s.amplitude;
            out["frequency"] = s.frequency;
            out["phase"] = s.phase;
            break;
        case K::periodic_table:
            out["samples"] = s.samples;
            out["sample_time"] = s.sample_time;
            break;
        case K::noise:
            out["seed"] = s.seed;
            out["power"] = s.power;
            out["sample_time"] = s.sample_time;
            break;
        case K::sum: {
            json terms = json::array();
            for (const auto& t : s.terms) terms.push_back(to_json(t));
            out["terms"] = terms;
            break;
        }
    }
    return out;
}

[[nodiscard]] inline json to_json(const GridInfo& g) {
    return {{"domain", to_string(g.domain)},
            {"points", g.points},
            {"base_density", g.base_density},
            {"refinement_factor", g.refinement_factor},
            {"refined_intervals", g.refined_intervals}};
}

[[nodiscard]] inline json to_json(const SuitabilityResult& r) {
    return {{"margin", r.margin},
            {"argmin_frequency", r.argmin_w},
            {"suitable", r.suitable},
            {"eps_tol", r.eps_tol},
            {"grid", to_json(r.grid)}};
}

[[nodiscard]] inline json to_json(const GainBoundReport& r) {
    json out = {{"channel", to_string(r.channel)},
                {"bound", detail::finite_or_string(r.bound)},
                {"argmax_frequency", r.argmax_w},
                {"k", detail::finite_or_string(r.k)},
                {"margin", r.margin},
                {"grid", to_json(r.grid)}};
    if (r.channel.quadratic()) {
        out["floor"] = r.floor;
        out["floor_active"] = r.floor_active;
    }
    if (r.variant_sensitive) {
        out["table1_variant"] = r.variant == Table1Variant::printed ? "printed" : "eq21";
        out["flag"] = "r2->u2 constant term differs between the tabulated form (Re[M/k]) and the quadratic "
                      "derivation (2Re[M/k])";
    }
    return out;
}

[[nodiscard]] inline json to_json(const MembershipVerdict& v) {
    json out = {{"status", to_string(v.status)}, {"sum_margin", v.sum_margin}, {"on_lattice", v.on_lattice}};
    if (!v.reason.empty()) out["reason"] = v.reason;
    if (v.spacing) out["spacing"] = *v.spacing;
    return out;
}

[[nodiscard]] inline json to_json(const PhaseLimitWitness& w) {
    json out = {{"test", to_string(w.test)},
                {"period", w.period},
                {"frequencies", w.frequencies},
                {"value", w.value},
                {"bound", w.bound}};
    switch (w.test) {
        case PhaseTest::gap: out["n"] = w.n; break;
        case PhaseTest::rational:
            out["a"] = w.a;
            out["b"] = w.b;
            break;
        case PhaseTest::lp:
            out["beta"] = w.beta;
            out["p_r"] = w.p_r;
            out["n_r"] = w.n_r;
            out["lambda"] = w.lambda;
            break;
        case PhaseTest::all_periods: break;
    }
    return out;
}

[[nodiscard]] inline json to_json(const AllPeriodResult& r) {
    json out = {{"passes", r.passes}, {"worst_phase", r.worst_phase}, {"worst_frequency", r.worst_w}};
    if (r.first_crossing_w) out["first_crossing_frequency"] = *r.first_crossing_w;
    return out;
}

[[nodiscard]] inline json to_json(const CriticalGain& g) {
    return {{"value", detail::finite_or_string(g.value)}, {"rounded", detail::finite_or_string(g.rounded)},
            {"unbounded", g.unbounded}};
}

[[nodiscard]] inline json to_json(const SearchResult& r) {
    json out = {{"multiplier", to_json(Multiplier{r.multiplier})},
                {"coefficients", r.coefficients},
                {"objective", r.objective},
                {"suitability", to_json(r.suitability)},
                {"candidates", r.candidates}};
    if (r.bound) out["bound"] = to_json(*r.bound);
    return out;
}

/// Byte offset to "line L, column C" for parse diagnostics.
[[nodiscard]] inline std::string position_of(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[nodiscard]] inline json parse_config(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ConfigError, "malformed JSON at " + position_of(text, e.byte > 0 ? e.byte - 1 : 0) +
                                                ": " + e.what());
    }
}

}  // namespace lurye::io
