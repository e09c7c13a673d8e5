#pragma once

// Command-line front end: argument parsing, config loading, dispatch and
// report emission. run_cli is the whole program; the executable only forwards.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lurye/experiments.hpp"
#include "lurye/json_io.hpp"
#include "lurye/simulation.hpp"
#include "lurye/stability.hpp"

namespace lurye::cli {

using json = nlohmann::json;

inline constexpr int kExitPass = 0;
inline constexpr int kExitNegative = 1;
inline constexpr int kExitUsage = 2;
inline constexpr const char* kVersion = "1.0.0";

/// Usage-type failures map to 2, analytic outcomes to 1.
[[nodiscard]] inline int exit_code_for(ErrorCode c) {
    switch (c) {
        case ErrorCode::ConfigError:
        case ErrorCode::EmptyRange:
        case ErrorCode::UnknownExperiment:
        case ErrorCode::InvalidArgument:
        case ErrorCode::ImproperTransferFunction:
        case ErrorCode::AlgebraicLoop:
        case ErrorCode::LengthNotPowerOfTwo:
        case ErrorCode::WindowTooShort:
        case ErrorCode::NonmonotoneNonlinearity:
        case ErrorCode::DegenerateIndexSet: return kExitUsage;
        default: return kExitNegative;
    }
}

struct Table {
    std::string name;  // file stem under --out
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

struct Outcome {
    json report = json::object();
    std::optional<Table> table;
    int exit = kExitPass;
    std::string text;  // preformatted text output, replaces the flattened report
};

struct Flags {
    std::string config_path;
    std::string out_dir;
    std::string format = "text";
    std::optional<double> grid_density;
    std::optional<std::uint64_t> seed;
    std::string table1_variant;
    std::string lp_scaling;
    // bound
    std::string channel;
    // sweep
    std::string parameter;
    std::optional<double> from, to, step;
    std::string metric;
    std::optional<int> tap;
    std::optional<double> frequency;
    // reproduce
    std::string experiment;
    bool list = false;
};

namespace detail {

inline json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    json j = io::parse_config(ss.str());
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config root must be an object");
    return j;
}

/// Flag overrides are folded into the config so the manifest shows what ran.
inline json resolve(json cfg, const Flags& f) {
    if (f.grid_density) cfg["grid_density"] = *f.grid_density;
    if (f.seed) cfg["seed"] = *f.seed;
    if (!f.table1_variant.empty()) cfg["table1_variant"] = f.table1_variant;
    if (!f.lp_scaling.empty()) cfg["lp_scaling"] = f.lp_scaling;
    if (!f.channel.empty()) cfg["channel"] = f.channel;
    return cfg;
}

inline RationalTransferFunction plant(const json& cfg) {
    return io::tf_from_json(io::detail::require(cfg, "plant", ""), "plant");
}

inline double slope(const json& cfg) {
    if (!cfg.contains("k")) return 1.0;
    const double k = io::detail::number(cfg.at("k"), "k");
    if (!(k > 0.0)) io::detail::field_error("k", "slope bound must be positive");
    return k;
}

inline Multiplier multiplier(const json& cfg, Domain d) {
    if (!cfg.contains("multiplier")) return TapMultiplier::identity(d);
    return io::multiplier_from_json(cfg.at("multiplier"), "multiplier");
}

inline Table1Variant variant(const json& cfg) {
    if (!cfg.contains("table1_variant")) return Table1Variant::printed;
    const auto s = io::detail::text(cfg.at("table1_variant"), "table1_variant");
    if (s == "printed") return Table1Variant::printed;
    if (s == "eq21") return Table1Variant::eq21;
    io::detail::field_error("table1_variant", "expected \"printed\" or \"eq21\"");
}

inline LpScaling lp_scaling(const json& cfg) {
    if (!cfg.contains("lp_scaling")) return LpScaling::lattice;
    const auto s = io::detail::text(cfg.at("lp_scaling"), "lp_scaling");
    if (s == "lattice") return LpScaling::lattice;
    if (s == "printed") return LpScaling::printed;
    io::detail::field_error("lp_scaling", "expected \"lattice\" or \"printed\"");
}

inline AnalysisOptions analysis(const json& cfg, Domain d) {
    AnalysisOptions opt;
    opt.variant = variant(cfg);
    if (cfg.contains("grid_density")) {
        const double n = io::detail::number(cfg.at("grid_density"), "grid_density");
        if (!(n >= 2.0)) io::detail::field_error("grid_density", "must be at least 2");
        opt.grid = d == Domain::continuous ? continuous_grid(n) : discrete_grid(static_cast<std::size_t>(n));
    }
    return opt;
}

inline int integer(const json& cfg, const std::string& key, int fallback, const std::string& path = "") {
    if (!cfg.contains(key)) return fallback;
    const json& v = cfg.at(key);
    if (!v.is_number_integer()) io::detail::field_error(io::detail::join(path, key), "expected an integer");
    return v.get<int>();
}

inline std::vector<int> integers(const json& j, const std::string& path) {
    if (!j.is_array()) io::detail::field_error(path, "expected an array of integers");
    std::vector<int> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number_integer()) io::detail::field_error(path + "[" + std::to_string(i) + "]", "expected an integer");
        out.push_back(j[i].get<int>());
    }
    return out;
}

inline LuryeSystem system(const json& cfg) {
    LuryeSystem s;
    if (cfg.contains("realization")) {
        s.plant = io::ss_from_json(cfg.at("realization"), "realization");
    } else {
        s.plant = to_state_space(plant(cfg));
    }
    s.phi = cfg.contains("nonlinearity") ? io::nonlinearity_from_json(cfg.at("nonlinearity")) : Nonlinearity::zero();
    if (cfg.contains("r1")) s.r1 = io::signal_from_json(cfg.at("r1"), "r1");
    if (cfg.contains("r2")) s.r2 = io::signal_from_json(cfg.at("r2"), "r2");
    if (cfg.contains("x0")) s.x0 = io::detail::numbers(cfg.at("x0"), "x0");
    s.t0 = io::detail::number_or(cfg, "t0", 0.0, "");
    return s;
}

struct SimSettings {
    double horizon = 0.0;  // steps (z) or seconds (s)
    double step = 1e-3;
    std::size_t record_from = 0;
    std::size_t stride = 1;
};

inline SimSettings sim_settings(const json& cfg, Domain d) {
    SimSettings st;
    const json sim = cfg.value("simulation", json::object());
    st.horizon = io::detail::number_or(sim, "horizon", d == Domain::discrete ? 2000.0 : 100.0, "simulation");
    st.step = io::detail::number_or(sim, "step", 1e-3, "simulation");
    const double from = io::detail::number_or(sim, "record_from", 0.0, "simulation");
    const double stride = io::detail::number_or(sim, "stride", 1.0, "simulation");
    if (!(st.horizon >= 1.0 || (d == Domain::continuous && st.horizon > 0.0)))
        io::detail::field_error("simulation.horizon", "must be positive");
    if (from < 0.0 || stride < 1.0) io::detail::field_error("simulation", "record_from >= 0 and stride >= 1 required");
    st.record_from = static_cast<std::size_t>(from);
    st.stride = static_cast<std::size_t>(stride);
    return st;
}

inline SimulationResult simulate(const LuryeSystem& s, const SimSettings& st, bool keep_states = false) {
    const RecordOptions rec{st.record_from, st.stride, keep_states};
    if (s.plant.domain == Domain::discrete) return simulate_discrete(s, static_cast<std::size_t>(st.horizon), rec);
    return simulate_continuous_rk4(s, st.step, st.horizon, rec);
}

inline Table trace_table(const SimulationResult& r) {
    Table t{"traces", {"time", "y1", "y2", "u1", "u2"}, {}};
    t.rows.reserve(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) t.rows.push_back({r.time[i], r.y1[i], r.y2[i], r.u1[i], r.u2[i]});
    return t;
}

}  // namespace detail

inline Outcome cmd_check(const json& cfg) {
    const auto G = detail::plant(cfg);
    const double k = detail::slope(cfg);
    const auto M = detail::multiplier(cfg, G.domain());
    const auto mem = validate_class_membership(M);
    const auto s = suitability_margin(M, G, k, detail::analysis(cfg, G.domain()));
    Outcome o;
    o.report = io::to_json(s);
    o.report["membership"] = io::to_json(mem);
    o.report["multiplier"] = io::to_json(M);
    o.report["verdict"] = s.suitable && mem.ok() ? "suitable" : "not suitable";
    o.exit = s.suitable && mem.ok() ? kExitPass : kExitNegative;
    return o;
}

inline Outcome cmd_bound(const json& cfg) {
    const auto G = detail::plant(cfg);
    const double k = detail::slope(cfg);
    const auto M = detail::multiplier(cfg, G.domain());
    const auto opt = detail::analysis(cfg, G.domain());
    const std::string ch = cfg.value("channel", std::string("r2->y2"));
    std::vector<Channel> channels;
    if (ch == "all") {
        channels = all_channels();
    } else {
        try {
            channels.push_back(parse_channel(ch));
        } catch (const Error& e) {
            throw Error(ErrorCode::ConfigError, std::string("field 'channel': ") + e.what());
        }
    }
    Outcome o;
    json rows = json::array();
    for (const Channel& c : channels) rows.push_back(io::to_json(gain_bound(M, G, k, c, opt)));
    o.report = {{"multiplier", io::to_json(M)}, {"bounds", rows}};
    return o;
}

inline Outcome cmd_phase_limit(const json& cfg) {
    const auto G = detail::plant(cfg);
    const double k = detail::slope(cfg);
    const auto opt = detail::analysis(cfg, G.domain());
    const double T = io::detail::number(io::detail::require(cfg, "period", ""), "period");
    const int a_max = detail::integer(cfg, "a_max", 10);
    const int b_max = detail::integer(cfg, "b_max", 10);
    const int n_max = detail::integer(cfg, "n_max", 10);
    json witnesses = json::array();
    if (auto w = phase_gap_test(G, T, n_max, k, opt)) witnesses.push_back(io::to_json(*w));
    for (const auto& w : rational_phase_limit_test(G, T, a_max, b_max, k, opt)) witnesses.push_back(io::to_json(w));
    if (cfg.contains("lp")) {
        const json& lp = cfg.at("lp");
        const int beta = detail::integer(lp, "beta", 2, "lp");
        const int l_max = detail::integer(lp, "l_max", 50, "lp");
        std::optional<PhaseLimitWitness> w;
        if (lp.contains("p") || lp.contains("n")) {
            w = lp_phase_limit_test(G, T, beta, detail::integers(io::detail::require(lp, "p", "lp"), "lp.p"),
                                    detail::integers(io::detail::require(lp, "n", "lp"), "lp.n"), l_max, k,
                                    detail::lp_scaling(cfg));
        } else {
            w = lp_phase_limit_search(G, T, beta, detail::integer(lp, "n_max", 1, "lp"), l_max, k, detail::lp_scaling(cfg));
        }
        if (w) witnesses.push_back(io::to_json(*w));
    }
    Outcome o;
    o.report = {{"period", T},
                {"witnesses", witnesses},
                {"all_periods", io::to_json(all_period_limit_test(G, k, opt))},
                {"verdict", witnesses.empty() ? "no phase limitation found" : "no suitable multiplier of this period"}};
    o.exit = witnesses.empty() ? kExitPass : kExitNegative;
    return o;
}

inline Outcome cmd_search(const json& cfg) {
    const auto G = detail::plant(cfg);
    const double k = detail::slope(cfg);
    const json& sj = io::detail::require(cfg, "search", "");
    SearchSpec spec;
    const std::string form = sj.value("form", std::string("one_tap_causal"));
    if (form == "one_tap_causal") spec.form = SearchForm::one_tap_causal;
    else if (form == "one_tap_anticausal") spec.form = SearchForm::one_tap_anticausal;
    else if (form == "altshuller_lattice") spec.form = SearchForm::altshuller_lattice;
    else io::detail::field_error("search.form", "unknown form '" + form + "'");
    spec.spacing = io::detail::number_or(sj, "spacing", 1.0, "search");
    spec.max_taps = detail::integer(sj, "max_taps", 1, "search");
    if (sj.contains("offsets")) spec.offsets = io::detail::numbers(sj.at("offsets"), "search.offsets");
    spec.step = io::detail::number_or(sj, "step", 0.01, "search");
    spec.coeff_max = io::detail::number_or(sj, "coeff_max", 0.99, "search");
    SearchObjective obj;
    const std::string kind = sj.value("objective", std::string("margin"));
    if (kind == "bound") obj.kind = SearchObjective::Kind::bound;
    else if (kind != "margin") io::detail::field_error("search.objective", "expected \"margin\" or \"bound\"");
    obj.channel = parse_channel(cfg.value("channel", std::string("r2->y2")));
    Outcome o;
    o.report = io::to_json(search_multiplier(G, k, spec, obj, detail::analysis(cfg, G.domain())));
    return o;
}

inline Outcome cmd_simulate(const json& cfg) {
    const LuryeSystem s = detail::system(cfg);
    const auto st = detail::sim_settings(cfg, s.plant.domain);
    const auto r = detail::simulate(s, st);
    Outcome o;
    o.report = {{"domain", to_string(r.domain)},
                {"step", r.step},
                {"steps", r.steps},
                {"recorded", r.size()},
                {"final_state", r.final_state}};
    if (r.size() > 0) {
        double peak = 0.0;
        for (double v : r.y2) peak = std::max(peak, std::abs(v));
        o.report["y2_peak"] = peak;
        o.report["y2_tail_mean"] = bias_estimate(r.y2);
    }
    if (cfg.contains("period")) {
        const json& pj = cfg.at("period");
        const double base = io::detail::number(io::detail::require(pj, "base", "period"), "period.base");
        const double P = r.domain == Domain::discrete ? base : base / (r.step * static_cast<double>(r.stride));
        const auto pr = detect_period(r.y2, P, detail::integer(pj, "m_max", 3, "period"),
                                      io::detail::number_or(pj, "tol", r.domain == Domain::discrete ? 1e-6 : 1e-4, "period"),
                                      io::detail::number_or(pj, "discard", 0.5, "period"));
        o.report["period"] = {{"multiple", pr.multiple ? json(*pr.multiple) : json("aperiodic")},
                              {"residual", pr.residual},
                              {"amplitude", pr.amplitude}};
    }
    o.table = detail::trace_table(r);
    return o;
}

inline Outcome cmd_lyapunov(const json& cfg) {
    const LuryeSystem s = detail::system(cfg);
    const json lj = cfg.value("lyapunov", json::object());
    const double horizon = io::detail::number_or(lj, "horizon", 1e6, "lyapunov");
    const double d0 = io::detail::number_or(lj, "d0", 1e-8, "lyapunov");
    const double discard = io::detail::number_or(lj, "discard", 1000.0, "lyapunov");
    if (!(horizon >= 1.0) || discard < 0.0) io::detail::field_error("lyapunov", "horizon >= 1 and discard >= 0 required");
    const auto r = lyapunov_exponent(s, static_cast<std::size_t>(horizon), d0, static_cast<std::size_t>(discard));
    Outcome o;
    o.report = {{"exponent", r.exponent}, {"steps", r.steps}, {"d0", d0}, {"discard", static_cast<std::size_t>(discard)}};
    return o;
}

inline Outcome cmd_power(const json& cfg) {
    const LuryeSystem s = detail::system(cfg);
    auto st = detail::sim_settings(cfg, s.plant.domain);
    const json pj = cfg.value("power", json::object());
    const bool discrete = s.plant.domain == Domain::discrete;
    const double discard = io::detail::number_or(pj, "discard", discrete ? 1000.0 : 50.0, "power");
    st.record_from = discrete ? static_cast<std::size_t>(discard) : static_cast<std::size_t>(std::llround(discard / st.step));
    st.stride = 1;
    const auto r = detail::simulate(s, st);
    if (r.size() == 0) io::detail::field_error("power.discard", "discards the whole horizon");
    std::vector<double> r2(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) r2[i] = s.r2(r.time[i]);

    const std::string mode = pj.value("mode", std::string("tail_average"));
    PowerMode pm = PowerMode::tail_average;
    double P = 0.0;
    if (mode == "period_exact") {
        pm = PowerMode::period_exact;
        const double base = io::detail::number(io::detail::require(pj, "period", "power"), "power.period");
        P = discrete ? base : base / st.step;
    } else if (mode != "tail_average") {
        io::detail::field_error("power.mode", "expected \"tail_average\" or \"period_exact\"");
    }
    const int m_max = detail::integer(pj, "m_max", 64, "power");
    const double tol = io::detail::number_or(pj, "tol", discrete ? 1e-6 : 1e-4, "power");
    const double pr = power_seminorm(r2, pm, P, m_max, tol);
    const double py = power_seminorm(r.y2, pm, P, m_max, tol);
    Outcome o;
    o.report = {{"mode", mode},
                {"samples", r.size()},
                {"r2_power", pr},
                {"y2_power", py},
                {"ratio", pr > 0.0 ? json(py / pr) : json("undefined")},
                {"y2_bias", bias_estimate(r.y2)}};
    if (pj.contains("decompose_period")) {
        const int per = detail::integer(pj, "decompose_period", 1, "power");
        if (per < 1) io::detail::field_error("power.decompose_period", "must be positive");
        const auto d = decompose_periodic(r.y2, static_cast<std::size_t>(per));
        o.report["periodic_power"] = d.periodic_power;
        o.report["variation_power"] = d.residual_power;
        o.report["periods"] = d.periods;
    }
    if (pj.contains("bound")) {
        const double h = io::detail::number(pj.at("bound"), "power.bound");
        const bool ok = py <= h * pr + 1e-6;
        o.report["bound"] = h;
        o.report["within_bound"] = ok;
        if (!ok) o.exit = kExitNegative;
    }
    if (pj.contains("spectrum_length")) {
        const int L = detail::integer(pj, "spectrum_length", 0, "power");
        if (L < 1) io::detail::field_error("power.spectrum_length", "must be positive");
        const auto sp = spectrum(r.y2, static_cast<std::size_t>(L));
        o.report["parseval_residual"] = sp.parseval_residual;
        Table t{"spectrum", {"bin", "frequency", "magnitude"}, {}};
        const double scale = discrete ? 1.0 : 1.0 / st.step;  // cycles per time unit
        for (std::size_t b = 0; b < sp.length(); ++b)
            t.rows.push_back({static_cast<double>(b), sp.frequency(b) * scale, sp.magnitude[b]});
        o.table = std::move(t);
    }
    return o;
}

inline Outcome cmd_sweep(const json& cfg, const Flags& f) {
    const json sj = cfg.value("sweep", json::object());
    const std::string param = !f.parameter.empty() ? f.parameter : sj.value("parameter", std::string());
    const double from = f.from ? *f.from : io::detail::number_or(sj, "from", std::nan(""), "sweep");
    const double to = f.to ? *f.to : io::detail::number_or(sj, "to", std::nan(""), "sweep");
    const double step = f.step ? *f.step : io::detail::number_or(sj, "step", std::nan(""), "sweep");
    const std::string metric = !f.metric.empty() ? f.metric : sj.value("metric", std::string("margin"));
    const int tap = f.tap ? *f.tap : detail::integer(sj, "tap", 0, "sweep");
    if (param != "gain" && param != "coefficient" && param != "theta" && param != "period" && param != "frequency")
        throw Error(ErrorCode::ConfigError, "sweep parameter must be one of gain, coefficient, theta, period, frequency");
    if (metric != "margin" && metric != "bound" && metric != "phase")
        throw Error(ErrorCode::ConfigError, "sweep metric must be one of margin, bound, phase");
    if (!std::isfinite(from) || !std::isfinite(to) || !std::isfinite(step) || !(step > 0.0) || to < from)
        throw Error(ErrorCode::EmptyRange, "sweep range is empty (need finite from <= to and step > 0)");
    const auto count = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;

    const auto G0 = detail::plant(cfg);
    const double k = detail::slope(cfg);
    const double ik = inverse_slope(k);
    const auto M0 = detail::multiplier(cfg, G0.domain());
    const auto opt = detail::analysis(cfg, G0.domain());
    const Channel channel = parse_channel(cfg.value("channel", std::string("r2->y2")));

    Table t{"sweep", {}, {}};
    if (param == "frequency") {
        t.header = {"frequency", "re_G", "im_G", "phase", "re_M_shifted"};
        const PhaseProfile prof([&](double w) { return ik + G0(w); },
                                refine_by_phase(default_grid(G0.domain()), [&](double w) { return ik + G0(w); }));
        for (std::size_t i = 0; i < count; ++i) {
            const double w = from + static_cast<double>(i) * step;
            const Complex g = G0(w);
            t.rows.push_back({w, g.real(), g.imag(), prof.at(w),
                              (multiplier_frequency_response(M0, w) * (ik + g)).real()});
        }
    } else {
        t.header = {param, metric, "suitable"};
        for (std::size_t i = 0; i < count; ++i) {
            const double v = from + static_cast<double>(i) * step;
            RationalTransferFunction G = G0;
            Multiplier M = M0;
            if (param == "gain") {
                G = G0.with_gain(v);
            } else {
                auto* tm = std::get_if<TapMultiplier>(&M);
                if (!tm) throw Error(ErrorCode::ConfigError, "sweep parameter '" + param + "' needs a tap multiplier");
                if (param == "coefficient") {
                    if (tap < 0 || static_cast<std::size_t>(tap) >= tm->taps.size())
                        throw Error(ErrorCode::ConfigError, "sweep tap index out of range");
                    tm->taps[static_cast<std::size_t>(tap)].coeff = v;
                } else {
                    const double base = tm->period > 0.0 ? tm->period : 1.0;
                    const double factor = param == "theta" ? v : v / base;
                    for (Tap& tp : tm->taps) tp.offset *= factor;
                    tm->period = base * factor;
                }
            }
            const auto s = suitability_margin(M, G, k, opt);
            double value = s.margin;
            if (metric == "bound") {
                value = s.suitable ? gain_bound(M, G, k, channel, opt).bound : std::nan("");
            } else if (metric == "phase") {
                const double w = f.frequency ? *f.frequency : io::detail::number_or(sj, "frequency", 1.0, "sweep");
                value = std::arg(ik + G(w));
            }
            t.rows.push_back({v, value, s.suitable ? 1.0 : 0.0});
        }
    }
    Outcome o;
    o.report = {{"parameter", param}, {"metric", metric}, {"points", count}};
    o.table = std::move(t);
    return o;
}

inline Outcome cmd_reproduce(const Flags& f) {
    Outcome o;
    if (f.list || f.experiment.empty()) {
        json names = json::array();
        std::ostringstream text;
        for (const auto& s : experiments::registry()) {
            names.push_back({{"name", s.name}, {"summary", s.summary}});
            text << s.name << "  " << s.summary << "\n";
        }
        o.report = {{"experiments", names}};
        o.text = text.str();
        if (!f.list) throw Error(ErrorCode::UnknownExperiment, "no experiment named; use --list");
        return o;
    }
    experiments::RunOptions run;
    run.grid_density = f.grid_density;
    run.seed = f.seed;
    if (f.table1_variant == "eq21") run.variant = Table1Variant::eq21;
    if (f.lp_scaling == "printed") run.lp_scaling = LpScaling::printed;
    std::vector<std::string> names;
    if (f.experiment == "all") {
        for (const auto& s : experiments::registry()) names.push_back(s.name);
    } else {
        names.push_back(experiments::find(f.experiment).name);
    }
    json reports = json::array();
    std::ostringstream text;
    bool all = true;
    for (const auto& name : names) {
        const auto rep = experiments::run_experiment(name, run);
        reports.push_back(experiments::to_json(rep));
        all = all && rep.pass();
        text << name << "\n";
        for (const auto& q : rep.rows) {
            text << "  " << (q.pass ? "PASS" : "FAIL") << "  " << std::left << std::setw(30) << q.expected.quantity
                 << " measured " << std::setw(14) << std::setprecision(8) << q.measured << " expected "
                 << experiments::to_string(q.expected.comparison) << " " << q.expected.value;
            if (q.expected.comparison == experiments::Comparison::within)
                text << " +/- " << q.expected.tolerance;
            else if (q.expected.comparison == experiments::Comparison::sig_figs)
                text << " (" << q.expected.tolerance << " s.f.)";
            text << "  [" << experiments::to_string(q.expected.provenance) << "]\n";
        }
    }
    o.report = names.size() == 1 ? reports.front() : json{{"experiments", reports}, {"pass", all}};
    o.text = text.str();
    o.exit = all ? kExitPass : kExitNegative;
    return o;
}

namespace detail {

inline void flatten(const json& j, const std::string& prefix, std::ostream& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (j.is_array() && !j.empty() && (j.front().is_object() || j.front().is_array())) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", out);
    } else {
        out << prefix << " = " << (j.is_string() ? j.get<std::string>() : j.dump()) << "\n";
    }
}

inline void write_csv(const Table& t, std::ostream& out) {
    for (std::size_t i = 0; i < t.header.size(); ++i) out << (i ? "," : "") << t.header[i];
    out << "\n" << std::setprecision(17);
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

inline void emit(const Outcome& o, const std::string& format, std::ostream& out) {
    if (format == "json") {
        out << o.report.dump(2) << "\n";
    } else if (format == "csv") {
        if (o.table) {
            write_csv(*o.table, out);
        } else {
            std::ostringstream flat;
            flatten(o.report, "", flat);
            out << "key,value\n";
            std::string line;
            std::istringstream in(flat.str());
            while (std::getline(in, line)) {
                const auto eq = line.find(" = ");
                out << line.substr(0, eq) << "," << line.substr(eq + 3) << "\n";
            }
        }
    } else if (!o.text.empty()) {
        out << o.text;
    } else {
        flatten(o.report, "", out);
        if (o.table) out << o.table->name << " rows = " << o.table->rows.size() << "\n";
    }
}

inline void write_outputs(const Outcome& o, const std::string& dir, const std::string& command, const json& config,
                          const std::vector<std::string>& args) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::ConfigError, "cannot create output directory '" + dir + "'");
    json files = json::array({"report.json"});
    {
        std::ofstream f(fs::path(dir) / "report.json");
        f << o.report.dump(2) << "\n";
    }
    if (o.table) {
        const std::string name = o.table->name + ".csv";
        std::ofstream f(fs::path(dir) / name);
        write_csv(*o.table, f);
        files.push_back(name);
    }
    json manifest = {{"tool", "lurye"},
                     {"version", kVersion},
                     {"command", command},
                     {"arguments", args},
                     {"config", config},
                     {"seed", config.contains("seed") ? config.at("seed") : json(nullptr)},
                     {"exit_code", o.exit},
                     {"files", files}};
    std::ofstream f(fs::path(dir) / "manifest.json");
    f << manifest.dump(2) << "\n";
}

}  // namespace detail

/// Full program. Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Lurye system analysis: multipliers, gain bounds, phase limits and simulation", "lurye"};
    app.require_subcommand(1, 1);
    Flags f;

    auto common = [&](CLI::App* sub, bool needs_config) {
        auto* c = sub->add_option("--config", f.config_path, "JSON configuration file");
        if (needs_config) c->required()->check(CLI::ExistingFile);
        sub->add_option("--out", f.out_dir, "directory for report.json, CSV tables and manifest.json");
        sub->add_option("--format", f.format, "stdout format")->check(CLI::IsMember({"json", "text", "csv"}));
        sub->add_option("--grid-density", f.grid_density, "points per decade (continuous) or total points (discrete)");
        sub->add_option("--seed", f.seed, "seed for randomized inputs");
        sub->add_option("--table1-variant", f.table1_variant, "r2->u2 constant term")
            ->check(CLI::IsMember({"printed", "eq21"}));
        sub->add_option("--lp-scaling", f.lp_scaling, "exponent scaling of the LP phase test")
            ->check(CLI::IsMember({"lattice", "printed"}));
    };

    auto* check = app.add_subcommand("check", "suitability margin of a multiplier for 1/k + G");
    auto* bound = app.add_subcommand("bound", "closed-loop gain bound for one channel or all");
    auto* phase = app.add_subcommand("phase-limit", "phase-limitation witnesses for Altshuller multipliers");
    auto* search = app.add_subcommand("search", "grid search for a suitable multiplier");
    auto* simulate = app.add_subcommand("simulate", "simulate the loop and export traces");
    auto* lyap = app.add_subcommand("lyapunov", "largest Lyapunov exponent of a discrete loop");
    auto* power = app.add_subcommand("power", "power seminorms, decomposition and spectrum of a simulated loop");
    auto* sweep = app.add_subcommand("sweep", "sweep a parameter and tabulate a metric");
    auto* repro = app.add_subcommand("reproduce", "run a registered experiment and compare with expected values");
    for (auto* s : {check, bound, phase, search, simulate, lyap, power}) common(s, true);
    common(sweep, true);
    common(repro, false);
    bound->add_option("--channel", f.channel, "channel such as r2->y2, or all");
    sweep->add_option("--parameter", f.parameter, "gain, coefficient, theta, period or frequency");
    sweep->add_option("--from", f.from, "first value");
    sweep->add_option("--to", f.to, "last value");
    sweep->add_option("--step", f.step, "increment");
    sweep->add_option("--metric", f.metric, "margin, bound or phase");
    sweep->add_option("--tap", f.tap, "tap index for coefficient sweeps");
    sweep->add_option("--frequency", f.frequency, "frequency for the phase metric");
    sweep->add_option("--channel", f.channel, "channel for the bound metric");
    repro->add_option("name", f.experiment, "experiment name, or all");
    repro->add_flag("--list", f.list, "list registered experiments");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitPass : kExitUsage;
    }

    const std::vector<std::string> args(argv + 1, argv + argc);
    CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    try {
        const json cfg = detail::resolve(detail::load_config(f.config_path), f);
        Outcome o;
        if (command == "check") o = cmd_check(cfg);
        else if (command == "bound") o = cmd_bound(cfg);
        else if (command == "phase-limit") o = cmd_phase_limit(cfg);
        else if (command == "search") o = cmd_search(cfg);
        else if (command == "simulate") o = cmd_simulate(cfg);
        else if (command == "lyapunov") o = cmd_lyapunov(cfg);
        else if (command == "power") o = cmd_power(cfg);
        else if (command == "sweep") o = cmd_sweep(cfg, f);
        else o = cmd_reproduce(f);
        detail::emit(o, f.format, out);
        if (!f.out_dir.empty()) detail::write_outputs(o, f.out_dir, command, cfg, args);
        return o.exit;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const json::exception& e) {
        err << "error: ConfigError: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitNegative;
    }
}

}  // namespace lurye::cli
