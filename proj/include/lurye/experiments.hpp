#pragma once

// Registry of reproducible experiments. Each entry holds its system
// configuration and the expected values with tolerances and provenance.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lurye/attractors.hpp"
#include "lurye/json_io.hpp"
#include "lurye/multipliers.hpp"
#include "lurye/simulation.hpp"
#include "lurye/stability.hpp"

namespace lurye::experiments {

using json = nlohmann::json;

enum class Provenance { paper, derived, trivial };

[[nodiscard]] inline std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::paper: return "paper";
        case Provenance::derived: return "derived";
        case Provenance::trivial: return "trivial";
    }
    return "unknown";
}

/// within: |m - v| <= tol; sig_figs: m rounded to tol significant figures equals v;
/// below/above: strict m < v / m > v; at_least/at_most: m >= v / m <= v; flag: m == v.
enum class Comparison { within, sig_figs, below, above, at_least, at_most, flag };

[[nodiscard]] inline std::string to_string(Comparison c) {
    static constexpr const char* names[] = {"within", "sig_figs", "below", "above", "at_least", "at_most", "flag"};
    return names[static_cast<int>(c)];
}

struct Expectation {
    std::string quantity;
    double value = 0.0;
    double tolerance = 0.0;
    Comparison comparison = Comparison::within;
    Provenance provenance = Provenance::paper;
};

struct ExperimentSpec {
    std::string name;
    std::string summary;
    json system;
    std::vector<Expectation> expected;
};

struct RunOptions {
    std::optional<double> grid_density;  // points per decade (s) or total points (z)
    Table1Variant variant = Table1Variant::printed;
    LpScaling lp_scaling = LpScaling::lattice;
    std::optional<std::uint64_t> seed;
};

struct QuantityResult {
    Expectation expected;
    double measured = 0.0;
    bool pass = false;
};

struct ExperimentReport {
    std::string name;
    std::vector<QuantityResult> rows;
    json details;

    [[nodiscard]] bool pass() const {
        return std::all_of(rows.begin(), rows.end(), [](const QuantityResult& r) { return r.pass; });
    }
};

[[nodiscard]] inline double round_sig(double v, int figs) {
    if (v == 0.0 || !std::isfinite(v)) return v;
    const double mag = std::floor(std::log10(std::abs(v)));
    const double scale = std::pow(10.0, static_cast<double>(figs - 1) - mag);
    return std::round(v * scale) / scale;
}

[[nodiscard]] inline bool compare(const Expectation& e, double m) {
    if (std::isnan(m)) return false;
    switch (e.comparison) {
        case Comparison::within: return std::abs(m - e.value) <= e.tolerance;
        case Comparison::sig_figs: {
            const int figs = static_cast<int>(e.tolerance);
            return std::abs(round_sig(m, figs) - e.value) <= 1e-9 * std::abs(e.value);
        }
        case Comparison::below: return m < e.value;
        case Comparison::above: return m > e.value;
        case Comparison::at_least: return m >= e.value;
        case Comparison::at_most: return m <= e.value;
        case Comparison::flag: return m == e.value;
    }
    return false;
}

namespace detail {

inline json fromion_plant(double g) {
    return {{"domain", "s"}, {"num", {1.0}}, {"den", {1.0, 100.1, 11.0, 100.0}}, {"g", g}};
}

inline json discrete_plant(double g) {
    return {{"domain", "z"}, {"num", {2.0, 0.92}}, {"den", {1.0, -0.5, 0.0}}, {"g", g}};
}

/// Realization x1+ = 0.5 x1 + 2g u, x2+ = x1, y = x1 + 0.46 x2.
inline json discrete_realization(double g) {
    return {{"domain", "z"},
            {"A", {{0.5, 0.0}, {1.0, 0.0}}},
            {"B", {2.0 * g, 0.0}},
            {"C", {1.0, 0.46}},
            {"D", 0.0}};
}

inline json excitation_table() {
    return {{"kind", "periodic_table"}, {"samples", {1.0, 0.6, -0.6, -1.0, 0.0}}, {"sample_time", 1.0}};
}

inline Expectation paper(std::string q, double v, double tol, Comparison c = Comparison::within) {
    return {std::move(q), v, tol, c, Provenance::paper};
}

inline Expectation derived(std::string q, double v, double tol, Comparison c = Comparison::within) {
    return {std::move(q), v, tol, c, Provenance::derived};
}

inline AnalysisOptions analysis_options(const RunOptions& run, Domain d) {
    AnalysisOptions opt;
    opt.variant = run.variant;
    if (run.grid_density) {
        opt.grid = d == Domain::continuous ? continuous_grid(*run.grid_density)
                                           : discrete_grid(static_cast<std::size_t>(*run.grid_density));
    }
    return opt;
}

inline double slope_of(const json& sys) {
    return sys.contains("k") ? io::detail::number(sys.at("k"), "k") : 1.0;
}

}  // namespace detail

[[nodiscard]] inline const std::vector<ExperimentSpec>& registry() {
    using detail::derived;
    using detail::paper;
    static const std::vector<ExperimentSpec> specs = [] {
        std::vector<ExperimentSpec> v;

        v.push_back({"circle-threshold-fromion",
                     "largest gain g for which Re[1 + g G] > 0 on the third-order plant",
                     {{"plant", detail::fromion_plant(1.0)}, {"k", 1.0}, {"probe_below", 20.7}, {"probe_above", 20.85}},
                     {paper("critical_gain", 20.77, 0.01), derived("suitable_below", 1, 0, Comparison::flag),
                      derived("suitable_above", 0, 0, Comparison::flag)}});

        v.push_back({"altshuller-threshold-fromion",
                     "phase limits of Altshuller multipliers with period pi and the theta band at g = 50",
                     {{"plant", detail::fromion_plant(1.0)},
                      {"k", 1.0},
                      {"period", std::numbers::pi},
                      {"a_max", 10},
                      {"b_max", 10},
                      {"band_gain", 50.0},
                      {"band_coefficient", 0.82},
                      {"band_theta", {1.00, 1.01, 1.02, 1.03, 1.04, 1.05, 1.06, 1.07, 1.08}},
                      {"outside_theta", {0.99, 1.09}},
                      {"lp_gain", 80.0},
                      {"lp_beta", 5},
                      {"gap_gain", 909.0}},
                     {paper("rational_threshold", 73.37, 0.01), paper("binding_frequency", 1.2, 0.01),
                      paper("phase_crossing_frequency", 1.01, 0.005),
                      paper("band_suitable_count", 9, 0, Comparison::flag),
                      derived("outside_suitable_count", 0, 0, Comparison::flag),
                      derived("lp_witness_found", 1, 0, Comparison::flag),
                      derived("gap_witness_found", 1, 0, Comparison::flag)}});

        v.push_back({"fromion-attractors",
                     "saturation loop at g = 909 forced by sin(2t): attractors over the initial-state grid",
                     {{"plant", detail::fromion_plant(909.0)},
                      {"nonlinearity", {{"kind", "saturation"}, {"limit", 1.0}}},
                      {"r2", {{"kind", "sinusoid"}, {"amplitude", 1.0}, {"frequency", 2.0}, {"phase", 0.0}}},
                      {"hunt", {{"samples_per_period", 3142}, {"stage_periods", 64}, {"max_periods", 1280},
                                {"scales", {1.0, 10.0, 100.0}}}}},
                     {paper("period_pi_attractors", 2, 0, Comparison::at_least),
                      paper("contact_free_attractors", 1, 0, Comparison::at_least),
                      derived("unsettled_runs", 0, 0, Comparison::flag)}});

        v.push_back({"fromion-subharmonic",
                     "deadzone loop at g = 909 forced by sin(2t): period-3pi attractors and their pairing",
                     {{"plant", detail::fromion_plant(909.0)},
                      {"nonlinearity", {{"kind", "deadzone"}, {"width", 0.5}}},
                      {"r2", {{"kind", "sinusoid"}, {"amplitude", 1.0}, {"frequency", 2.0}, {"phase", 0.0}}},
                      {"hunt", {{"samples_per_period", 3142}, {"stage_periods", 64}, {"max_periods", 1280},
                                {"scales", {1.0, 10.0, 100.0}}}}},
                     {paper("period_3pi_attractors", 1, 0, Comparison::at_least),
                      paper("pair_residual_shift_pi", 1e-2, 0, Comparison::below),
                      derived("pair_residual_shift_half_pi", 1e-2, 0, Comparison::below)}});

        ExperimentSpec t2{"table2-bounds",
                          "r2 -> y2 gain bounds of the tabulated multipliers for the discrete plant",
                          {{"plant", detail::discrete_plant(1.0)},
                           {"k", 1.0},
                           {"rows",
                            {{{"g", 0.6}, {"taps", {{1, 0.68}}}, {"class", "ozf"}},
                             {{"g", 0.7}, {"taps", {{1, 0.91}}}, {"class", "ozf"}},
                             {{"g", 0.8}, {"taps", {{1, 0.99}}}, {"class", "ozf"}},
                             {{"g", 0.9}, {"taps", {{1, 0.99}}}, {"class", "ozf"}},
                             {{"g", 0.6}, {"taps", {{-1, -0.57}}}, {"class", "ozf_odd"}},
                             {{"g", 0.7}, {"taps", {{-1, -0.64}}}, {"class", "ozf_odd"}},
                             {{"g", 0.8}, {"taps", {{-1, -0.72}}}, {"class", "ozf_odd"}},
                             {{"g", 0.9}, {"taps", {{-1, -0.79}}}, {"class", "ozf_odd"}},
                             {{"g", 1.0}, {"taps", {{-1, -0.87}}}, {"class", "ozf_odd"}}}}},
                          {}};
        const double bounds[] = {3.76, 5.73, 10.96, 121.28, 3.39, 4.69, 7.07, 12.42, 31.74};
        const char* labels[] = {"ozf_g0.6",     "ozf_g0.7",     "ozf_g0.8",     "ozf_g0.9",    "ozf_odd_g0.6",
                                "ozf_odd_g0.7", "ozf_odd_g0.8", "ozf_odd_g0.9", "ozf_odd_g1.0"};
        for (int i = 0; i < 9; ++i) t2.expected.push_back(paper(std::string("bound_") + labels[i], bounds[i], 0.01));
        t2.expected.push_back(paper("identity_bound_g0.6", 12.76, 0.01));
        t2.expected.push_back(paper("circle_suitable_g0.6", 1, 0, Comparison::flag));
        t2.expected.push_back(paper("circle_suitable_g1.0", 0, 0, Comparison::flag));
        v.push_back(std::move(t2));

        ExperimentSpec g7{"g07-steady-state",
                          "g = 0.7 deadzone loop under the 5-periodic excitation",
                          {{"realization", detail::discrete_realization(0.7)},
                           {"plant", detail::discrete_plant(0.7)},
                           {"nonlinearity", {{"kind", "deadzone"}, {"width", 0.2}}},
                           {"r2", detail::excitation_table()},
                           {"x0", {0.0, 0.0}},
                           {"horizon", 2000},
                           {"offset_bound", 5.73}},
                          {}};
        const double cycle[] = {0.2282, -0.2861, -0.6895, 0.0, 0.7464};
        for (int i = 0; i < 5; ++i) g7.expected.push_back(paper("cycle_" + std::to_string(i), cycle[i], 5e-5));
        g7.expected.push_back(paper("r2_power", 0.7376, 5e-5));
        g7.expected.push_back(paper("y2_power", 0.4830, 5e-5));
        g7.expected.push_back(paper("power_ratio", 5.73, 0, Comparison::below));
        g7.expected.push_back(paper("lyapunov_exponent", 0.0, 0, Comparison::below));
        g7.expected.push_back(paper("period_multiple", 1, 0, Comparison::flag));
        v.push_back(std::move(g7));

        v.push_back({"g09-chaos",
                     "g = 0.9 deadzone loop under the 5-periodic excitation",
                     {{"realization", detail::discrete_realization(0.9)},
                      {"nonlinearity", {{"kind", "deadzone"}, {"width", 0.2}}},
                      {"r2", detail::excitation_table()},
                      {"x0", {0.0, 0.0}},
                      {"horizon", 1000000},
                      {"discard", 1000},
                      {"fft_length", 65536},
                      {"comb_period", 40},
                      {"top_peaks", 12}},
                     {paper("lyapunov_exponent", 0.012, 0.003), paper("aperiodic_at_period_5", 1, 0, Comparison::flag),
                      paper("periodic_power", 0.41, 2, Comparison::sig_figs),
                      paper("variation_power", 5.1e-4, 2, Comparison::sig_figs),
                      paper("top_peaks_on_period40_comb", 12, 0, Comparison::flag),
                      derived("subharmonic_peak_ratio", 0.01, 0, Comparison::at_least),
                      derived("broadband_floor_ratio", 0.05, 0, Comparison::at_least)}});

        v.push_back({"g07-attractor-uniqueness",
                     "g = 0.7: Altshuller certificates and convergence of random initial states to one cycle",
                     {{"realization", detail::discrete_realization(0.7)},
                      {"plant", detail::discrete_plant(0.7)},
                      {"k", 1.0},
                      {"nonlinearity", {{"kind", "deadzone"}, {"width", 0.2}}},
                      {"r2", detail::excitation_table()},
                      {"certificate_a5", {{"domain", "z"}, {"taps", {{5, 0.16}, {-10, 0.04}}}, {"class", "altshuller"},
                                          {"period", 5}}},
                      {"certificate_a3", {{"domain", "z"}, {"taps", {{-3, 0.2}}}, {"class", "altshuller"}, {"period", 3}}},
                      {"initial_states", 20},
                      {"state_radius", 10.0},
                      {"seed", 7},
                      {"horizon", 3000}},
                     {paper("a5_suitable", 1, 0, Comparison::flag), paper("a3_suitable", 1, 0, Comparison::flag),
                      paper("even_period_limited", 1, 0, Comparison::flag),
                      paper("max_cycle_deviation", 1e-8, 0, Comparison::at_most)}});
        return v;
    }();
    return specs;
}

[[nodiscard]] inline const ExperimentSpec& find(const std::string& name) {
    for (const auto& s : registry())
        if (s.name == name) return s;
    throw Error(ErrorCode::UnknownExperiment, "no experiment named '" + name + "'");
}

struct Outcome {
    std::map<std::string, double> values;
    json details = json::object();
};

namespace detail {

inline Outcome run_circle(const json& sys, const RunOptions& run) {
    const auto G = io::tf_from_json(sys.at("plant"));
    const double k = slope_of(sys);
    const auto opt = analysis_options(run, G.domain());
    const auto cg = circle_critical_gain(G, k, opt);
    Outcome o;
    o.values["critical_gain"] = cg.value;
    o.values["suitable_below"] = circle_criterion(G.with_gain(sys.at("probe_below").get<double>()), k, opt).passes;
    o.values["suitable_above"] = circle_criterion(G.with_gain(sys.at("probe_above").get<double>()), k, opt).passes;
    o.details["critical_gain"] = io::to_json(cg);
    return o;
}

inline Outcome run_altshuller(const json& sys, const RunOptions& run) {
    const auto G = io::tf_from_json(sys.at("plant"));
    const double k = slope_of(sys);
    const double T = sys.at("period").get<double>();
    const auto opt = analysis_options(run, G.domain());
    Outcome o;

    const auto th = rational_phase_threshold(G, T, sys.at("a_max").get<int>(), sys.at("b_max").get<int>(), k, opt);
    o.values["rational_threshold"] = th.gain.value;
    o.values["binding_frequency"] = th.binding ? th.binding->frequencies.front() : std::nan("");
    o.details["rational_threshold"] = io::to_json(th.gain);
    if (th.binding) o.details["binding_witness"] = io::to_json(*th.binding);

    const double gb = sys.at("band_gain").get<double>();
    const auto ap = all_period_limit_test(G.with_gain(gb), k, opt);
    o.values["phase_crossing_frequency"] = ap.first_crossing_w.value_or(std::nan(""));
    o.details["all_period"] = io::to_json(ap);

    const double c = sys.at("band_coefficient").get<double>();
    auto band = [&](const json& thetas, const char* key) {
        int count = 0;
        json rows = json::array();
        for (const auto& t : thetas) {
            const double theta = t.get<double>();
            const double period = 2.0 * theta * std::numbers::pi;
            const TapMultiplier M{Domain::continuous, {{period, c}}, MultiplierClass::altshuller, period};
            const auto s = suitability_margin(M, G.with_gain(gb), k, opt);
            count += s.suitable ? 1 : 0;
            rows.push_back({{"theta", theta}, {"margin", s.margin}, {"suitable", s.suitable}});
        }
        o.details[key] = rows;
        return count;
    };
    o.values["band_suitable_count"] = band(sys.at("band_theta"), "band");
    o.values["outside_suitable_count"] = band(sys.at("outside_theta"), "outside_band");

    const auto lp = lp_phase_limit_search(G.with_gain(sys.at("lp_gain").get<double>()), T, sys.at("lp_beta").get<int>(),
                                          1, 50, k, run.lp_scaling);
    o.values["lp_witness_found"] = lp.has_value();
    if (lp) o.details["lp_witness"] = io::to_json(*lp);

    const auto gap = phase_gap_test(G.with_gain(sys.at("gap_gain").get<double>()), T, 10, k, opt);
    o.values["gap_witness_found"] = gap.has_value();
    if (gap) o.details["gap_witness"] = io::to_json(*gap);
    return o;
}

inline HuntResult run_hunt(const json& sys) {
    LuryeSystem base{to_state_space(io::tf_from_json(sys.at("plant"))), io::nonlinearity_from_json(sys.at("nonlinearity")),
                     SignalSpec::zero(), io::signal_from_json(sys.at("r2"), "r2"), {}};
    HuntOptions h;
    const json& hj = sys.at("hunt");
    h.samples_per_period = hj.at("samples_per_period").get<std::size_t>();
    h.stage_periods = hj.at("stage_periods").get<std::size_t>();
    h.max_periods = hj.at("max_periods").get<std::size_t>();
    h.scales = hj.at("scales").get<std::vector<double>>();
    return hunt_attractors(base, h);
}

inline json hunt_details(const HuntResult& r) {
    json atts = json::array();
    for (const auto& a : r.attractors)
        atts.push_back({{"multiple", a.multiple},
                        {"amplitude", a.amplitude},
                        {"input_peak", a.input_peak},
                        {"members", a.members.size()}});
    double longest = 0.0;
    for (const auto& run : r.runs) longest = std::max(longest, run.horizon);
    return {{"initial_states", r.runs.size()}, {"unsettled", r.unsettled}, {"longest_horizon", longest},
            {"attractors", atts}};
}

inline Outcome run_attractors(const json& sys, const RunOptions&) {
    const auto hunt = run_hunt(sys);
    const double limit = sys.at("nonlinearity").value("limit", 1.0);
    Outcome o;
    int period_pi = 0, contact_free = 0;
    for (const auto& a : hunt.attractors) {
        if (a.multiple != 1) continue;
        ++period_pi;
        if (a.input_peak < limit) ++contact_free;
    }
    o.values["period_pi_attractors"] = period_pi;
    o.values["contact_free_attractors"] = contact_free;
    o.values["unsettled_runs"] = static_cast<double>(hunt.unsettled);
    o.details = hunt_details(hunt);
    return o;
}

inline Outcome run_subharmonic(const json& sys, const RunOptions&) {
    const auto hunt = run_hunt(sys);
    const std::size_t P = hunt.options.samples_per_period;
    Outcome o;
    int sub = 0;
    for (const auto& a : hunt.attractors) sub += a.multiple == 3 ? 1 : 0;
    o.values["period_3pi_attractors"] = sub;
    const auto full = antisymmetric_pair(hunt, 3, P);
    const auto half = antisymmetric_pair(hunt, 3, P / 2);
    o.values["pair_residual_shift_pi"] = full ? full->residual : std::nan("");
    o.values["pair_residual_shift_half_pi"] = half ? half->residual : std::nan("");
    o.details = hunt_details(hunt);
    return o;
}

inline Outcome run_table2(const json& sys, const RunOptions& run) {
    const auto G = io::tf_from_json(sys.at("plant"));
    const double k = slope_of(sys);
    const auto opt = analysis_options(run, G.domain());
    Outcome o;
    json rows = json::array();
    for (const auto& row : sys.at("rows")) {
        const double g = row.at("g").get<double>();
        json mj = {{"domain", "z"}, {"taps", row.at("taps")}, {"class", row.at("class")}};
        const auto M = io::multiplier_from_json(mj);
        const auto rep = gain_bound(M, G.with_gain(g), k, Channel{Source::r2, Target::y2}, opt);
        const std::string cls = row.at("class").get<std::string>();
        std::ostringstream label;
        label << "bound_" << cls << "_g" << std::fixed << std::setprecision(1) << g;
        o.values[label.str()] = rep.bound;
        json r = io::to_json(rep);
        r["g"] = g;
        r["multiplier"] = io::to_json(M);
        rows.push_back(r);
    }
    o.details["rows"] = rows;
    const auto I = TapMultiplier::identity(Domain::discrete);
    o.values["identity_bound_g0.6"] = gain_bound(I, G.with_gain(0.6), k, Channel{Source::r2, Target::y2}, opt).bound;
    o.values["circle_suitable_g0.6"] = circle_criterion(G.with_gain(0.6), k, opt).passes;
    o.values["circle_suitable_g1.0"] = circle_criterion(G.with_gain(1.0), k, opt).passes;
    return o;
}

inline LuryeSystem discrete_system(const json& sys) {
    LuryeSystem s{io::ss_from_json(sys.at("realization")), io::nonlinearity_from_json(sys.at("nonlinearity")),
                  SignalSpec::zero(), io::signal_from_json(sys.at("r2"), "r2"), {}};
    if (sys.contains("x0")) s.x0 = sys.at("x0").get<std::vector<double>>();
    return s;
}

inline Outcome run_g07(const json& sys, const RunOptions&) {
    const LuryeSystem s = discrete_system(sys);
    const auto N = sys.at("horizon").get<std::size_t>();
    const auto sim = simulate_discrete(s, N);
    Outcome o;
    json cycle = json::array();
    for (std::size_t j = 0; j < 5; ++j) {
        std::size_t n = N - 5;
        while (n % 5 != j) ++n;
        o.values["cycle_" + std::to_string(j)] = sim.y2[n];
        cycle.push_back(sim.y2[n]);
    }
    std::vector<double> r2(N);
    for (std::size_t n = 0; n < N; ++n) r2[n] = s.r2(static_cast<double>(n));
    const double pr = power_seminorm(r2, PowerMode::period_exact, 5.0);
    const double py = power_seminorm(sim.y2, PowerMode::period_exact, 5.0);
    o.values["r2_power"] = pr;
    o.values["y2_power"] = py;
    o.values["power_ratio"] = py / pr;
    o.values["lyapunov_exponent"] = lyapunov_exponent(s, 100000).exponent;
    const auto per = detect_period(sim.y2, 5.0, 64, 1e-6);
    o.values["period_multiple"] = per.multiple ? *per.multiple : 0;
    o.details["cycle"] = cycle;
    o.details["period_residual"] = per.residual;
    return o;
}

inline Outcome run_g09(const json& sys, const RunOptions&) {
    const LuryeSystem s = discrete_system(sys);
    const auto N = sys.at("horizon").get<std::size_t>();
    const auto discard = sys.at("discard").get<std::size_t>();
    const auto L = sys.at("fft_length").get<std::size_t>();
    const auto comb = sys.at("comb_period").get<std::size_t>();
    const auto top = sys.at("top_peaks").get<std::size_t>();
    Outcome o;

    const auto ly = lyapunov_exponent(s, N, 1e-8, discard);
    o.values["lyapunov_exponent"] = ly.exponent;

    const auto sim = simulate_discrete(s, N + discard, {discard, 1, false});
    const auto per = detect_period(sim.y2, 5.0, 64, 1e-6);
    o.values["aperiodic_at_period_5"] = per.multiple ? 0 : 1;
    o.details["period_residual"] = per.residual;

    const auto dec = decompose_periodic(sim.y2, comb);
    o.values["periodic_power"] = dec.periodic_power;
    o.values["variation_power"] = dec.residual_power;

    const auto sp = spectrum(sim.y2, L);
    const double Ld = static_cast<double>(L);
    auto on_comb = [&](std::size_t bin, double period) {
        const double f = static_cast<double>(bin) * period / Ld;
        return std::abs(f - std::round(f)) <= 2.0 * period / Ld;
    };
    std::vector<std::pair<double, std::size_t>> peaks;
    for (std::size_t b = 2; b < L / 2; ++b)
        if (sp.magnitude[b] > sp.magnitude[b - 1] && sp.magnitude[b] >= sp.magnitude[b + 1])
            peaks.emplace_back(sp.magnitude[b], b);
    std::sort(peaks.begin(), peaks.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    int count = 0;
    json listed = json::array();
    for (std::size_t i = 0; i < std::min(top, peaks.size()); ++i) {
        const bool hit = on_comb(peaks[i].second, static_cast<double>(comb));
        count += hit ? 1 : 0;
        listed.push_back({{"bin", peaks[i].second},
                          {"period", Ld / static_cast<double>(peaks[i].second)},
                          {"magnitude", peaks[i].first},
                          {"on_comb", hit}});
    }
    o.values["top_peaks_on_period40_comb"] = count;
    double main_peak = 0.0, sub_peak = 0.0;
    for (const auto& [m, b] : peaks) {
        main_peak = std::max(main_peak, m);
        if (!on_comb(b, 5.0)) sub_peak = std::max(sub_peak, m);
    }
    o.values["subharmonic_peak_ratio"] = main_peak > 0.0 ? sub_peak / main_peak : 0.0;

    // Spectrum of the part that is not period-40: median bin over the flat-spectrum level.
    std::vector<double> rest(sim.y2.size());
    for (std::size_t i = 0; i < rest.size(); ++i) rest[i] = sim.y2[i] - dec.periodic[i % comb];
    const auto sv = spectrum(rest, L);
    double energy = 0.0;
    for (std::size_t i = rest.size() - L; i < rest.size(); ++i) energy += rest[i] * rest[i];
    std::vector<double> mags(sv.magnitude.begin() + 1, sv.magnitude.begin() + static_cast<std::ptrdiff_t>(L / 2));
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2), mags.end());
    o.values["broadband_floor_ratio"] = energy > 0.0 ? mags[mags.size() / 2] / std::sqrt(energy) : 0.0;

    o.details["peaks"] = listed;
    o.details["parseval_residual"] = sp.parseval_residual;
    o.details["lyapunov_steps"] = ly.steps;
    return o;
}

inline Outcome run_uniqueness(const json& sys, const RunOptions& run) {
    const auto G = io::tf_from_json(sys.at("plant"));
    const double k = slope_of(sys);
    const auto opt = analysis_options(run, G.domain());
    Outcome o;
    for (const char* key : {"certificate_a5", "certificate_a3"}) {
        const auto M = io::multiplier_from_json(sys.at(key), key);
        const auto mem = validate_class_membership(M);
        const auto s = suitability_margin(M, G, k, opt);
        const std::string q = std::string(key) == "certificate_a5" ? "a5_suitable" : "a3_suitable";
        o.values[q] = mem.ok() && s.suitable;
        o.details[key] = {{"membership", io::to_json(mem)}, {"suitability", io::to_json(s)}};
    }
    bool even_limited = true;
    for (int N : {2, 4, 6, 8}) even_limited = even_limited && phase_gap_test(G, N, 10, k, opt).has_value();
    o.values["even_period_limited"] = even_limited;

    LuryeSystem s = discrete_system(sys);
    const auto N = sys.at("horizon").get<std::size_t>();
    const auto ref = simulate_discrete(s, N, {N - 5, 1, false});
    const auto count = sys.at("initial_states").get<std::uint64_t>();
    const double radius = sys.at("state_radius").get<double>();
    const std::uint64_t seed = run.seed.value_or(sys.at("seed").get<std::uint64_t>());
    double worst = 0.0;
    for (std::uint64_t i = 0; i < count; ++i) {
        s.x0 = {radius * (2.0 * hashed_uniform(seed, 2 * i) - 1.0), radius * (2.0 * hashed_uniform(seed, 2 * i + 1) - 1.0)};
        const auto sim = simulate_discrete(s, N, {N - 5, 1, false});
        for (std::size_t j = 0; j < 5; ++j) worst = std::max(worst, std::abs(sim.y2[j] - ref.y2[j]));
    }
    o.values["max_cycle_deviation"] = worst;
    o.details["seed"] = seed;
    return o;
}

}  // namespace detail

[[nodiscard]] inline Outcome measure(const ExperimentSpec& spec, const RunOptions& run = {}) {
    static const std::map<std::string, std::function<Outcome(const json&, const RunOptions&)>> runners{
        {"circle-threshold-fromion", detail::run_circle},
        {"altshuller-threshold-fromion", detail::run_altshuller},
        {"fromion-attractors", detail::run_attractors},
        {"fromion-subharmonic", detail::run_subharmonic},
        {"table2-bounds", detail::run_table2},
        {"g07-steady-state", detail::run_g07},
        {"g09-chaos", detail::run_g09},
        {"g07-attractor-uniqueness", detail::run_uniqueness},
    };
    const auto it = runners.find(spec.name);
    if (it == runners.end()) throw Error(ErrorCode::UnknownExperiment, "no runner for '" + spec.name + "'");
    return it->second(spec.system, run);
}

[[nodiscard]] inline ExperimentReport run_experiment(const std::string& name, const RunOptions& run = {}) {
    const ExperimentSpec& spec = find(name);
    Outcome out = measure(spec, run);
    ExperimentReport rep;
    rep.name = name;
    rep.details = std::move(out.details);
    for (const auto& e : spec.expected) {
        const auto it = out.values.find(e.quantity);
        const double m = it == out.values.end() ? std::nan("") : it->second;
        rep.rows.push_back({e, m, compare(e, m)});
    }
    return rep;
}

[[nodiscard]] inline json to_json(const ExperimentReport& r) {
    json rows = json::array();
    for (const auto& q : r.rows)
        rows.push_back({{"quantity", q.expected.quantity},
                        {"measured", io::detail::finite_or_string(q.measured)},
                        {"expected", q.expected.value},
                        {"tolerance", q.expected.tolerance},
                        {"comparison", to_string(q.expected.comparison)},
                        {"provenance", to_string(q.expected.provenance)},
                        {"pass", q.pass}});
    return {{"experiment", r.name}, {"pass", r.pass()}, {"quantities", rows}, {"details", r.details}};
}

}  // namespace lurye::experiments
