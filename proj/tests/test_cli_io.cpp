#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "lurye/cli.hpp"

using namespace lurye;
using json = nlohmann::json;

namespace {

const std::string kConfigs = LURYE_CONFIG_DIR;

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "lurye");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string cfg(const std::string& name) { return kConfigs + "/" + name; }

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ErrorCode config_error_code(const std::string& text) {
    try {
        (void)io::parse_config(text);
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(JsonIo, TransferFunctionRoundTrip) {
    const RationalTransferFunction G{Domain::discrete, {2.0, 0.92}, {1.0, -0.5, 0.0}, 0.7};
    const auto back = io::tf_from_json(io::to_json(G));
    EXPECT_EQ(back.numerator(), G.numerator());
    EXPECT_EQ(back.denominator(), G.denominator());
    EXPECT_EQ(back.gain(), 0.7);
    EXPECT_EQ(back.domain(), Domain::discrete);
    const auto parsed = io::tf_from_json(json::parse(R"({"domain":"z","num":[2,0.92],"den":[1,-0.5,0],"g":0.7})"));
    EXPECT_EQ(parsed(0.3), G(0.3));
}

TEST(JsonIo, MultiplierRoundTrip) {
    const Multiplier M = TapMultiplier{Domain::discrete, {{5, 0.16}, {-10, 0.04}}, MultiplierClass::altshuller, 5.0};
    const auto back = io::multiplier_from_json(io::to_json(M));
    EXPECT_EQ(multiplier_frequency_response(back, 0.7), multiplier_frequency_response(M, 0.7));
    EXPECT_EQ(validate_class_membership(back).status, MembershipStatus::member);
}

TEST(JsonIo, SignalsAndNonlinearities) {
    const auto s = io::signal_from_json(
        json::parse(R"({"kind":"sum","terms":[{"kind":"periodic_table","samples":[1,0.6,-0.6,-1,0]}, 0.5]})"), "r2");
    EXPECT_DOUBLE_EQ(s(2.0), -0.1);
    const auto back = io::signal_from_json(io::to_json(s), "r2");
    for (double t : {0.0, 1.0, 7.0}) EXPECT_EQ(back(t), s(t));
    const auto phi = io::nonlinearity_from_json(json::parse(R"({"kind":"deadzone","width":0.2})"));
    EXPECT_DOUBLE_EQ(phi(0.5), 0.3);
    EXPECT_EQ(phi(0.1), 0.0);
    const auto again = io::nonlinearity_from_json(io::to_json(phi));
    EXPECT_EQ(again(-0.7), phi(-0.7));
}

TEST(JsonIo, FieldDiagnostics) {
    try {
        (void)io::tf_from_json(json::parse(R"({"domain":"q","num":[1],"den":[1,1]})"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ConfigError);
        EXPECT_NE(std::string(e.what()).find("plant.domain"), std::string::npos) << e.what();
    }
    try {
        (void)io::nonlinearity_from_json(json::parse(R"({"kind":"saturation","limit":"big"})"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("nonlinearity.limit"), std::string::npos) << e.what();
    }
}

TEST(JsonIo, MalformedReportsLineAndColumn) {
    EXPECT_EQ(config_error_code("{\n  \"a\": 1,\n  \"b\" 2\n}"), ErrorCode::ConfigError);
    try {
        (void)io::parse_config("{\n  \"a\": 1,\n  \"b\" 2\n}");
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
    }
}

TEST(Cli, CheckExitCodes) {
    EXPECT_EQ(run({"check", "--config", cfg("table2_identity_g06.json")}).code, 0);
    EXPECT_EQ(run({"check", "--config", cfg("table2_identity_g10.json")}).code, 1);
    const auto bad = run({"check", "--config", cfg("malformed.json")});
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("line 2"), std::string::npos) << bad.err;
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"check"}).code, 2);
    EXPECT_EQ(run({"check", "--config", cfg("table2_ozf_g06.json"), "--format", "xml"}).code, 2);
    EXPECT_EQ(run({"reproduce", "no-such-experiment"}).code, 2);
    EXPECT_EQ(run({"sweep", "--config", cfg("fromion_circle_sweep.json"), "--from", "2", "--to", "1"}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, BoundJson) {
    const auto r = run({"bound", "--config", cfg("table2_ozf_g06.json"), "--format", "json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_NEAR(j.at("bounds").at(0).at("bound").get<double>(), 3.76, 0.01);
    const auto bad = run({"bound", "--config", cfg("table2_identity_g10.json")});
    EXPECT_EQ(bad.code, 1);
}

TEST(Cli, GridDensityOverride) {
    const auto r = run({"check", "--config", cfg("table2_ozf_g06.json"), "--format", "json", "--grid-density", "256"});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(json::parse(r.out).at("grid").at("points").get<int>(), 256);
}

TEST(Cli, ThetaSweepBand) {
    const auto r = run({"sweep", "--config", cfg("fromion_theta_sweep.json"), "--format", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "theta,margin,suitable");
    int inside = 0, outside_suitable = 0;
    while (std::getline(in, line)) {
        const double theta = std::stod(line.substr(0, line.find(',')));
        const bool suitable = line.back() == '1';
        if (theta > 0.995 && theta < 1.085) inside += suitable;
        else outside_suitable += suitable;
    }
    EXPECT_EQ(inside, 9);
    EXPECT_EQ(outside_suitable, 0);
}

TEST(Cli, GainSweepCrossesAtCircleThreshold) {
    const auto r = run({"sweep", "--config", cfg("fromion_circle_sweep.json"), "--format", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    double last_pass = 0.0, first_fail = 1e9;
    while (std::getline(in, line)) {
        const double g = std::stod(line.substr(0, line.find(',')));
        if (line.back() == '1') last_pass = std::max(last_pass, g);
        else first_fail = std::min(first_fail, g);
    }
    EXPECT_LT(last_pass, 20.77 + 1e-9);
    EXPECT_GT(first_fail, 20.77 - 0.05);
    EXPECT_LT(last_pass, first_fail);
}

TEST(Cli, ReproduceTableTwoIsByteIdentical) {
    const auto a = run({"reproduce", "table2-bounds", "--format", "json"});
    const auto b = run({"reproduce", "table2-bounds", "--format", "json"});
    EXPECT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    const auto j = json::parse(a.out);
    EXPECT_TRUE(j.at("pass").get<bool>());
}

TEST(Cli, OutDirectoryArtifacts) {
    const auto dir = std::filesystem::temp_directory_path() / "lurye_cli_test_out";
    std::filesystem::remove_all(dir);
    const auto r = run({"simulate", "--config", cfg("g07_simulate.json"), "--out", dir.string(), "--seed", "17"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto manifest = json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest.at("command"), "simulate");
    EXPECT_EQ(manifest.at("seed").get<std::uint64_t>(), 17u);
    EXPECT_EQ(manifest.at("config").at("nonlinearity").at("kind"), "deadzone");
    const auto traces = slurp(dir / "traces.csv");
    EXPECT_EQ(traces.substr(0, traces.find('\n')), "time,y1,y2,u1,u2");
    EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
    std::filesystem::remove_all(dir);
}

TEST(Cli, PowerAndPhaseLimit) {
    const auto p = run({"power", "--config", cfg("g07_power.json"), "--format", "json"});
    ASSERT_EQ(p.code, 0) << p.err;
    const auto j = json::parse(p.out);
    EXPECT_NEAR(j.at("r2_power").get<double>(), 0.7376, 5e-5);
    EXPECT_NEAR(j.at("y2_power").get<double>(), 0.4830, 5e-5);
    const auto w = run({"phase-limit", "--config", cfg("fromion_phase_limit.json")});
    EXPECT_EQ(w.code, 1);
}

TEST(Cli, SearchFindsTableMultiplier) {
    const auto r = run({"search", "--config", cfg("search_ozf_g06.json"), "--format", "json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_NEAR(j.at("objective").get<double>(), 3.76, 0.01);
}
