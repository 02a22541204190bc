#include "rfdiss/app.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rfdiss;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = RFDISS_CONFIG_DIR;

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("rfdiss_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int run(const std::string& cmd, const fs::path& config, const fs::path& out, std::ostream& err)
{
    RunOptions opt;
    opt.config = config;
    opt.out_dir = out;
    opt.quiet = true;
    return run_command(cmd, opt, err);
}

fs::path write_config(const fs::path& dir, const std::string& text)
{
    const fs::path p = dir / "config.json";
    std::ofstream(p) << text;
    return p;
}

std::vector<std::string> csv_row(const std::string& csv, const std::string& prefix)
{
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind(prefix, 0) == 0) {
            std::vector<std::string> cells;
            std::istringstream ls(line);
            std::string cell;
            while (std::getline(ls, cell, ',')) {
                cells.push_back(cell);
            }
            return cells;
        }
    }
    return {};
}

}  // namespace

TEST(Format, ShortestRoundTrip)
{
    EXPECT_EQ(io::fmt(0.1), "0.1");
    EXPECT_EQ(io::fmt(-0.5), "-0.5");
    EXPECT_EQ(std::stod(io::fmt(1.0 / 3.0)), 1.0 / 3.0);
    EXPECT_EQ(io::fmt(INFINITY), "inf");
}

TEST(AtomicWrite, ReplacesTargetWithoutLeftovers)
{
    const auto dir = scratch("atomic");
    io::write_atomic(dir / "a.csv", "one\n");
    io::write_atomic(dir / "a.csv", "two\n");
    EXPECT_EQ(slurp(dir / "a.csv"), "two\n");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) {
        ++files;
    }
    EXPECT_EQ(files, 1u);
}

TEST(Config, HistoryAndSignalsRoundTrip)
{
    const auto cfg = io::parse_config(io::json::parse(R"({
        "system": {"name": "scalar_pair"},
        "history": {"kind": "sinusoid", "grid_step": 0.25, "offset": [0.1], "amplitude": [0.4], "omega": 2.0},
        "input": [[0, [1.0]], [2.5, [-2.0]]],
        "switching": [[0, "unstable"], [1, "stable"]]
    })"));
    const auto phi2 = io::parse_history(io::history_to_json(*cfg.history), cfg.system);
    for (double th : {-1.0, -0.6, -0.1, 0.0}) {
        EXPECT_EQ(phi2.eval(th)[0], cfg.history->eval(th)[0]);
    }
    const io::json ju = io::input_to_json(cfg.input);
    const auto u2 = io::parse_input(&ju, cfg.system);
    EXPECT_EQ(u2.breakpoints(), cfg.input.breakpoints());
    const io::json js = io::switching_to_json(cfg.switching, cfg.system);
    EXPECT_EQ(io::parse_switching(&js, cfg.system).values(), (std::vector<ModeId>{1, 0}));
}

TEST(Config, KFunctionBlocks)
{
    const auto p = io::parse_kfunction(io::json::parse(R"({"kind": "power", "c": 2, "p": 3})"), "k");
    EXPECT_EQ(p(1.0), 2.0);
    const auto t = io::parse_kfunction(io::json::parse(R"({"kind": "tabulated", "x": [0, 1, 2], "y": [0, 1, 4]})"), "k");
    EXPECT_NEAR(t(1.0), 1.0, 1e-15);
    EXPECT_NEAR(io::parse_kfunction(io::kfunction_to_json(t), "k")(1.5), t(1.5), 1e-15);
    EXPECT_THROW(io::parse_kfunction(io::json::parse(R"({"kind": "exp"})"), "k"), ConfigError);
    EXPECT_THROW(io::parse_kfunction(io::json::parse(R"({"kind": "power", "p": -1})"), "k"), ConfigError);
}

TEST(Config, RejectsInconsistentBlocks)
{
    const auto dir = scratch("bad");
    const std::vector<std::string> bad{
        R"({"system": {"name": "nope"}})",
        R"({"system": {"name": "scalar_pair"}, "switching": [[0, "sideways"]]})",
        R"({"system": {"name": "scalar_pair"}, "input": [[0, [1, 2]]]})",
        R"({"system": {"name": "scalar_pair"}, "history": {"kind": "constant", "value": [1, 2]}})",
        R"({"system": {"name": "scalar_pair"}, "history": {"kind": "constant", "grid_step": 0.1}, "solver": {"step": 0.03}})",
        R"({"system": {"name": "scalar_pair"}, "history": {"kind": "constant", "grid_step": 0.3}})",
        R"({"system": {"name": "scalar_pair"}, "seminorm": {"kind": "l2"}})",
        R"({"system": {"name": "scalar_pair"}, "input": [[1, [0]]]})",
        R"({"system": )",
    };
    for (const auto& text : bad) {
        std::ostringstream err;
        EXPECT_EQ(run("simulate", write_config(dir, text), dir, err), kExitConfig) << text;
        EXPECT_FALSE(err.str().empty());
    }
    std::ostringstream err;
    EXPECT_EQ(run("simulate", dir / "missing.json", dir, err), kExitConfig);
    EXPECT_EQ(run("certify", kConfigs / "pure_delay.json", dir, err), kExitConfig);
}

TEST(Cli, SimulatePureDelay)
{
    const auto out = scratch("sim");
    std::ostringstream err;
    ASSERT_EQ(run("simulate", kConfigs / "pure_delay.json", out, err), kExitPass) << err.str();
    const auto row = csv_row(slurp(out / "trajectory.csv"), "2,");
    ASSERT_EQ(row.size(), 5u);
    EXPECT_NEAR(std::stod(row[1]), -0.5, 1e-6);
    EXPECT_EQ(row[3], "delay");
    EXPECT_EQ(csv_row(slurp(out / "trajectory.csv"), "t,"), (std::vector<std::string>{"t", "x1", "norm", "mode", "u1"}));
}

TEST(Cli, SimulateBlowUpIsNumericFailure)
{
    const auto dir = scratch("blow");
    const auto cfg = write_config(dir, R"({
        "system": {"name": "scalar_pair"},
        "history": {"kind": "constant", "value": [1.0]},
        "switching": [[0, "unstable"]],
        "solver": {"step": 0.01, "horizon": 20, "bound": 1000}
    })");
    std::ostringstream err;
    EXPECT_EQ(run("simulate", cfg, dir, err), kExitNumeric);
}

TEST(Cli, CheckUnstableDissipation)
{
    const auto out = scratch("check");
    std::ostringstream err;
    ASSERT_EQ(run("check", kConfigs / "unstable_dissipation.json", out, err), kExitViolation) << err.str();
    const auto row = csv_row(slurp(out / "dissipation.csv"), "0,");
    ASSERT_FALSE(row.empty());
    EXPECT_EQ(row[5], "violation");
}

TEST(Cli, CertifyStable)
{
    const auto out = scratch("certify");
    std::ostringstream err;
    ASSERT_EQ(run("certify", kConfigs / "certify_stable.json", out, err), kExitPass) << err.str();
    const auto summary = slurp(out / "summary.txt");
    EXPECT_NE(summary.find("gamma(1) = 2"), std::string::npos) << summary;
    EXPECT_NE(summary.find("violations: 0"), std::string::npos);
    EXPECT_TRUE(fs::exists(out / "trials.csv"));
    EXPECT_TRUE(fs::exists(out / "kl_table.csv"));
}

TEST(Cli, DeriveWritesAllNotions)
{
    const auto out = scratch("derive");
    std::ostringstream err;
    ASSERT_EQ(run("derive", kConfigs / "derive_two_rates.json", out, err), kExitPass) << err.str();
    const auto csv = slurp(out / "derivatives.csv");
    for (const char* notion : {",D1\n", ",D2\n", ",D3\n", ",D4\n", ",D5\n"}) {
        EXPECT_NE(csv.find(notion), std::string::npos) << notion;
    }
    const auto d5 = csv_row(csv, "max,");
    ASSERT_FALSE(d5.empty());
    EXPECT_NEAR(std::stod(d5[1]), -2.0, 1e-3);
}

TEST(Cli, ProbeLipschitz)
{
    const auto out = scratch("probe");
    std::ostringstream err;
    ASSERT_EQ(run("probe-lipschitz", kConfigs / "linear_delay_probe.json", out, err), kExitPass) << err.str();
    EXPECT_FALSE(csv_row(slurp(out / "lipschitz.csv"), "all,").empty());
}

TEST(Cli, FalsifyCounterexampleReplays)
{
    const auto out = scratch("falsify");
    std::ostringstream err;
    ASSERT_EQ(run("falsify", kConfigs / "falsify_switching.json", out, err), kExitViolation) << err.str();
    ASSERT_TRUE(fs::exists(out / "counterexample.json"));
    const auto replay = scratch("replay");
    EXPECT_EQ(run("simulate", out / "counterexample.json", replay, err), kExitPass) << err.str();
    EXPECT_EQ(slurp(replay / "trajectory.csv"), slurp(out / "counterexample_trajectory.csv"));
    EXPECT_EQ(run("check", out / "counterexample.json", replay, err), kExitViolation) << err.str();
}

TEST(Cli, ShrunkCertifyCounterexampleReplays)
{
    const auto dir = scratch("shrunk");
    auto cfg = io::json::parse(slurp(kConfigs / "certify_stable.json"));
    cfg["certify"]["gamma_scale"] = 0.25;
    cfg["certify"]["trials"] = 100;
    const auto path = write_config(dir, cfg.dump());
    const auto out = dir / "out";
    std::ostringstream err;
    ASSERT_EQ(run("certify", path, out, err), kExitViolation) << err.str();
    ASSERT_TRUE(fs::exists(out / "counterexample.json"));
    EXPECT_EQ(run("check", out / "counterexample.json", dir / "replay", err), kExitViolation) << err.str();
}

TEST(Cli, SeedOverrideChangesTrials)
{
    const auto a = scratch("seed_a");
    const auto b = scratch("seed_b");
    RunOptions opt;
    opt.config = kConfigs / "falsify_switching.json";
    opt.quiet = true;
    opt.out_dir = a;
    std::ostringstream err;
    run_command("falsify", opt, err);
    opt.out_dir = b;
    opt.seed = 12345;
    run_command("falsify", opt, err);
    EXPECT_NE(slurp(a / "trials.csv"), slurp(b / "trials.csv"));
}
