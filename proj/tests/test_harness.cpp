#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mannlab/harness.hpp"
#include "mannlab/rng.hpp"

using namespace mannlab;
namespace fs = std::filesystem;

namespace {

const std::string kConfigs = MANNLAB_CONFIG_DIR;

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("mannlab_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

OutputTarget to(const fs::path& dir) {
    OutputTarget t;
    t.dir = dir;
    t.quiet = true;
    return t;
}

RunConfig cfg(const std::string& file) { return load_config(kConfigs + "/" + file); }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::string cell;
        bool quoted = false;
        for (char c : line) {
            if (c == '"') quoted = !quoted;
            else if (c == ',' && !quoted) {
                cells.push_back(cell);
                cell.clear();
            } else {
                cell += c;
            }
        }
        cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

int cli(const std::string& args) {
    const std::string cmd = std::string(MANNLAB_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST(FormatDouble, SeventeenSignificantDigits) {
    EXPECT_EQ(format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(format_double(1.0), "1");
    EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(CmdRun, IdentityConvergesToAnchor) {
    const fs::path dir = scratch("identity");
    const CommandResult r = cmd_run(cfg("identity.json"), to(dir));
    EXPECT_EQ(r.exit_code, kExitOk);
    const json& rep = r.report;
    const auto z = rep.at("anchor").at("z").get<std::vector<double>>();
    const auto u = rep.at("config").at("u").get<std::vector<double>>();
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(z[i], u[i], 1e-14);
    EXPECT_LE(rep.at("run").at("final_dist_to_z").get<double>(), 1e-6);
    EXPECT_TRUE(fs::exists(dir / "identity.trace.csv"));
    EXPECT_TRUE(fs::exists(dir / "identity.report.json"));
    EXPECT_TRUE(fs::exists(dir / "identity.timing.json"));
}

TEST(CmdRun, NegationMatchesScalarSimulation) {
    const RunConfig c = cfg("negation.json");
    const CommandResult r = cmd_run(c, to(scratch("negation")));
    ASSERT_EQ(r.exit_code, kExitOk);
    // Each coordinate of x_n evolves independently as
    // x <- beta u + (1 - beta)(1 - 2 alpha) x with z = 0.
    const double alpha = c.require_schedule().build().alpha_at(0);
    const auto& u = *c.u;
    auto x = *c.x0;
    double tail_max = 0.0;
    const std::size_t N = c.max_iter;
    const std::size_t rows = N + 1;
    for (std::size_t n = 0; n <= N; ++n) {
        const double res = 2.0 * std::hypot(x[0], x[1]);
        if (n >= rows - rows / 10) tail_max = std::max(tail_max, res);
        const double b = 1.0 / (n + 2.0);
        for (std::size_t i = 0; i < 2; ++i) x[i] = b * u[i] + (1 - b) * (1 - 2 * alpha) * x[i];
    }
    EXPECT_LE(r.report.at("run").at("tail_max_residual").get<double>(), 1e-3);
    EXPECT_NEAR(r.report.at("run").at("tail_max_residual").get<double>(), tail_max, 1e-12);
}

TEST(CmdRun, HarmonicAlphaIsRejected) {
    const CommandResult r = cmd_run(cfg("alpha_harmonic.json"), to(scratch("alpha_harmonic")));
    EXPECT_EQ(r.exit_code, kExitValidation);
    const json& v = r.report.at("schedule_verdicts").at(0);
    EXPECT_EQ(v.at("theorem"), "theorem31");
    bool found = false;
    for (const auto& c : v.at("conditions")) {
        if (c.at("condition") == "(i)") {
            found = true;
            EXPECT_FALSE(c.at("pass").get<bool>());
        }
    }
    EXPECT_TRUE(found);
    EXPECT_TRUE(r.report.at("trace_path").is_null());
}

TEST(CmdRun, ReportIsSelfContained) {
    const CommandResult r = cmd_run(cfg("negation.json"), to(scratch("selfcontained")));
    const json& rep = r.report;
    for (const char* key : {"config", "schedule_verdicts", "certificate", "anchor", "run", "checks", "trace_path"}) {
        EXPECT_TRUE(rep.contains(key)) << key;
    }
    for (const auto& c : rep.at("checks")) EXPECT_TRUE(c.at("pass").get<bool>()) << c.at("id");
}

TEST(CmdRun, ByteIdenticalOutputs) {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    cmd_run(cfg("negation.json"), to(a));
    cmd_run(cfg("negation.json"), to(b));
    EXPECT_EQ(slurp(a / "negation.trace.csv"), slurp(b / "negation.trace.csv"));
    EXPECT_EQ(slurp(a / "negation.report.json"), slurp(b / "negation.report.json"));
}

TEST(CmdRun, TraceHeaderAndShape) {
    const fs::path dir = scratch("trace");
    cmd_run(cfg("negation.json"), to(dir));
    const auto rows = read_csv(dir / "negation.trace.csv");
    ASSERT_GE(rows.size(), 3u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"n", "residual", "dist_to_z", "anchor_pairing", "bound_slack",
                                                 "ineq35_slack", "key_ineq_slack"}));
    for (std::size_t k = 1; k < rows.size(); ++k) ASSERT_EQ(rows[k].size(), 7u);
    EXPECT_EQ(rows[1][0], "0");
    EXPECT_TRUE(rows.back()[3].empty());
    EXPECT_FALSE(rows.back()[2].empty());
}

TEST(CmdSweep, GammaGridShowsRelaxedConditions) {
    const fs::path dir = scratch("gamma_sweep");
    const CommandResult r = cmd_sweep(cfg("gamma_sweep.json"), to(dir));
    EXPECT_EQ(r.exit_code, kExitOk);
    const auto rows = read_csv(dir / "comparison.csv");
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"schedule_id", "theorem31", "zhou", "chai_song",
                                                 "iterations_to_residual_1e-6", "final_dist_to_z"}));
    for (std::size_t k = 1; k <= 3; ++k) {
        EXPECT_EQ(rows[k][1], "pass");
        EXPECT_LE(std::stod(rows[k][5]), 1e-2);
    }
    EXPECT_EQ(rows[1][2], "fail");
    EXPECT_EQ(rows[2][2], "fail");
    EXPECT_EQ(rows[3][2], "pass");
    for (std::size_t k = 0; k < 3; ++k) EXPECT_TRUE(fs::exists(dir / ("cell_" + std::to_string(k) + ".trace.csv")));
}

TEST(CmdSweep, AlphaGridReportsIterationCounts) {
    const fs::path dir = scratch("alpha_sweep");
    const CommandResult r = cmd_sweep(cfg("alpha_sweep.json"), to(dir));
    EXPECT_EQ(r.exit_code, kExitOk);
    const auto rows = read_csv(dir / "comparison.csv");
    ASSERT_EQ(rows.size(), 4u);
    for (std::size_t k = 1; k <= 3; ++k) {
        EXPECT_EQ(rows[k][1], "pass");
        EXPECT_FALSE(rows[k][4].empty());
    }
}

TEST(CmdSweep, EmptyGrid) {
    RunConfig c = cfg("gamma_sweep.json");
    c.sweep->gamma = std::vector<json>{};
    const fs::path dir = scratch("empty_sweep");
    const CommandResult r = cmd_sweep(c, to(dir));
    EXPECT_EQ(r.exit_code, kExitOk);
    EXPECT_EQ(read_csv(dir / "comparison.csv").size(), 1u);
    EXPECT_TRUE(r.report.at("cells").empty());
}

TEST(CmdSweep, FailingCellIsRecordedAndSweepContinues) {
    RunConfig c = cfg("alpha_sweep.json");
    c.sweep->alpha = std::vector<json>{json{{"kind", "harmonic"}}, json{{"kind", "constant"}, {"c", 0.4}}};
    const CommandResult r = cmd_sweep(c, to(scratch("failing_sweep")));
    EXPECT_EQ(r.exit_code, kExitValidation);
    ASSERT_EQ(r.report.at("cells").size(), 2u);
    EXPECT_EQ(r.report.at("cells").at(0).at("exit_code"), kExitValidation);
    EXPECT_EQ(r.report.at("cells").at(1).at("exit_code"), kExitOk);
}

TEST(CmdSweep, CellsAreIndependentOfGridNeighbours) {
    // Cell k draws from its own seed stream, so running a sub-grid reproduces it.
    RunConfig full = cfg("gamma_sweep.json");
    RunConfig single = full;
    single.sweep->gamma = std::vector<json>{full.sweep->gamma->at(0)};
    const fs::path a = scratch("cell_full"), b = scratch("cell_single");
    full.max_iter = single.max_iter = 2000;
    cmd_sweep(full, to(a));
    cmd_sweep(single, to(b));
    EXPECT_EQ(slurp(a / "cell_0.trace.csv"), slurp(b / "cell_0.trace.csv"));
}

TEST(CmdTau, WorkedExampleFromFile) {
    const std::vector<double> g = read_sequence_file(kConfigs + "/gamma_example.json");
    const CommandResult r = cmd_tau(g, OutputTarget{});
    EXPECT_EQ(r.exit_code, kExitOk);
    EXPECT_EQ(r.report.at("tau"), json::array({1, 1, 3, 3}));
    EXPECT_TRUE(r.report.at("estimate_ascent").get<bool>());
    EXPECT_TRUE(r.report.at("estimate_dominated").get<bool>());
}

TEST(CmdTau, ReadsAllInputForms) {
    const fs::path dir = scratch("tau_forms");
    std::ofstream(dir / "a.json") << R"({"gamma": [3, 1, 2]})";
    std::ofstream(dir / "b.txt") << "3, 1\n2\n";
    EXPECT_EQ(read_sequence_file((dir / "a.json").string()), (std::vector<double>{3, 1, 2}));
    EXPECT_EQ(read_sequence_file((dir / "b.txt").string()), (std::vector<double>{3, 1, 2}));
    std::ofstream(dir / "c.txt") << "3 x 2";
    EXPECT_THROW(read_sequence_file((dir / "c.txt").string()), ConfigError);
}

TEST(CmdCertify, NegationAtSixTenthsIsRefuted) {
    const CommandResult r = cmd_certify(cfg("certify_negation.json"), OutputTarget{});
    EXPECT_EQ(r.exit_code, kExitValidation);
    const json& c = r.report.at("certificate");
    EXPECT_EQ(c.at("verdict"), "refuted");
    EXPECT_FALSE(c.at("witness").is_null());
    EXPECT_EQ(cmd_certify(cfg("certify_negation.json"), OutputTarget{}, 0.5).exit_code, kExitOk);
}

TEST(CmdValidate, ZhouNamesConditionFour) {
    const CommandResult r = cmd_validate(cfg("validate_zhou.json"), OutputTarget{});
    EXPECT_EQ(r.exit_code, kExitValidation);
    const json& zhou = r.report.at("verdicts").at(1);
    EXPECT_EQ(zhou.at("theorem"), "zhou");
    bool named = false;
    for (const auto& c : zhou.at("conditions")) {
        if (c.at("condition") == "(iv)") named = !c.at("pass").get<bool>();
    }
    EXPECT_TRUE(named);
    EXPECT_TRUE(r.report.at("verdicts").at(0).at("pass").get<bool>());
}

TEST(CmdAnchor, DiagonalLimit) {
    const CommandResult r = cmd_anchor(cfg("benchmark_dim8.json"), OutputTarget{});
    EXPECT_EQ(r.exit_code, kExitOk);
    const auto z = r.report.at("anchor").at("z").get<std::vector<double>>();
    EXPECT_NEAR(z[0], 1.0, 1e-6);
    EXPECT_NEAR(z[1], 2.0, 1e-6);
    for (std::size_t i = 2; i < z.size(); ++i) EXPECT_LE(std::abs(z[i]), 1e-5);
}

TEST(ResolveOutput, Precedence) {
    RunConfig c;
    c.output.dir = "from_config";
    ::unsetenv("MANNLAB_OUT");
    EXPECT_EQ(resolve_output(std::nullopt, c, false).dir->string(), "from_config");
    ::setenv("MANNLAB_OUT", "from_env", 1);
    EXPECT_EQ(resolve_output(std::nullopt, c, false).dir->string(), "from_env");
    EXPECT_EQ(resolve_output(std::string("from_flag"), c, false).dir->string(), "from_flag");
    ::unsetenv("MANNLAB_OUT");
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("cli");
    EXPECT_EQ(cli("run --config " + kConfigs + "/negation.json --out " + dir.string()), 0);
    EXPECT_EQ(cli("run --config " + kConfigs + "/alpha_harmonic.json --out " + dir.string()), 2);
    EXPECT_EQ(cli("certify --config " + kConfigs + "/certify_negation.json"), 2);
    EXPECT_EQ(cli("validate-schedule --config " + kConfigs + "/validate_zhou.json"), 2);
    EXPECT_EQ(cli("tau-analyze --input " + kConfigs + "/gamma_example.json"), 0);
    EXPECT_EQ(cli("run --bogus-flag"), 1);
    EXPECT_EQ(cli("run --config /nonexistent.json"), 1);
    EXPECT_EQ(cli(""), 1);
    std::ofstream(dir / "broken.json") << "{\"space\": ";
    EXPECT_EQ(cli("run --config " + (dir / "broken.json").string()), 1);
    std::ofstream(dir / "unknown.json") << R"({"space": {"kind": "euclidean", "dim": 1}, "colour": 1})";
    EXPECT_EQ(cli("run --config " + (dir / "unknown.json").string()), 1);
}

TEST(Cli, SeedAndMaxIterOverrides) {
    const fs::path a = scratch("cli_over_a");
    ASSERT_EQ(cli("run --quiet --max-iter 300 --seed 99 --config " + kConfigs + "/negation.json --out " + a.string()), 0);
    const json rep = json::parse(slurp(a / "negation.report.json"));
    EXPECT_EQ(rep.at("config").at("max_iter"), 300);
    EXPECT_EQ(rep.at("config").at("seed"), 99);
    EXPECT_EQ(rep.at("certificate").at("seed"), derive_seed(99, streams::kCertify));
}
