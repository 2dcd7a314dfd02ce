// mannlab command-line front end.
//
//   mannlab run               --config cfg.json [--out DIR] [--seed N] [--max-iter N] [--quiet]
//   mannlab sweep             --config cfg.json ...
//   mannlab certify           --config cfg.json [--lambda L]
//   mannlab validate-schedule --config cfg.json
//   mannlab tau-analyze       --input gamma.json
//   mannlab anchor            --config cfg.json
//
// Exit codes: 0 ok, 1 usage/parse error, 2 validation or certification
// failure, 3 divergence guard.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mannlab/harness.hpp"

using namespace mannlab;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> max_iter;
    bool quiet = false;
};

void add_common(CLI::App* sub, CommonFlags& f, bool needs_config) {
    auto* opt = sub->add_option("--config", f.config, "JSON config file");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    sub->add_option("--out", f.out, "output directory (default: $MANNLAB_OUT, then output.dir)");
    sub->add_option("--seed", f.seed, "root seed, overrides the config");
    sub->add_option("--max-iter", f.max_iter, "iteration cap, overrides the config");
    sub->add_flag("--quiet", f.quiet, "suppress the report on stdout");
}

RunConfig load(const CommonFlags& f) {
    RunConfig cfg = load_config(f.config);
    if (f.seed) cfg.seed = *f.seed;
    if (f.max_iter) cfg.max_iter = *f.max_iter;
    return cfg;
}

void emit(const CommandResult& r, const OutputTarget& out) {
    if (out.quiet) return;
    std::cout << r.report.dump(2) << "\n";
    for (const auto& p : r.files) std::cerr << "wrote " << p.string() << "\n";
}

/// Short digest for run/sweep, whose full reports are written to disk.
void emit_summary(const CommandResult& r, const OutputTarget& out) {
    if (out.quiet) return;
    const json& rep = r.report;
    if (rep.value("command", "") == "run") {
        std::cout << "exit " << r.exit_code << ": " << rep.value("message", "") << "\n";
        if (rep.contains("run")) {
            const json& run = rep.at("run");
            std::cout << "  iterations " << run.at("iterations") << ", stop " << run.at("stop")
                      << ", final residual " << run.at("final_residual") << ", dist to z "
                      << run.at("final_dist_to_z") << ", " << run.at("case") << "\n";
        }
        if (rep.contains("checks")) {
            for (const auto& c : rep.at("checks")) {
                std::cout << "  " << (c.at("pass").get<bool>() ? "ok   " : "FAIL ")
                          << c.at("id").get<std::string>() << " " << c.at("value") << "\n";
            }
        }
    } else {
        std::cout << "sweep: " << rep.at("cells").size() << " cell(s), exit " << r.exit_code << "\n";
        for (const auto& c : rep.at("cells")) {
            std::cout << "  " << c.at("schedule_id").get<std::string>() << " -> exit "
                      << c.at("exit_code") << "\n";
        }
    }
    for (const auto& p : r.files) std::cerr << "wrote " << p.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Modified Mann iteration laboratory"};
    app.require_subcommand(1);

    CommonFlags f;
    std::optional<double> lambda;
    std::string tau_input;

    auto* run_cmd = app.add_subcommand("run", "validate, certify, iterate and persist a single run");
    add_common(run_cmd, f, true);
    auto* sweep_cmd = app.add_subcommand("sweep", "run every cell of the schedule grid under 'sweep'");
    add_common(sweep_cmd, f, true);
    auto* cert_cmd = app.add_subcommand("certify", "sample the strict-pseudocontraction inequality");
    add_common(cert_cmd, f, true);
    cert_cmd->add_option("--lambda", lambda, "level to test (default: certify.lambda or operator.lambda)");
    auto* val_cmd = app.add_subcommand("validate-schedule", "check schedule hypotheses");
    add_common(val_cmd, f, true);
    auto* tau_cmd = app.add_subcommand("tau-analyze", "Mainge tau analysis of an error sequence");
    add_common(tau_cmd, f, false);
    tau_cmd->add_option("--input", tau_input, "sequence file (JSON array, {\"gamma\": [...]} or text)")
        ->required()
        ->check(CLI::ExistingFile);
    auto* anchor_cmd = app.add_subcommand("anchor", "follow the anchor path and designate its limit");
    add_common(anchor_cmd, f, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (tau_cmd->parsed()) {
            const OutputTarget out = resolve_output(f.out, RunConfig{}, f.quiet);
            const CommandResult r = cmd_tau(read_sequence_file(tau_input), out);
            emit(r, out);
            return r.exit_code;
        }
        const RunConfig cfg = load(f);
        const OutputTarget out = resolve_output(f.out, cfg, f.quiet);
        CommandResult r;
        if (run_cmd->parsed()) {
            r = cmd_run(cfg, out);
            emit_summary(r, out);
        } else if (sweep_cmd->parsed()) {
            r = cmd_sweep(cfg, out);
            emit_summary(r, out);
        } else if (cert_cmd->parsed()) {
            r = cmd_certify(cfg, out, lambda);
            emit(r, out);
        } else if (val_cmd->parsed()) {
            r = cmd_validate(cfg, out);
            emit(r, out);
        } else {
            r = cmd_anchor(cfg, out);
            emit(r, out);
        }
        return r.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DomainError& e) {
        std::cerr << "rejected: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
