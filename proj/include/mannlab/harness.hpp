#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mannlab/config.hpp"

namespace mannlab {

/// Process exit codes shared by every command.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitValidation = 2,
    kExitDivergence = 3,
};

struct CommandResult {
    int exit_code = kExitOk;
    json report;
    /// Files written, in write order.
    std::vector<std::filesystem::path> files;
};

/// Where a command writes its files. Empty means "do not write files"
/// for the stdout-oriented commands; run and sweep fall back to ".".
struct OutputTarget {
    std::optional<std::filesystem::path> dir;
    bool quiet = false;
};

/// Resolves --out, then MANNLAB_OUT, then output.dir from the config.
OutputTarget resolve_output(const std::optional<std::string>& flag, const RunConfig& cfg,
                            bool quiet);

/// Writes the trace CSV: one row per stored iterate with
/// n,residual,dist_to_z,anchor_pairing,bound_slack,ineq35_slack,key_ineq_slack.
/// Floats use 17 significant digits; absent values are empty fields.
void write_trace_csv(const std::filesystem::path& path, const IterationTrace& trace);
std::string format_double(double v);

json to_json(const SmoothConstantReport& r);
json to_json(const Certificate& c);
json to_json(const VerdictReport& v);
json to_json(const Lemma21Report& r);
json to_json(const TauAnalysis& t);
json to_json(const AnchorLimit& a, const std::vector<double>& t_grid);

/// Validate schedule, certify operator, designate z, iterate, persist.
/// Exit codes: 0 success, 2 validation/certification failure, 3 divergence.
CommandResult cmd_run(const RunConfig& cfg, const OutputTarget& out);

/// One run per grid cell (cartesian product alpha x beta x gamma, gamma
/// fastest). Writes cell_<k>.* files, comparison.csv and sweep.report.json.
/// Cell failures are recorded and the sweep continues; the exit code is the
/// largest cell exit code (0 for an empty grid).
CommandResult cmd_sweep(const RunConfig& cfg, const OutputTarget& out);

CommandResult cmd_certify(const RunConfig& cfg, const OutputTarget& out,
                          std::optional<double> lambda_override = std::nullopt);
CommandResult cmd_validate(const RunConfig& cfg, const OutputTarget& out);
CommandResult cmd_tau(const std::vector<double>& gamma_seq, const OutputTarget& out);
CommandResult cmd_anchor(const RunConfig& cfg, const OutputTarget& out);

/// Reads a numeric sequence from a JSON array, a JSON object with a
/// "gamma" array, or whitespace/comma separated text.
std::vector<double> read_sequence_file(const std::string& path);

}  // namespace mannlab
