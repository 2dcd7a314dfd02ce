#include "mannlab/harness.hpp"

#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mannlab/rng.hpp"

namespace mannlab {

namespace fs = std::filesystem;

namespace {

constexpr double kTailThreshold = 1e-3;

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

OutputTarget resolve_output(const std::optional<std::string>& flag, const RunConfig& cfg,
                            bool quiet) {
    OutputTarget t;
    t.quiet = quiet;
    if (flag) {
        t.dir = *flag;
    } else if (const char* env = std::getenv("MANNLAB_OUT"); env && *env) {
        t.dir = env;
    } else if (cfg.output.dir) {
        t.dir = *cfg.output.dir;
    }
    return t;
}

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

void write_trace_csv(const fs::path& path, const IterationTrace& trace) {
    std::string out = "n,residual,dist_to_z,anchor_pairing,bound_slack,ineq35_slack,key_ineq_slack\n";
    out.reserve(out.size() + trace.rows.size() * 120);
    auto field = [&](const std::optional<double>& v) {
        out += ',';
        if (v) out += format_double(*v);
    };
    for (const auto& r : trace.rows) {
        out += std::to_string(r.n);
        field(r.residual);
        field(r.dist_to_z);
        field(r.anchor_pairing);
        field(r.bound_slack);
        field(r.ineq35_slack);
        field(r.key_ineq_slack);
        out += '\n';
    }
    write_text(path, out);
}

// ---------------------------------------------------------------------------
// JSON views

json to_json(const SmoothConstantReport& r) {
    return {{"K2", r.K2},
            {"n_samples", r.n_samples},
            {"max_excess", r.max_excess},
            {"violations", r.violations},
            {"empirical_K2", r.empirical_K2}};
}

json to_json(const Certificate& c) {
    json j = {{"operator_id", c.operator_id},
              {"lambda_tested", c.lambda_tested},
              {"n_pairs", c.n_pairs},
              {"seed", c.seed},
              {"sampling_box", c.sampling_box},
              {"max_violation", c.max_violation},
              {"lipschitz_excess", c.lipschitz_excess},
              {"verdict", c.certified() ? "certified" : "refuted"}};
    if (c.witness) {
        j["witness"] = {{"x", vector_to_json(c.witness->x)},
                        {"y", vector_to_json(c.witness->y)},
                        {"violation", c.witness->violation}};
    } else {
        j["witness"] = nullptr;
    }
    return j;
}

json to_json(const VerdictReport& v) {
    json conds = json::array();
    for (const auto& c : v.conditions) {
        conds.push_back({{"condition", c.condition}, {"pass", c.pass}, {"margin", c.margin}, {"note", c.note}});
    }
    return {{"theorem", v.theorem}, {"pass", v.pass()}, {"conditions", conds}};
}

json to_json(const Lemma21Report& r) {
    return {{"alpha", r.alpha},
            {"lambda", r.lambda},
            {"K2", r.K2},
            {"n_pairs", r.n_pairs},
            {"min_slack", r.min_slack},
            {"violations", r.violations},
            {"nonexpansive_applicable", r.nonexpansive_applicable},
            {"max_expansion", r.max_expansion},
            {"nonexpansive_violations", r.nonexpansive_violations}};
}

json to_json(const TauAnalysis& t) {
    json j = {{"length", t.gamma_seq.size()}, {"monotone", t.monotone}};
    if (t.monotone) {
        j["marker"] = "monotone: Case 1";
        j["n0"] = nullptr;
        j["tau"] = json::array();
    } else {
        j["n0"] = *t.n0;
        j["tau"] = t.tau;
    }
    j["nondecreasing"] = t.nondecreasing;
    j["estimate_ascent"] = t.estimate_ascent;
    j["estimate_dominated"] = t.estimate_dominated;
    return j;
}

json to_json(const AnchorLimit& a, const std::vector<double>& t_grid) {
    json path = json::array();
    for (const auto& p : a.path) {
        path.push_back({{"t", p.t},
                        {"x_t", vector_to_json(p.x_t)},
                        {"solver_residual", p.solver_residual},
                        {"iterations", p.iterations},
                        {"method", to_string(p.method)}});
    }
    return {{"t_grid", t_grid},
            {"z", vector_to_json(a.z)},
            {"cauchy_diffs", a.cauchy_diffs},
            {"cauchy_ok", a.cauchy_ok},
            {"note", a.note},
            {"path", path}};
}

// ---------------------------------------------------------------------------
// run

namespace {

struct RunOutcome {
    int exit_code = kExitOk;
    json report;
    std::optional<IterationTrace> trace;
    std::optional<VerdictReport> theorem31;
    std::optional<VerdictReport> zhou;
    std::optional<VerdictReport> chai_song;
};

json check_entry(const std::string& id, bool pass, json value, const std::string& note) {
    return {{"id", id}, {"pass", pass}, {"value", std::move(value)}, {"note", note}};
}

RunOutcome execute_run(const RunConfig& cfg) {
    RunOutcome o;
    json& rep = o.report;
    rep["command"] = "run";
    rep["config"] = to_json(cfg);
    std::vector<std::string> warnings;

    const Space space = cfg.require_space().build();
    const std::uint64_t seed = cfg.require_seed();
    const Vector u = cfg.require_u();
    const Vector x0 = cfg.require_x0();
    check_dim(space, u, "config.u");
    check_dim(space, x0, "config.x0");
    const ScheduleSet schedule = cfg.require_schedule().build();
    const OperatorConfig& opc = cfg.require_operator();

    const auto smooth = validate_smooth_constant(space, cfg.smoothness_samples,
                                                 derive_seed(seed, streams::kSmoothness));
    rep["smooth_constant"] = to_json(smooth);
    if (!smooth.ok()) warnings.push_back("sampled smoothness inequality violated at the configured K2");

    const std::size_t horizon = std::max<std::size_t>(cfg.max_iter, 2);
    o.theorem31 = validate_theorem31(schedule, opc.lambda, space.K2, horizon);
    o.zhou = validate_legacy(schedule, LegacyTheorem::zhou, opc.lambda, space.K2, horizon);
    o.chai_song = validate_legacy(schedule, LegacyTheorem::chai_song, opc.lambda, space.K2, horizon);
    rep["schedule_verdicts"] = {to_json(*o.theorem31), to_json(*o.zhou), to_json(*o.chai_song)};
    rep["warnings"] = json::array();

    auto finish = [&](int code, const std::string& message) {
        o.exit_code = code;
        rep["exit_code"] = code;
        rep["message"] = message;
        rep["warnings"] = warnings;
        return o;
    };

    if (!o.theorem31->pass()) {
        std::string failed;
        for (const auto& f : o.theorem31->failures()) failed += (failed.empty() ? "" : ", ") + f;
        return finish(kExitValidation, "schedule rejected: theorem31 condition(s) " + failed);
    }

    std::optional<Operator> T;
    try {
        T.emplace(opc.build(space));
    } catch (const DomainError& e) {
        return finish(kExitValidation, std::string("operator rejected: ") + e.what());
    }
    const Certificate cert = certify(*T, opc.lambda, cfg.certify.n_pairs,
                                     derive_seed(seed, streams::kCertify), cfg.certify.box);
    rep["certificate"] = to_json(cert);
    if (!cert.certified()) return finish(kExitValidation, "operator certification refuted");

    std::optional<Vector> p;
    try {
        const FixedSet fset = fixed_points_oracle(*T);
        if (fset.empty) return finish(kExitValidation, "fixed-point set is empty");
        p = fset.project(u);
        rep["fixed_points"] = {{"description", fset.describe()}, {"p", vector_to_json(*p)}};
    } catch (const DomainError&) {
        rep["fixed_points"] = nullptr;
    }

    AnchorLimit anchor;
    try {
        anchor = anchor_limit(*T, u, cfg.anchor.t_grid, cfg.anchor.options());
    } catch (const std::exception& e) {
        return finish(kExitValidation, std::string("anchor limit failed: ") + e.what());
    }
    rep["anchor"] = to_json(anchor, cfg.anchor.t_grid);
    if (!anchor.cauchy_ok) warnings.push_back("anchor Cauchy check failed: " + anchor.note);

    RunOptions ro;
    ro.max_iter = cfg.max_iter;
    ro.residual_tol = cfg.residual_tol;
    ro.z = anchor.z;
    ro.p = p;
    o.trace = run(*T, schedule, u, x0, ro);
    const IterationTrace& tr = *o.trace;
    const RunSummary& sm = tr.summary;

    rep["run"] = {{"iterations", tr.iterations},
                  {"stop", to_string(tr.stop)},
                  {"final_residual", tr.final_residual},
                  {"final_dist_to_z", optional_number(tr.final_dist_to_z)},
                  {"case", to_string(tr.case_label)},
                  {"final_x", vector_to_json(tr.final_x)},
                  {"tail_max_residual", sm.tail_max_residual},
                  {"tail_max_anchor_pairing", optional_number(sm.tail_max_anchor_pairing)},
                  {"first_residual_below_1e-6",
                   sm.first_below_1e6 ? json(*sm.first_below_1e6) : json(nullptr)}};

    json checks = json::array();
    if (p) {
        checks.push_back(check_entry("boundedness", sm.bound_violations == 0, sm.min_bound_slack,
                                     "||x_n - p|| <= max{||x_0 - p||, ||u - p||}"));
    }
    checks.push_back(check_entry("ineq35", sm.ineq35_violations == 0, sm.min_ineq35_slack,
                                 "||x_{n+1}-z||^2 <= (1-b)||x_n-z||^2 + 2b<u-z,J(x_{n+1}-z)>"));
    checks.push_back(check_entry("key_ineq", sm.key_ineq_violations == 0, sm.min_key_ineq_slack,
                                 "2a(1-b-g)(lambda-K^2 a)||x_n-Tx_n||^2 <= ||x_n-z||^2-||x_{n+1}-z||^2+b||u-z||^2"));
    checks.push_back(check_entry("residual_tail", sm.tail_max_residual <= kTailThreshold,
                                 sm.tail_max_residual, "max residual over the last 10% <= 1e-3"));
    if (sm.tail_max_anchor_pairing) {
        checks.push_back(check_entry("anchor_pairing_tail", *sm.tail_max_anchor_pairing <= kTailThreshold,
                                     *sm.tail_max_anchor_pairing,
                                     "max <u-z, J(x_{n+1}-z)> over the last 10% <= 1e-3"));
    }
    rep["checks"] = checks;

    if (tr.stop == StopReason::divergence) return finish(kExitDivergence, "divergence guard fired");
    return finish(kExitOk, "ok");
}

fs::path out_dir_or_cwd(const OutputTarget& out) { return out.dir.value_or(fs::path(".")); }

}  // namespace

CommandResult cmd_run(const RunConfig& cfg, const OutputTarget& out) {
    const auto started = std::chrono::steady_clock::now();
    RunOutcome o = execute_run(cfg);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    CommandResult r;
    r.exit_code = o.exit_code;
    const fs::path dir = out_dir_or_cwd(out);
    const std::string name = cfg.output.name;
    if (o.trace) {
        const fs::path trace_path = dir / (name + ".trace.csv");
        write_trace_csv(trace_path, *o.trace);
        o.report["trace_path"] = trace_path.filename().string();
        r.files.push_back(trace_path);
    } else {
        o.report["trace_path"] = nullptr;
    }
    const fs::path report_path = dir / (name + ".report.json");
    write_json(report_path, o.report);
    r.files.push_back(report_path);
    // Wall time lives in a sidecar so the report stays byte-reproducible.
    const fs::path timing_path = dir / (name + ".timing.json");
    write_json(timing_path, json{{"wall_time_s", wall}});
    r.files.push_back(timing_path);
    r.report = std::move(o.report);
    return r;
}

// ---------------------------------------------------------------------------
// sweep

CommandResult cmd_sweep(const RunConfig& cfg, const OutputTarget& out) {
    if (!cfg.sweep) throw ConfigError("sweep: config has no 'sweep' grid");
    const ScheduleConfig& base = cfg.require_schedule();
    const std::uint64_t root = cfg.require_seed();
    const SweepConfig& sw = *cfg.sweep;

    std::vector<ScheduleConfig> cells;
    if (sw.alpha || sw.beta || sw.gamma) {
        const std::vector<json> alphas = sw.alpha.value_or(std::vector<json>{base.alpha});
        const std::vector<json> betas = sw.beta.value_or(std::vector<json>{base.beta});
        const std::vector<json> gammas = sw.gamma.value_or(std::vector<json>{base.gamma});
        for (const auto& a : alphas) {
            for (const auto& b : betas) {
                for (const auto& g : gammas) {
                    ScheduleConfig c = base;
                    c.alpha = a;
                    c.beta = b;
                    c.gamma = g;
                    cells.push_back(c);
                }
            }
        }
    }

    const fs::path dir = out_dir_or_cwd(out);
    CommandResult r;
    std::string table =
        "schedule_id,theorem31,zhou,chai_song,iterations_to_residual_1e-6,final_dist_to_z\n";
    json cell_reports = json::array();
    auto verdict = [](const std::optional<VerdictReport>& v) -> std::string {
        if (!v) return "";
        return v->pass() ? "pass" : "fail";
    };

    for (std::size_t k = 0; k < cells.size(); ++k) {
        RunConfig cc = cfg;
        cc.sweep.reset();
        cc.schedule = cells[k];
        cc.seed = derive_seed(root, streams::kSweepBase + k);
        cc.output.name = "cell_" + std::to_string(k);

        RunOutcome o;
        try {
            o = execute_run(cc);
        } catch (const std::exception& e) {
            o.exit_code = kExitValidation;
            o.report = {{"command", "run"}, {"exit_code", kExitValidation}, {"message", e.what()}};
        }
        const std::string id = "cell" + std::to_string(k) + ":" + cells[k].build().describe();
        if (o.trace) {
            const fs::path tp = dir / (cc.output.name + ".trace.csv");
            write_trace_csv(tp, *o.trace);
            o.report["trace_path"] = tp.filename().string();
            r.files.push_back(tp);
        }
        const fs::path rp = dir / (cc.output.name + ".report.json");
        write_json(rp, o.report);
        r.files.push_back(rp);

        std::string iters;
        std::string dist;
        if (o.trace) {
            if (o.trace->summary.first_below_1e6) iters = std::to_string(*o.trace->summary.first_below_1e6);
            if (o.trace->final_dist_to_z) dist = format_double(*o.trace->final_dist_to_z);
        }
        table += "\"" + id + "\"," + verdict(o.theorem31) + "," + verdict(o.zhou) + "," +
                 verdict(o.chai_song) + "," + iters + "," + dist + "\n";
        cell_reports.push_back({{"cell", k},
                                {"schedule_id", id},
                                {"exit_code", o.exit_code},
                                {"report", rp.filename().string()}});
        r.exit_code = std::max(r.exit_code, o.exit_code);
    }
    const fs::path cp = dir / "comparison.csv";
    write_text(cp, table);
    r.files.push_back(cp);
    r.report = {{"command", "sweep"},
                {"config", to_json(cfg)},
                {"cells", cell_reports},
                {"comparison", cp.filename().string()},
                {"exit_code", r.exit_code}};
    const fs::path sp = dir / "sweep.report.json";
    write_json(sp, r.report);
    r.files.push_back(sp);
    return r;
}

// ---------------------------------------------------------------------------
// thin wrappers

namespace {

void maybe_write(CommandResult& r, const OutputTarget& out, const std::string& file) {
    if (!out.dir) return;
    const fs::path p = *out.dir / file;
    write_json(p, r.report);
    r.files.push_back(p);
}

}  // namespace

CommandResult cmd_certify(const RunConfig& cfg, const OutputTarget& out,
                          std::optional<double> lambda_override) {
    const Space space = cfg.require_space().build();
    const OperatorConfig& opc = cfg.require_operator();
    const std::uint64_t seed = cfg.require_seed();
    const double lambda = lambda_override.value_or(cfg.certify.lambda.value_or(opc.lambda));
    CommandResult r;
    r.report["command"] = "certify";
    try {
        const Operator T = opc.build(space);
        const Certificate c = certify(T, lambda, cfg.certify.n_pairs,
                                      derive_seed(seed, streams::kCertify), cfg.certify.box);
        r.report["certificate"] = to_json(c);
        r.report["admissibility"] =
            T.admissibility() == Admissibility::proven ? "proven" : "empirical";
        r.exit_code = c.certified() ? kExitOk : kExitValidation;
    } catch (const DomainError& e) {
        r.report["error"] = e.what();
        r.exit_code = kExitValidation;
    }
    r.report["exit_code"] = r.exit_code;
    maybe_write(r, out, "certificate.json");
    return r;
}

CommandResult cmd_validate(const RunConfig& cfg, const OutputTarget& out) {
    const ScheduleSet s = cfg.require_schedule().build();
    const Space space = cfg.space ? cfg.space->build() : Space::euclidean(1);
    std::optional<double> lambda = cfg.validate.lambda;
    if (!lambda && cfg.op) lambda = cfg.op->lambda;
    if (!lambda) throw ConfigError("validate: need validate.lambda or operator.lambda");
    const std::size_t horizon = cfg.validate.horizon.value_or(std::max<std::size_t>(cfg.max_iter, 2));

    CommandResult r;
    json reports = json::array();
    bool all = true;
    for (const auto& name : cfg.validate.theorems) {
        VerdictReport v;
        if (name == "theorem31") v = validate_theorem31(s, *lambda, space.K2, horizon);
        else if (name == "theorem32") v = validate_theorem32(s, *lambda, space.q, space.Cq, horizon);
        else if (name == "zhou") v = validate_legacy(s, LegacyTheorem::zhou, *lambda, space.K2, horizon);
        else v = validate_legacy(s, LegacyTheorem::chai_song, *lambda, space.K2, horizon);
        all = all && v.pass();
        reports.push_back(to_json(v));
    }
    r.exit_code = all ? kExitOk : kExitValidation;
    r.report = {{"command", "validate-schedule"},
                {"schedule", s.describe()},
                {"lambda", *lambda},
                {"K2", space.K2},
                {"horizon", horizon},
                {"verdicts", reports},
                {"exit_code", r.exit_code}};
    maybe_write(r, out, "validation.json");
    return r;
}

CommandResult cmd_tau(const std::vector<double>& gamma_seq, const OutputTarget& out) {
    const TauAnalysis t = mainge_tau(gamma_seq);
    CommandResult r;
    r.exit_code = t.ok() ? kExitOk : kExitValidation;
    r.report = to_json(t);
    r.report["command"] = "tau-analyze";
    r.report["exit_code"] = r.exit_code;
    maybe_write(r, out, "tau.json");
    return r;
}

CommandResult cmd_anchor(const RunConfig& cfg, const OutputTarget& out) {
    const Space space = cfg.require_space().build();
    const Vector u = cfg.require_u();
    check_dim(space, u, "config.u");
    CommandResult r;
    r.report["command"] = "anchor";
    try {
        const Operator T = cfg.require_operator().build(space);
        const AnchorLimit a = anchor_limit(T, u, cfg.anchor.t_grid, cfg.anchor.options());
        r.report["anchor"] = to_json(a, cfg.anchor.t_grid);
        r.exit_code = a.cauchy_ok ? kExitOk : kExitValidation;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        r.report["error"] = e.what();
        r.exit_code = kExitValidation;
    }
    r.report["exit_code"] = r.exit_code;
    maybe_write(r, out, "anchor.json");
    return r;
}

std::vector<double> read_sequence_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && (text[first] == '[' || text[first] == '{')) {
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(path + ": " + e.what());
        }
        if (j.is_object()) {
            if (!j.contains("gamma")) throw ConfigError(path + ": expected a 'gamma' array");
            j = j.at("gamma");
        }
        if (!j.is_array()) throw ConfigError(path + ": expected an array");
        std::vector<double> out;
        for (const auto& v : j) {
            if (!v.is_number()) throw ConfigError(path + ": non-numeric entry");
            out.push_back(v.get<double>());
        }
        return out;
    }
    std::vector<double> out;
    std::string token;
    std::string cleaned = text;
    for (char& c : cleaned) {
        if (c == ',' || c == ';') c = ' ';
    }
    std::istringstream is(cleaned);
    while (is >> token) {
        double v = 0.0;
        const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
        if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
            throw ConfigError(path + ": cannot parse '" + token + "'");
        }
        out.push_back(v);
    }
    return out;
}

}  // namespace mannlab
