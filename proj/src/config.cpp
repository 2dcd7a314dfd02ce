#include "mannlab/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace mannlab {

namespace {

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items()) {
        if (!ok.count(key)) {
            throw ConfigError(std::string(where) + ": unknown field '" + key + "'");
        }
    }
}

template <typename T>
T get(const json& j, const char* key, const char* where) {
    if (!j.contains(key)) throw ConfigError(std::string(where) + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(where) + "." + key + ": " + e.what());
    }
}

template <typename T>
std::optional<T> get_opt(const json& j, const char* key, const char* where) {
    if (!j.contains(key)) return std::nullopt;
    return get<T>(j, key, where);
}

double get_number(const json& j, const char* key, const char* where) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw ConfigError(std::string(where) + ": field '" + key + "' must be a number");
    }
    return j.at(key).get<double>();
}

std::vector<double> number_array(const json& j, const char* where) {
    if (!j.is_array()) throw ConfigError(std::string(where) + ": expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw ConfigError(std::string(where) + ": expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Builders

Space SpaceConfig::build() const {
    if (dim < 1) throw ConfigError("space.dim must be >= 1");
    Space s;
    if (kind == "euclidean") {
        if (p) throw ConfigError("space: 'p' is only valid for kind 'lp'");
        s = Space::euclidean(dim);
        if (K2_override) {
            s.K2 = *K2_override;
            s.Cq = 2.0 * s.K2;
        }
    } else if (kind == "lp") {
        if (!p) throw ConfigError("space: kind 'lp' requires 'p'");
        try {
            s = Space::lp(dim, *p, K2_override);
        } catch (const DomainError& e) {
            throw ConfigError(std::string("space: ") + e.what());
        }
    } else {
        throw ConfigError("space.kind must be 'euclidean' or 'lp', got '" + kind + "'");
    }
    if (q) {
        if (!(*q > 1.0 && *q <= 2.0)) throw ConfigError("space.q must lie in (1, 2]");
        s.q = *q;
    }
    if (Cq) {
        if (!(*Cq > 0.0)) throw ConfigError("space.Cq must be positive");
        s.Cq = *Cq;
    }
    return s;
}

Operator OperatorConfig::build(const Space& space) const {
    GalleryParams gp;
    const char* where = "operator.params";
    if (name == "diagonal") {
        check_keys(params, where, {"eigenvalues"});
        gp.eigenvalues = number_array(get<json>(params, "eigenvalues", where), where);
    } else if (name == "affine") {
        check_keys(params, where, {"A", "b"});
        const json rows = get<json>(params, "A", where);
        if (!rows.is_array()) throw ConfigError("operator.params.A must be an array of rows");
        gp.A = Matrix(static_cast<Eigen::Index>(rows.size()), space.dim);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto row = number_array(rows[i], "operator.params.A");
            if (static_cast<int>(row.size()) != space.dim) {
                throw ConfigError("operator.params.A: row length must equal space.dim");
            }
            for (int k = 0; k < space.dim; ++k) gp.A(static_cast<Eigen::Index>(i), k) = row[static_cast<std::size_t>(k)];
        }
        if (params.contains("b")) gp.b = to_vector(number_array(params.at("b"), "operator.params.b"));
    } else if (name == "clipped_quadratic") {
        check_keys(params, where, {"kappa", "radius"});
        if (params.contains("kappa")) gp.kappa = get_number(params, "kappa", where);
        if (params.contains("radius")) gp.radius = get_number(params, "radius", where);
    } else {
        check_keys(params, where, {});
    }
    return gallery(name, space, lambda, gp);
}

ScheduleSet ScheduleConfig::build() const {
    ScheduleSet s;
    s.alpha = parse_sequence(alpha);
    s.beta = parse_sequence(beta);
    s.gamma = parse_sequence(gamma);
    s.index_offset = index_offset;
    return s;
}

AnchorOptions AnchorConfig::options() const {
    AnchorOptions o;
    o.tol = tol;
    if (method == "automatic") o.method = AnchorMethod::automatic;
    else if (method == "direct") o.method = AnchorMethod::direct;
    else if (method == "newton") o.method = AnchorMethod::newton;
    else if (method == "damped") o.method = AnchorMethod::damped;
    else throw ConfigError("anchor.method must be automatic, direct, newton or damped");
    return o;
}

// ---------------------------------------------------------------------------
// Sequences

Sequence parse_sequence(const json& j) {
    const char* where = "sequence";
    if (!j.is_object()) throw ConfigError("sequence: expected an object with a 'kind'");
    const auto kind = get<std::string>(j, "kind", where);
    try {
        if (kind == "constant") {
            check_keys(j, where, {"kind", "c"});
            return Sequence::constant(get_number(j, "c", where));
        }
        if (kind == "power") {
            check_keys(j, where, {"kind", "a", "b"});
            return Sequence::power(get_number(j, "a", where), get_number(j, "b", where));
        }
        if (kind == "zero") {
            check_keys(j, where, {"kind"});
            return Sequence::zero();
        }
        if (kind == "harmonic") {
            check_keys(j, where, {"kind"});
            return Sequence::harmonic();
        }
        if (kind == "table") {
            check_keys(j, where, {"kind", "values"});
            return Sequence::table(number_array(get<json>(j, "values", where), "sequence.values"));
        }
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    throw ConfigError("sequence: unknown kind '" + kind + "'");
}

json sequence_to_json(const Sequence& s) {
    switch (s.kind()) {
        case SequenceKind::constant: return {{"kind", "constant"}, {"c", s.a()}};
        case SequenceKind::power: return {{"kind", "power"}, {"a", s.a()}, {"b", s.b()}};
        case SequenceKind::zero: return {{"kind", "zero"}};
        case SequenceKind::harmonic: return {{"kind", "harmonic"}};
        case SequenceKind::table: return {{"kind", "table"}, {"values", s.values()}};
    }
    return {};
}

// ---------------------------------------------------------------------------
// Run config

const SpaceConfig& RunConfig::require_space() const {
    if (!space) throw ConfigError("config: missing 'space'");
    return *space;
}

const OperatorConfig& RunConfig::require_operator() const {
    if (!op) throw ConfigError("config: missing 'operator'");
    return *op;
}

const ScheduleConfig& RunConfig::require_schedule() const {
    if (!schedule) throw ConfigError("config: missing 'schedule'");
    return *schedule;
}

Vector RunConfig::require_u() const {
    if (!u) throw ConfigError("config: missing 'u'");
    return to_vector(*u);
}

Vector RunConfig::require_x0() const {
    if (!x0) throw ConfigError("config: missing 'x0'");
    return to_vector(*x0);
}

std::uint64_t RunConfig::require_seed() const {
    if (!seed) throw ConfigError("config: 'seed' is required for sampled checks");
    return *seed;
}

RunConfig parse_config(const json& j) {
    check_keys(j, "config", {"space", "operator", "schedule", "u", "x0", "max_iter", "residual_tol",
                             "seed", "smoothness_samples", "certify", "anchor", "validate", "output",
                             "sweep"});
    RunConfig c;
    if (j.contains("space")) {
        const json& s = j.at("space");
        check_keys(s, "space", {"kind", "dim", "p", "K2_override", "Cq", "q"});
        SpaceConfig sc;
        sc.kind = get<std::string>(s, "kind", "space");
        sc.dim = get<int>(s, "dim", "space");
        if (s.contains("p")) sc.p = get_number(s, "p", "space");
        if (s.contains("K2_override")) sc.K2_override = get_number(s, "K2_override", "space");
        if (s.contains("Cq")) sc.Cq = get_number(s, "Cq", "space");
        if (s.contains("q")) sc.q = get_number(s, "q", "space");
        c.space = sc;
    }
    if (j.contains("operator")) {
        const json& o = j.at("operator");
        check_keys(o, "operator", {"name", "params", "lambda"});
        OperatorConfig oc;
        oc.name = get<std::string>(o, "name", "operator");
        const auto names = gallery_names();
        if (std::find(names.begin(), names.end(), oc.name) == names.end()) {
            throw ConfigError("operator: unknown name '" + oc.name + "'");
        }
        if (o.contains("params")) {
            oc.params = o.at("params");
            if (!oc.params.is_object()) throw ConfigError("operator.params must be an object");
        }
        oc.lambda = get_number(o, "lambda", "operator");
        c.op = oc;
    }
    if (j.contains("schedule")) {
        const json& s = j.at("schedule");
        check_keys(s, "schedule", {"alpha", "beta", "gamma", "index_offset"});
        ScheduleConfig sc;
        sc.alpha = get<json>(s, "alpha", "schedule");
        sc.beta = get<json>(s, "beta", "schedule");
        sc.gamma = get<json>(s, "gamma", "schedule");
        sc.index_offset = get_opt<std::size_t>(s, "index_offset", "schedule").value_or(0);
        parse_sequence(sc.alpha);
        parse_sequence(sc.beta);
        parse_sequence(sc.gamma);
        c.schedule = sc;
    }
    if (j.contains("u")) c.u = number_array(j.at("u"), "u");
    if (j.contains("x0")) c.x0 = number_array(j.at("x0"), "x0");
    if (j.contains("max_iter")) c.max_iter = get<std::size_t>(j, "max_iter", "config");
    if (j.contains("residual_tol")) {
        c.residual_tol = get_number(j, "residual_tol", "config");
        if (!(c.residual_tol >= 0.0)) throw ConfigError("residual_tol must be >= 0");
    }
    if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", "config");
    if (j.contains("smoothness_samples")) {
        c.smoothness_samples = get<int>(j, "smoothness_samples", "config");
        if (c.smoothness_samples < 1) throw ConfigError("smoothness_samples must be >= 1");
    }
    if (j.contains("certify")) {
        const json& s = j.at("certify");
        check_keys(s, "certify", {"n_pairs", "box", "lambda"});
        if (s.contains("n_pairs")) c.certify.n_pairs = get<int>(s, "n_pairs", "certify");
        if (s.contains("box")) c.certify.box = get_number(s, "box", "certify");
        if (s.contains("lambda")) c.certify.lambda = get_number(s, "lambda", "certify");
        if (c.certify.n_pairs < 1) throw ConfigError("certify.n_pairs must be >= 1");
    }
    if (j.contains("anchor")) {
        const json& s = j.at("anchor");
        check_keys(s, "anchor", {"t_grid", "tol", "method"});
        if (s.contains("t_grid")) c.anchor.t_grid = number_array(s.at("t_grid"), "anchor.t_grid");
        if (s.contains("tol")) c.anchor.tol = get_number(s, "tol", "anchor");
        if (s.contains("method")) c.anchor.method = get<std::string>(s, "method", "anchor");
        c.anchor.options();
    }
    if (j.contains("validate")) {
        const json& s = j.at("validate");
        check_keys(s, "validate", {"horizon", "lambda", "theorems"});
        c.validate.horizon = get_opt<std::size_t>(s, "horizon", "validate");
        if (s.contains("lambda")) c.validate.lambda = get_number(s, "lambda", "validate");
        if (s.contains("theorems")) {
            c.validate.theorems = get<std::vector<std::string>>(s, "theorems", "validate");
            for (const auto& t : c.validate.theorems) {
                if (t != "theorem31" && t != "theorem32" && t != "zhou" && t != "chai_song") {
                    throw ConfigError("validate.theorems: unknown theorem '" + t + "'");
                }
            }
        }
    }
    if (j.contains("output")) {
        const json& s = j.at("output");
        check_keys(s, "output", {"dir", "name"});
        c.output.dir = get_opt<std::string>(s, "dir", "output");
        if (s.contains("name")) c.output.name = get<std::string>(s, "name", "output");
    }
    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        check_keys(s, "sweep", {"alpha", "beta", "gamma"});
        SweepConfig sw;
        auto grid = [&](const char* key) -> std::optional<std::vector<json>> {
            if (!s.contains(key)) return std::nullopt;
            if (!s.at(key).is_array()) throw ConfigError(std::string("sweep.") + key + " must be an array");
            std::vector<json> out(s.at(key).begin(), s.at(key).end());
            for (const auto& seq : out) parse_sequence(seq);
            return out;
        };
        sw.alpha = grid("alpha");
        sw.beta = grid("beta");
        sw.gamma = grid("gamma");
        c.sweep = sw;
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return parse_config(j);
}

json to_json(const RunConfig& c) {
    json j = json::object();
    if (c.space) {
        json s = {{"kind", c.space->kind}, {"dim", c.space->dim}};
        if (c.space->p) s["p"] = *c.space->p;
        if (c.space->K2_override) s["K2_override"] = *c.space->K2_override;
        if (c.space->Cq) s["Cq"] = *c.space->Cq;
        if (c.space->q) s["q"] = *c.space->q;
        j["space"] = s;
    }
    if (c.op) j["operator"] = {{"name", c.op->name}, {"params", c.op->params}, {"lambda", c.op->lambda}};
    if (c.schedule) {
        j["schedule"] = {{"alpha", c.schedule->alpha},
                         {"beta", c.schedule->beta},
                         {"gamma", c.schedule->gamma},
                         {"index_offset", c.schedule->index_offset}};
    }
    if (c.u) j["u"] = *c.u;
    if (c.x0) j["x0"] = *c.x0;
    j["max_iter"] = c.max_iter;
    j["residual_tol"] = c.residual_tol;
    if (c.seed) j["seed"] = *c.seed;
    j["smoothness_samples"] = c.smoothness_samples;
    json cert = {{"n_pairs", c.certify.n_pairs}, {"box", c.certify.box}};
    if (c.certify.lambda) cert["lambda"] = *c.certify.lambda;
    j["certify"] = cert;
    j["anchor"] = {{"t_grid", c.anchor.t_grid}, {"tol", c.anchor.tol}, {"method", c.anchor.method}};
    json val = {{"theorems", c.validate.theorems}};
    if (c.validate.horizon) val["horizon"] = *c.validate.horizon;
    if (c.validate.lambda) val["lambda"] = *c.validate.lambda;
    j["validate"] = val;
    json out = {{"name", c.output.name}};
    if (c.output.dir) out["dir"] = *c.output.dir;
    j["output"] = out;
    if (c.sweep) {
        json sw = json::object();
        if (c.sweep->alpha) sw["alpha"] = *c.sweep->alpha;
        if (c.sweep->beta) sw["beta"] = *c.sweep->beta;
        if (c.sweep->gamma) sw["gamma"] = *c.sweep->gamma;
        j["sweep"] = sw;
    }
    return j;
}

Vector to_vector(const std::vector<double>& v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
    return out;
}

json vector_to_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

}  // namespace mannlab
