#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mannlab/iteration.hpp"
#include "mannlab/operators.hpp"
#include "mannlab/schedules.hpp"
#include "mannlab/space.hpp"

namespace mannlab {

using json = nlohmann::json;

/// Malformed or incomplete configuration (exit code 1).
class ConfigError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

struct SpaceConfig {
    std::string kind = "euclidean";
    int dim = 1;
    std::optional<double> p;
    std::optional<double> K2_override;
    std::optional<double> Cq;
    std::optional<double> q;

    Space build() const;
};

struct OperatorConfig {
    std::string name;
    json params = json::object();
    double lambda = 0.5;

    Operator build(const Space& space) const;
};

struct ScheduleConfig {
    json alpha;
    json beta;
    json gamma;
    std::size_t index_offset = 0;

    ScheduleSet build() const;
};

struct CertifyConfig {
    int n_pairs = kDefaultPairs;
    double box = kDefaultSamplingBox;
    std::optional<double> lambda;
};

struct AnchorConfig {
    std::vector<double> t_grid = default_t_grid();
    double tol = 1e-10;
    std::string method = "automatic";

    AnchorOptions options() const;
};

struct ValidateConfig {
    std::optional<std::size_t> horizon;
    std::optional<double> lambda;
    std::vector<std::string> theorems = {"theorem31"};
};

struct OutputConfig {
    std::optional<std::string> dir;
    std::string name = "run";
};

struct SweepConfig {
    std::optional<std::vector<json>> alpha;
    std::optional<std::vector<json>> beta;
    std::optional<std::vector<json>> gamma;
};

/// One JSON document describing an experiment. Sections a command does
/// not use may be absent; unknown keys are rejected everywhere.
struct RunConfig {
    std::optional<SpaceConfig> space;
    std::optional<OperatorConfig> op;
    std::optional<ScheduleConfig> schedule;
    std::optional<std::vector<double>> u;
    std::optional<std::vector<double>> x0;
    std::size_t max_iter = 100000;
    double residual_tol = 1e-8;
    std::optional<std::uint64_t> seed;
    int smoothness_samples = 2000;
    CertifyConfig certify;
    AnchorConfig anchor;
    ValidateConfig validate;
    OutputConfig output;
    std::optional<SweepConfig> sweep;

    /// Throws ConfigError naming the missing section.
    const SpaceConfig& require_space() const;
    const OperatorConfig& require_operator() const;
    const ScheduleConfig& require_schedule() const;
    Vector require_u() const;
    Vector require_x0() const;
    std::uint64_t require_seed() const;
};

Sequence parse_sequence(const json& j);
json sequence_to_json(const Sequence& s);

RunConfig parse_config(const json& j);
RunConfig load_config(const std::string& path);
json to_json(const RunConfig& cfg);

Vector to_vector(const std::vector<double>& v);
json vector_to_json(const Vector& v);

}  // namespace mannlab
