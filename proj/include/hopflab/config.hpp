#pragma once

#include "hopflab/geometry.hpp"
#include "hopflab/mc.hpp"
#include "hopflab/operator.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hopflab {

using Json = nlohmann::ordered_json;

std::vector<std::string> operator_preset_names();
/// laplacian: Q = I. anisotropic (d = 2): Q = [[1, .3], [.3, .7]], b = (.5, -.25).
/// two-point-jump: Q = I, unit mass at each of ±e1.
/// truncated-stable: Q = I, index 1, truncation 0.5, cutoff 0.1.
OperatorSpec operator_preset(const std::string& name, int dim);

/// Constant-coefficient operators only; no expressions are parsed.
OperatorSpec operator_from_json(const Json& j);
Json operator_to_json(const OperatorSpec& op);

DomainSpec domain_from_json(const Json& j);
Json domain_to_json(const DomainSpec& dom);

/// zero | uniform(value) | ball(center, radius, value)
struct KillingSpec {
    std::string kind = "zero";
    double value = 0.0;
    Vec center;
    double radius = 0.0;

    KillingRate rate() const;
};
KillingSpec killing_from_json(const Json& j, int dim);
Json killing_to_json(const KillingSpec& k);

std::vector<std::string> task_names();

struct ScenarioConfig {
    std::string task;
    OperatorSpec op;
    DomainSpec dom;
    KillingSpec killing;
    double h = 0.05;
    PathConfig mc;
    std::uint64_t first_seed = 0;
    std::size_t n_seeds = 1;
    Vec x0;
    double tol = 1e-9;
    double K = 1.0;
    std::string out_dir = "run";
    std::string suite = "smoke";
    Json raw;  ///< the validated input, echoed into metadata
};

/// Validates every key and range before anything is computed; throws ConfigError.
ScenarioConfig parse_scenario(const Json& j);

/// "section.key=value"; the value is parsed as JSON when possible, else kept as a string.
void apply_override(Json& j, const std::string& assignment);

/// Reads a JSON file and applies the overrides in order.
Json load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides);

}  // namespace hopflab
