#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrr/datagen.hpp"
#include "nrr/features.hpp"
#include "nrr/models.hpp"

namespace nrr::config {

/// Everything one experiment needs, resolved from a JSON file plus defaults.
/// `grid.sites` is the only required input; every other field has the study
/// default.
struct ExperimentConfig {
    std::uint64_t master_seed = 42;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<models::ModelKind> model_kinds = models::all_model_kinds();
    datagen::ScenarioGrid grid;
    datagen::SurrogateConstants constants;
    features::SplitSpec split;
    std::string out_dir = "out";
    int jobs = 1;

    void validate() const;  // delegates to grid/split, checks seeds and jobs
};

// "1..5", "1,2,3", or a mix like "1,3..5"; strictly increasing not required,
// duplicates rejected
std::vector<std::uint64_t> parse_seed_list(const std::string& text);
// "all" or a comma list of rf,mlp,ae,dae; duplicates rejected
std::vector<models::ModelKind> parse_model_list(const std::string& text);

/// Strict parse: unknown keys are rejected by full path, missing required
/// keys are named. Does not apply the environment override.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Reads and parses `path`, then applies the NRR_MASTER_SEED environment
/// override if that variable is set and non-empty.
ExperimentConfig load_config(const std::string& path);

/// Canonical JSON of the data-defining core (master_seed, grid, constants,
/// split). Execution knobs (models, seeds, jobs, out_dir) are excluded so a
/// partial rerun of a later stage matches the recorded provenance.
nlohmann::json effective_json(const ExperimentConfig& cfg);

// FNV-1a over the canonical dump of effective_json
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string config_hash_hex(const ExperimentConfig& cfg);

}  // namespace nrr::config
