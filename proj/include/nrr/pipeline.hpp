#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "nrr/config.hpp"

namespace nrr::pipeline {

/// Layout of one experiment's output tree. Stages communicate exclusively
/// through these files plus the manifest.
struct Paths {
    std::filesystem::path root;

    std::filesystem::path data() const { return root / "data"; }
    std::filesystem::path samples() const { return root / "samples"; }
    std::filesystem::path models() const { return root / "models"; }
    std::filesystem::path logs() const { return root / "logs"; }
    std::filesystem::path runs() const { return root / "runs"; }
    std::filesystem::path reports() const { return root / "reports"; }
    std::filesystem::path manifest() const { return root / "manifest.json"; }

    std::filesystem::path daily_file(const std::string& site) const;
    std::filesystem::path label_file(const std::string& site) const;
    // part is train, validation or test
    std::filesystem::path sample_file(const std::string& site, const std::string& part) const;
    std::filesystem::path scaler_file(const std::string& site) const;
    std::filesystem::path model_file(nrr::models::ModelKind kind, const std::string& site,
                                     std::uint64_t seed) const;
    std::filesystem::path train_log_file(nrr::models::ModelKind kind, const std::string& site,
                                         std::uint64_t seed) const;
    std::filesystem::path botrace_file(const std::string& site) const;
    std::filesystem::path rf_params_file(const std::string& site) const;
    std::filesystem::path run_file(nrr::models::ModelKind kind, const std::string& site,
                                   std::uint64_t seed) const;
};

Paths paths_for(const config::ExperimentConfig& cfg);

// short identifier like mlp_waiotu_seed3, used in file names and errors
std::string run_name(nrr::models::ModelKind kind, const std::string& site, std::uint64_t seed);

/// Stage commands. Each verifies that the stages it depends on ran with the
/// same data-defining configuration (StageError / ConfigError otherwise),
/// writes its outputs, and records itself in the manifest. All outputs are
/// byte-deterministic for a fixed config.
void cmd_generate(const config::ExperimentConfig& cfg);
void cmd_preprocess(const config::ExperimentConfig& cfg);
void cmd_train(const config::ExperimentConfig& cfg);
void cmd_evaluate(const config::ExperimentConfig& cfg);
void cmd_report(const config::ExperimentConfig& cfg);
void run_all(const config::ExperimentConfig& cfg);

}  // namespace nrr::pipeline
