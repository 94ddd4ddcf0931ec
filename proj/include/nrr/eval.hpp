#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nrr/common.hpp"
#include "nrr/models.hpp"

namespace nrr::eval {

constexpr double kGateThreshold = 5.0;  // kg_yield/ha/kg_N

struct PredictionRow {
    datagen::Scenario scenario;
    double prediction = 0.0;
    double target = 0.0;
};

/// Test-set predictions of one (model kind, site, seed) run.
struct RunResult {
    models::ModelKind kind = models::ModelKind::mlp;
    std::string site;
    std::uint64_t seed = 0;
    std::vector<PredictionRow> rows;
};

struct MetricsRow {
    models::ModelKind kind = models::ModelKind::mlp;
    std::string site;
    double mae = 0.0;
    double r2 = 0.0;
    double sigma = 0.0;  // population std of pooled predictions
};

struct MonthlyResidualStats {
    int month = 0;       // 1..12
    std::size_t count = 0;
    double p0 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, p100 = 0.0;
};

struct GateVerdict {
    models::ModelKind kind = models::ModelKind::mlp;
    std::string site;
    double threshold = kGateThreshold;
    std::array<bool, 12> month_pass{};
    bool overall = false;
};

double mae(std::span<const double> preds, std::span<const double> targets);
// 1 - SS_res/SS_tot; zero target variance -> DataError
double r_squared(std::span<const double> preds, std::span<const double> targets);
double population_std(std::span<const double> values);

/// Quantile by linear interpolation between order statistics: at rank
/// p*(n-1) of the sorted values. `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double p);

/// Pooled MAE / R² over all runs' rows plus the population std of the pooled
/// predictions. Runs must share kind and site.
MetricsRow aggregate_metrics(const std::vector<RunResult>& runs);
MetricsRow single_run_metrics(const RunResult& run);

/// |residual| quartiles per fertilization month, pooled over years and runs.
/// A month absent from the data keeps count = 0 and zero quartiles.
std::array<MonthlyResidualStats, 12> monthly_residual_stats(const std::vector<RunResult>& runs);

/// A month passes iff its q75 of |residual| <= threshold (a month with no
/// residuals cannot demonstrate compliance and fails). Overall verdict is
/// the conjunction over months.
GateVerdict operational_gate(models::ModelKind kind, const std::string& site,
                             const std::array<MonthlyResidualStats, 12>& stats,
                             double threshold = kGateThreshold);

}  // namespace nrr::eval
