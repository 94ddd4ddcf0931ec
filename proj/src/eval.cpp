#include "nrr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace nrr::eval {

double mae(std::span<const double> preds, std::span<const double> targets) {
    if (preds.size() != targets.size())
        throw UsageError("mae: prediction and target lengths differ");
    if (preds.empty()) throw UsageError("mae: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) acc += std::abs(preds[i] - targets[i]);
    return acc / static_cast<double>(preds.size());
}

double r_squared(std::span<const double> preds, std::span<const double> targets) {
    if (preds.size() != targets.size())
        throw UsageError("r_squared: prediction and target lengths differ");
    if (preds.empty()) throw UsageError("r_squared: empty input");
    double mean = 0.0;
    for (double t : targets) mean += t;
    mean /= static_cast<double>(targets.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double r = targets[i] - preds[i];
        const double d = targets[i] - mean;
        ss_res += r * r;
        ss_tot += d * d;
    }
    if (ss_tot == 0.0)
        throw DataError("r_squared: target variance is zero, coefficient undefined");
    return 1.0 - ss_res / ss_tot;
}

double population_std(std::span<const double> values) {
    if (values.empty()) throw UsageError("population_std: empty input");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double acc = 0.0;
    for (double v : values) {
        const double d = v - mean;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(values.size()));
}

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw UsageError("quantile_sorted: empty input");
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError("quantile_sorted: p outside [0,1]");
    const std::size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double rank = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(rank);
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

MetricsRow pooled_metrics(models::ModelKind kind, const std::string& site,
                          const std::vector<const RunResult*>& runs) {
    std::vector<double> preds;
    std::vector<double> targets;
    for (const RunResult* run : runs) {
        for (const PredictionRow& row : run->rows) {
            preds.push_back(row.prediction);
            targets.push_back(row.target);
        }
    }
    MetricsRow out;
    out.kind = kind;
    out.site = site;
    out.mae = mae(preds, targets);
    out.r2 = r_squared(preds, targets);
    out.sigma = population_std(preds);
    return out;
}

}  // namespace

MetricsRow aggregate_metrics(const std::vector<RunResult>& runs) {
    if (runs.empty()) throw UsageError("aggregate_metrics: no runs");
    std::vector<const RunResult*> ptrs;
    for (const RunResult& run : runs) {
        if (run.kind != runs.front().kind || run.site != runs.front().site)
            throw UsageError("aggregate_metrics: runs mix model kinds or sites");
        ptrs.push_back(&run);
    }
    return pooled_metrics(runs.front().kind, runs.front().site, ptrs);
}

MetricsRow single_run_metrics(const RunResult& run) {
    return pooled_metrics(run.kind, run.site, {&run});
}

std::array<MonthlyResidualStats, 12> monthly_residual_stats(const std::vector<RunResult>& runs) {
    std::array<std::vector<double>, 12> residuals;
    for (const RunResult& run : runs) {
        for (const PredictionRow& row : run.rows) {
            const int m = row.scenario.fert_month;
            if (m < 1 || m > 12) throw DataError("monthly_residual_stats: month outside 1..12");
            residuals[static_cast<std::size_t>(m - 1)].push_back(
                std::abs(row.prediction - row.target));
        }
    }
    std::array<MonthlyResidualStats, 12> out{};
    for (int m = 0; m < 12; ++m) {
        auto& vals = residuals[static_cast<std::size_t>(m)];
        auto& st = out[static_cast<std::size_t>(m)];
        st.month = m + 1;
        st.count = vals.size();
        if (vals.empty()) continue;
        std::sort(vals.begin(), vals.end());
        st.p0 = quantile_sorted(vals, 0.0);
        st.q25 = quantile_sorted(vals, 0.25);
        st.q50 = quantile_sorted(vals, 0.50);
        st.q75 = quantile_sorted(vals, 0.75);
        st.p100 = quantile_sorted(vals, 1.0);
    }
    return out;
}

GateVerdict operational_gate(models::ModelKind kind, const std::string& site,
                             const std::array<MonthlyResidualStats, 12>& stats,
                             double threshold) {
    GateVerdict verdict;
    verdict.kind = kind;
    verdict.site = site;
    verdict.threshold = threshold;
    verdict.overall = true;
    for (std::size_t m = 0; m < 12; ++m) {
        const bool pass = stats[m].count > 0 && stats[m].q75 <= threshold;
        verdict.month_pass[m] = pass;
        if (!pass) verdict.overall = false;
    }
    return verdict;
}

}  // namespace nrr::eval
