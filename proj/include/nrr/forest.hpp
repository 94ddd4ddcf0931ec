#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nrr/common.hpp"
#include "nrr/rng.hpp"

namespace nrr::forest {

/// Row-major regression dataset for the tree learners.
struct RfData {
    std::size_t n_features = 0;
    std::vector<double> x;  // rows * n_features
    std::vector<double> y;

    std::size_t rows() const { return n_features == 0 ? 0 : x.size() / n_features; }
    const double* row(std::size_t i) const { return x.data() + i * n_features; }
    double at(std::size_t i, std::size_t j) const { return x[i * n_features + j]; }
};

struct RfHyperparams {
    int n_estimators = 100;
    int max_depth = 8;
    int min_samples_split = 30;
    int min_samples_leaf = 30;
    double max_features_fraction = 0.33;  // fixed, not tuned
};

/// Tuning bounds: n_estimators, max_depth, min_samples_split, min_samples_leaf.
struct RfBounds {
    int lo[4] = {50, 3, 30, 30};
    int hi[4] = {800, 12, 500, 500};

    bool contains(const RfHyperparams& p) const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf mean
    int count = 0;

    bool leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(const double* row) const;
};

/// One recorded split decision, for oracle comparison in tests.
struct SplitRecord {
    int node = 0;
    std::vector<std::size_t> rows;            // row indices reaching the node
    std::vector<std::size_t> feature_subset;  // features considered there
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;  // sum-of-squares reduction
};

/// Greedy CART with variance-reduction splits over a per-node random feature
/// subset of ceil(fraction * n_features). Candidate thresholds are midpoints
/// between consecutive sorted distinct values.
RegressionTree fit_tree(const RfData& data, const std::vector<std::size_t>& row_indices,
                        const RfHyperparams& params, const StreamKey& seed_key,
                        std::vector<SplitRecord>* recorder = nullptr);

struct ForestModel {
    RfHyperparams params;
    std::uint64_t seed = 0;
    std::vector<RegressionTree> trees;

    double predict(const double* row) const;
};

// bootstrap resamples of size rows(), per-tree seeds derived from (seed, index)
ForestModel fit_forest(const RfData& data, const RfHyperparams& params, std::uint64_t seed,
                       int jobs = 1);

/// Mean MAE over k contiguous folds of a seeded permutation.
double cross_validate(const RfData& data, const RfHyperparams& params, int k, std::uint64_t seed,
                      int jobs = 1, std::vector<double>* fold_maes = nullptr);

struct BoStep {
    RfHyperparams params;
    double cv_mae = 0.0;
    double incumbent_mae = 0.0;
};

struct BoTrace {
    std::vector<BoStep> steps;
    RfHyperparams best;
    double best_mae = 0.0;
};

/// Sequential model-based tuning: a quasi-random initial design of 8 points,
/// then expected-improvement proposals under a Gaussian-process surrogate
/// (squared-exponential kernel on min-max-scaled parameters, noise 1e-6, EI
/// maximized over 512 seeded uniform candidates). Deterministic per seed.
BoTrace bayes_opt(const RfData& data, const RfBounds& bounds, int iterations, std::uint64_t seed,
                  int jobs = 1, int initial_design = 8, int cv_folds = 5);

// ---- checkpoint files ---------------------------------------------------

void save_forest(const std::string& path, const ForestModel& model);
ForestModel load_forest(const std::string& path);

}  // namespace nrr::forest
