#include "nrr/forest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "nrr/textio.hpp"

namespace nrr::forest {

bool RfBounds::contains(const RfHyperparams& p) const {
    const int v[4] = {p.n_estimators, p.max_depth, p.min_samples_split, p.min_samples_leaf};
    for (int d = 0; d < 4; ++d)
        if (v[d] < lo[d] || v[d] > hi[d]) return false;
    return true;
}

double RegressionTree::predict(const double* row) const {
    int i = 0;
    while (!nodes[static_cast<std::size_t>(i)].leaf()) {
        const TreeNode& n = nodes[static_cast<std::size_t>(i)];
        i = row[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
}

namespace {

std::size_t subset_size(double fraction, std::size_t n_features) {
    const auto m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n_features)));
    return std::clamp<std::size_t>(m, 1, n_features);
}

// distinct feature indices in sampled order
std::vector<std::size_t> sample_features(std::size_t n_features, std::size_t m, StreamRng& rng) {
    std::vector<std::size_t> all(n_features);
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i)
        std::swap(all[i], all[i + rng.below(n_features - i)]);
    all.resize(m);
    return all;
}

struct BestSplit {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
    std::vector<std::size_t> left, right;
};

BestSplit find_best_split(const RfData& data, const std::vector<std::size_t>& rows,
                          const std::vector<std::size_t>& features, int min_samples_leaf) {
    BestSplit best;
    const std::size_t n = rows.size();
    double total = 0.0;
    for (std::size_t r : rows) total += data.y[r];
    const double base = total * total / static_cast<double>(n);

    std::vector<std::pair<double, double>> vals(n);  // (x, y) sorted per feature
    for (std::size_t f : features) {
        for (std::size_t i = 0; i < n; ++i)
            vals[i] = {data.at(rows[i], f), data.y[rows[i]]};
        std::sort(vals.begin(), vals.end());
        double left_sum = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left_sum += vals[i].second;
            if (vals[i].first == vals[i + 1].first) continue;
            const std::size_t n_left = i + 1;
            const std::size_t n_right = n - n_left;
            if (n_left < static_cast<std::size_t>(min_samples_leaf) ||
                n_right < static_cast<std::size_t>(min_samples_leaf))
                continue;
            const double right_sum = total - left_sum;
            const double gain = left_sum * left_sum / static_cast<double>(n_left) +
                                right_sum * right_sum / static_cast<double>(n_right) - base;
            if (gain > best.gain) {
                double t = 0.5 * (vals[i].first + vals[i + 1].first);
                // keep the partition identical to the scan even when the
                // midpoint rounds up to the right-hand value
                if (!(t < vals[i + 1].first)) t = vals[i].first;
                best.found = true;
                best.feature = static_cast<int>(f);
                best.threshold = t;
                best.gain = gain;
            }
        }
    }
    if (best.found) {
        for (std::size_t r : rows) {
            if (data.at(r, static_cast<std::size_t>(best.feature)) <= best.threshold)
                best.left.push_back(r);
            else
                best.right.push_back(r);
        }
    }
    return best;
}

}  // namespace

RegressionTree fit_tree(const RfData& data, const std::vector<std::size_t>& row_indices,
                        const RfHyperparams& params, const StreamKey& seed_key,
                        std::vector<SplitRecord>* recorder) {
    if (row_indices.empty()) throw UsageError("fit_tree needs rows");
    const std::size_t m = subset_size(params.max_features_fraction, data.n_features);

    RegressionTree tree;
    struct Pending {
        int node;
        std::vector<std::size_t> rows;
        int depth;
    };
    std::vector<Pending> stack;

    auto make_node = [&](const std::vector<std::size_t>& rows) {
        double sum = 0.0;
        for (std::size_t r : rows) sum += data.y[r];
        TreeNode node;
        node.value = sum / static_cast<double>(rows.size());
        node.count = static_cast<int>(rows.size());
        tree.nodes.push_back(node);
        return static_cast<int>(tree.nodes.size()) - 1;
    };

    stack.push_back({make_node(row_indices), row_indices, 0});
    while (!stack.empty()) {
        Pending cur = std::move(stack.back());
        stack.pop_back();
        const std::size_t n = cur.rows.size();
        if (cur.depth >= params.max_depth ||
            n < static_cast<std::size_t>(params.min_samples_split) ||
            n < 2 * static_cast<std::size_t>(params.min_samples_leaf))
            continue;

        StreamRng rng(StreamKey(seed_key).add("node").add(cur.node));
        const std::vector<std::size_t> features = sample_features(data.n_features, m, rng);
        BestSplit split = find_best_split(data, cur.rows, features, params.min_samples_leaf);
        if (!split.found || split.gain <= 0.0) continue;

        if (recorder)
            recorder->push_back(
                {cur.node, cur.rows, features, split.feature, split.threshold, split.gain});

        const int left = make_node(split.left);
        const int right = make_node(split.right);
        TreeNode& node = tree.nodes[static_cast<std::size_t>(cur.node)];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.left = left;
        node.right = right;
        stack.push_back({left, std::move(split.left), cur.depth + 1});
        stack.push_back({right, std::move(split.right), cur.depth + 1});
    }
    return tree;
}

double ForestModel::predict(const double* row) const {
    double sum = 0.0;
    for (const RegressionTree& t : trees) sum += t.predict(row);
    return sum / static_cast<double>(trees.size());
}

ForestModel fit_forest(const RfData& data, const RfHyperparams& params, std::uint64_t seed,
                       int jobs) {
    if (data.rows() == 0) throw UsageError("fit_forest needs rows");
    ForestModel model;
    model.params = params;
    model.seed = seed;
    model.trees.resize(static_cast<std::size_t>(params.n_estimators));
    const std::size_t n = data.rows();
    parallel_for(model.trees.size(), jobs, [&](std::size_t t) {
        StreamRng boot(StreamKey(seed).add("bootstrap").add(static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = boot.below(n);
        model.trees[t] =
            fit_tree(data, rows, params, StreamKey(seed).add("tree").add(static_cast<std::uint64_t>(t)));
    });
    return model;
}

double cross_validate(const RfData& data, const RfHyperparams& params, int k, std::uint64_t seed,
                      int jobs, std::vector<double>* fold_maes) {
    if (k < 2) throw UsageError("cross_validate needs k >= 2");
    const std::size_t n = data.rows();
    if (n < static_cast<std::size_t>(k)) throw UsageError("cross_validate needs at least k rows");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    StreamRng rng(StreamKey(seed).add("cv-perm"));
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t rem = n % static_cast<std::size_t>(k);
    std::vector<double> maes(static_cast<std::size_t>(k), 0.0);
    std::size_t start = 0;
    for (int fold = 0; fold < k; ++fold) {
        const std::size_t size = base + (static_cast<std::size_t>(fold) < rem ? 1 : 0);
        const std::size_t stop = start + size;

        RfData train;
        train.n_features = data.n_features;
        train.x.reserve((n - size) * data.n_features);
        train.y.reserve(n - size);
        for (std::size_t i = 0; i < n; ++i) {
            if (i >= start && i < stop) continue;
            const double* row = data.row(perm[i]);
            train.x.insert(train.x.end(), row, row + data.n_features);
            train.y.push_back(data.y[perm[i]]);
        }
        const ForestModel model =
            fit_forest(train, params, StreamKey(seed).add("cv-fit").add(fold).value(), jobs);

        double abs_sum = 0.0;
        for (std::size_t i = start; i < stop; ++i)
            abs_sum += std::abs(model.predict(data.row(perm[i])) - data.y[perm[i]]);
        maes[static_cast<std::size_t>(fold)] = abs_sum / static_cast<double>(size);
        start = stop;
    }
    if (fold_maes) *fold_maes = maes;
    double mean = 0.0;
    for (double v : maes) mean += v;
    return mean / static_cast<double>(k);
}

// ---- Bayesian optimization ------------------------------------------------

namespace {

double radical_inverse(std::uint64_t i, std::uint64_t base) {
    double result = 0.0;
    double f = 1.0 / static_cast<double>(base);
    while (i > 0) {
        result += f * static_cast<double>(i % base);
        i /= base;
        f /= static_cast<double>(base);
    }
    return result;
}

RfHyperparams params_from_ints(const int v[4]) {
    RfHyperparams p;
    p.n_estimators = v[0];
    p.max_depth = v[1];
    p.min_samples_split = v[2];
    p.min_samples_leaf = v[3];
    return p;
}

void params_to_ints(const RfHyperparams& p, int v[4]) {
    v[0] = p.n_estimators;
    v[1] = p.max_depth;
    v[2] = p.min_samples_split;
    v[3] = p.min_samples_leaf;
}

// lower-triangular Cholesky factor of a symmetric positive-definite matrix
std::vector<double> cholesky(std::vector<double> a, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
        if (diag <= 0.0) throw StructuralError("covariance matrix is not positive definite");
        const double root = std::sqrt(diag);
        a[j * n + j] = root;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = v / root;
        }
        for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = 0.0;
    }
    return a;
}

std::vector<double> solve_lower(const std::vector<double>& l, std::size_t n,
                                std::vector<double> b) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) b[i] -= l[i * n + k] * b[k];
        b[i] /= l[i * n + i];
    }
    return b;
}

std::vector<double> solve_upper_t(const std::vector<double>& l, std::size_t n,
                                  std::vector<double> b) {
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) b[i] -= l[k * n + i] * b[k];
        b[i] /= l[i * n + i];
    }
    return b;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

constexpr double kGpLengthscale = 0.3;
constexpr double kGpNoise = 1e-6;
constexpr int kEiCandidates = 512;

double sq_exp_kernel(const double* a, const double* b, std::size_t dims) {
    double r2 = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
        const double diff = a[d] - b[d];
        r2 += diff * diff;
    }
    return std::exp(-r2 / (2.0 * kGpLengthscale * kGpLengthscale));
}

}  // namespace

BoTrace bayes_opt(const RfData& data, const RfBounds& bounds, int iterations, std::uint64_t seed,
                  int jobs, int initial_design, int cv_folds) {
    if (iterations < initial_design)
        throw ConfigError("bayes_opt iteration budget is smaller than the initial design");
    constexpr std::size_t dims = 4;
    static constexpr std::uint64_t bases[dims] = {2, 3, 5, 7};

    const std::uint64_t cv_seed = StreamKey(seed).add("bo-cv").value();
    auto objective = [&](const RfHyperparams& p) {
        return cross_validate(data, p, cv_folds, cv_seed, jobs);
    };

    auto scale = [&](const RfHyperparams& p, double* out) {
        int v[4];
        params_to_ints(p, v);
        for (std::size_t d = 0; d < dims; ++d) {
            const double span = static_cast<double>(bounds.hi[d] - bounds.lo[d]);
            out[d] = span > 0.0 ? (v[d] - bounds.lo[d]) / span : 0.0;
        }
    };

    BoTrace trace;
    std::vector<double> scaled;  // evaluated points, dims per row
    std::vector<double> observed;

    auto record = [&](const RfHyperparams& p, double mae) {
        double pt[dims];
        scale(p, pt);
        scaled.insert(scaled.end(), pt, pt + dims);
        observed.push_back(mae);
        const double incumbent =
            trace.steps.empty() ? mae : std::min(mae, trace.steps.back().incumbent_mae);
        trace.steps.push_back({p, mae, incumbent});
    };

    // rotated Halton initial design
    StreamRng rot_rng(StreamKey(seed).add("bo-rot"));
    double rotation[dims];
    for (double& r : rotation) r = rot_rng.uniform();
    for (int i = 0; i < initial_design; ++i) {
        int v[4];
        for (std::size_t d = 0; d < dims; ++d) {
            double u = radical_inverse(static_cast<std::uint64_t>(i) + 1, bases[d]) + rotation[d];
            u -= std::floor(u);
            const int span = bounds.hi[d] - bounds.lo[d] + 1;
            v[d] = bounds.lo[d] +
                   std::min(span - 1, static_cast<int>(std::floor(u * static_cast<double>(span))));
        }
        const RfHyperparams p = params_from_ints(v);
        record(p, objective(p));
    }

    for (int iter = initial_design; iter < iterations; ++iter) {
        const std::size_t n = observed.size();

        double y_mean = 0.0;
        for (double v : observed) y_mean += v;
        y_mean /= static_cast<double>(n);
        double y_var = 0.0;
        for (double v : observed) y_var += (v - y_mean) * (v - y_mean);
        double y_std = std::sqrt(y_var / static_cast<double>(n));
        if (y_std == 0.0) y_std = 1.0;
        std::vector<double> y_scaled(n);
        for (std::size_t i = 0; i < n; ++i) y_scaled[i] = (observed[i] - y_mean) / y_std;
        const double y_best = *std::min_element(y_scaled.begin(), y_scaled.end());

        std::vector<double> cov(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                cov[i * n + j] = sq_exp_kernel(&scaled[i * dims], &scaled[j * dims], dims) +
                                 (i == j ? kGpNoise : 0.0);
        const std::vector<double> chol = cholesky(std::move(cov), n);
        const std::vector<double> alpha = solve_upper_t(chol, n, solve_lower(chol, n, y_scaled));

        StreamRng cand_rng(StreamKey(seed).add("bo-cand").add(iter));
        double best_ei = -1.0;
        RfHyperparams best_candidate;
        for (int c = 0; c < kEiCandidates; ++c) {
            int v[4];
            for (std::size_t d = 0; d < dims; ++d) {
                const auto span = static_cast<std::uint64_t>(bounds.hi[d] - bounds.lo[d] + 1);
                v[d] = bounds.lo[d] + static_cast<int>(cand_rng.below(span));
            }
            const RfHyperparams p = params_from_ints(v);
            double pt[dims];
            scale(p, pt);
            std::vector<double> k_star(n);
            for (std::size_t i = 0; i < n; ++i)
                k_star[i] = sq_exp_kernel(pt, &scaled[i * dims], dims);
            double mu = 0.0;
            for (std::size_t i = 0; i < n; ++i) mu += k_star[i] * alpha[i];
            const std::vector<double> w = solve_lower(chol, n, k_star);
            double var = 1.0 + kGpNoise;
            for (double x : w) var -= x * x;
            var = std::max(var, 1e-12);
            const double sigma = std::sqrt(var);
            const double improvement = y_best - mu;
            const double z = improvement / sigma;
            const double ei = improvement * normal_cdf(z) + sigma * normal_pdf(z);
            if (ei > best_ei) {
                best_ei = ei;
                best_candidate = p;
            }
        }
        record(best_candidate, objective(best_candidate));
    }

    std::size_t best_idx = 0;
    for (std::size_t i = 1; i < trace.steps.size(); ++i)
        if (trace.steps[i].cv_mae < trace.steps[best_idx].cv_mae) best_idx = i;
    trace.best = trace.steps[best_idx].params;
    trace.best_mae = trace.steps[best_idx].cv_mae;
    return trace;
}

// ---- checkpoint files ---------------------------------------------------

void save_forest(const std::string& path, const ForestModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "nrrforest 1\n";
    out << "params " << model.params.n_estimators << ' ' << model.params.max_depth << ' '
        << model.params.min_samples_split << ' ' << model.params.min_samples_leaf << ' '
        << format_double(model.params.max_features_fraction) << "\n";
    out << "seed " << model.seed << "\n";
    out << "trees " << model.trees.size() << "\n";
    for (const RegressionTree& tree : model.trees) {
        out << "tree " << tree.nodes.size() << "\n";
        for (const TreeNode& n : tree.nodes)
            out << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left << ' '
                << n.right << ' ' << format_double(n.value) << ' ' << n.count << "\n";
    }
    out.close();
    if (!out) throw DataError("write failed: " + path);
}

ForestModel load_forest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    auto expect = [&](const std::string& tag) {
        std::string word;
        if (!(in >> word) || word != tag)
            throw DataError("bad forest file " + path + ": expected '" + tag + "'");
    };
    expect("nrrforest");
    int version = 0;
    in >> version;
    if (version != 1) throw DataError("unsupported forest version in " + path);
    ForestModel model;
    expect("params");
    std::string fraction;
    in >> model.params.n_estimators >> model.params.max_depth >> model.params.min_samples_split >>
        model.params.min_samples_leaf >> fraction;
    model.params.max_features_fraction = parse_double(fraction);
    expect("seed");
    in >> model.seed;
    expect("trees");
    std::size_t n_trees = 0;
    in >> n_trees;
    model.trees.resize(n_trees);
    for (RegressionTree& tree : model.trees) {
        expect("tree");
        std::size_t n_nodes = 0;
        in >> n_nodes;
        tree.nodes.resize(n_nodes);
        for (TreeNode& node : tree.nodes) {
            std::string threshold, value;
            if (!(in >> node.feature >> threshold >> node.left >> node.right >> value >>
                  node.count))
                throw DataError("bad forest file " + path + ": truncated tree");
            node.threshold = parse_double(threshold);
            node.value = parse_double(value);
        }
    }
    return model;
}

}  // namespace nrr::forest
