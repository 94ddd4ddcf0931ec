#include "nrr/nn.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "nrr/textio.hpp"

namespace nrr::nn {

Layer make_dense(std::size_t in, std::size_t out, bool trainable) {
    Layer l;
    l.kind = LayerKind::dense;
    l.dense.weights = Matrix(out, in);
    l.dense.bias.assign(out, 0.0);
    l.dense.trainable = trainable;
    return l;
}

Layer make_relu() {
    Layer l;
    l.kind = LayerKind::relu;
    return l;
}

Layer make_dropout(double rate) {
    if (rate < 0.0 || rate >= 1.0) throw StructuralError("dropout rate must be in [0, 1)");
    Layer l;
    l.kind = LayerKind::dropout;
    l.dropout_rate = rate;
    return l;
}

std::size_t Network::input_width() const {
    for (const Layer& l : layers)
        if (l.kind == LayerKind::dense) return l.dense.weights.cols();
    return 0;
}

std::size_t Network::output_width() const {
    std::size_t w = input_width();
    for (const Layer& l : layers) w = l.out_width(w);
    return w;
}

void Network::validate() const {
    std::vector<std::size_t> widths;  // width after each layer
    std::size_t w = input_width();
    for (const Layer& l : layers) {
        if (l.kind == LayerKind::dense && l.dense.weights.cols() != w)
            throw StructuralError("dense layer input width mismatch");
        w = l.out_width(w);
        widths.push_back(w);
    }
    for (const SkipLink& s : skips) {
        if (s.src < 0 || s.dst <= s.src || s.dst >= static_cast<int>(layers.size()))
            throw StructuralError("skip link must run forward between existing layers");
        if (widths[s.src] != widths[s.dst])
            throw StructuralError("skip link joins layers of different widths");
    }
}

namespace {

Matrix dense_forward(const DenseParams& d, const Matrix& x) {
    Matrix y = Matrix::multiply_bt(x, d.weights);
    for (std::size_t r = 0; r < y.rows(); ++r) {
        double* row = y.data() + r * y.cols();
        for (std::size_t c = 0; c < y.cols(); ++c) row[c] += d.bias[c];
    }
    return y;
}

Matrix relu_forward(const Matrix& x) {
    Matrix y = x;
    double* p = y.data();
    for (std::size_t i = 0; i < y.size(); ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
    return y;
}

// shared by forward and forward_prefix; `cache` is always non-null here
Matrix run_layers(const Network& net, const Matrix& x, std::size_t upto, Mode mode,
                  StreamRng* rng, ForwardCache* cache, const std::vector<Matrix>* frozen_masks) {
    if (net.layers.empty()) throw StructuralError("empty network");
    // a network with no dense layer has no fixed width
    if (net.input_width() != 0 && x.cols() != net.input_width())
        throw StructuralError("batch width does not match network input");
    if (upto >= net.layers.size()) throw StructuralError("prefix end out of range");

    cache->input = x;
    cache->outputs.assign(net.layers.size(), Matrix());
    cache->dropout_masks.assign(net.layers.size(), Matrix());
    cache->valid = true;

    Matrix cur = x;
    for (std::size_t i = 0; i <= upto; ++i) {
        const Layer& l = net.layers[i];
        switch (l.kind) {
            case LayerKind::dense:
                cur = dense_forward(l.dense, cur);
                break;
            case LayerKind::relu:
                cur = relu_forward(cur);
                break;
            case LayerKind::dropout: {
                if (mode == Mode::train && l.dropout_rate > 0.0) {
                    Matrix mask(cur.rows(), cur.cols());
                    if (frozen_masks && i < frozen_masks->size() && !(*frozen_masks)[i].empty()) {
                        mask = (*frozen_masks)[i];
                        if (!mask.same_shape(cur))
                            throw StructuralError("frozen dropout mask shape mismatch");
                    } else {
                        if (rng == nullptr)
                            throw UsageError("train-mode dropout requires an rng or frozen masks");
                        // inverted scaling keeps the mask expectation at 1
                        const double keep = 1.0 - l.dropout_rate;
                        for (std::size_t k = 0; k < mask.size(); ++k)
                            mask.data()[k] = rng->bernoulli(keep) ? 1.0 / keep : 0.0;
                    }
                    for (std::size_t k = 0; k < cur.size(); ++k) cur.data()[k] *= mask.data()[k];
                    cache->dropout_masks[i] = std::move(mask);
                }
                break;
            }
        }
        // additive skips land on the destination layer's output
        for (const SkipLink& s : net.skips) {
            if (s.dst == static_cast<int>(i)) {
                if (cache->outputs[s.src].empty())
                    throw StructuralError("skip source output not available");
                cur += cache->outputs[s.src];
            }
        }
        cache->outputs[i] = cur;
    }
    return cur;
}

}  // namespace

Matrix Network::forward(const Matrix& x, Mode mode, StreamRng* rng, ForwardCache* cache,
                        const std::vector<Matrix>* frozen_masks) const {
    if (layers.empty()) throw StructuralError("empty network");
    ForwardCache local;
    return run_layers(*this, x, layers.size() - 1, mode, rng, cache ? cache : &local,
                      frozen_masks);
}

Matrix Network::forward_prefix(const Matrix& x, std::size_t upto, Mode mode, StreamRng* rng,
                               ForwardCache* cache) const {
    ForwardCache local;
    return run_layers(*this, x, upto, mode, rng, cache ? cache : &local, nullptr);
}

Matrix Network::backward(const ForwardCache& cache, const Matrix& grad_output, Gradients& grads,
                         const std::vector<std::pair<int, Matrix>>& injections) const {
    if (!cache.valid || cache.outputs.size() != layers.size())
        throw UsageError("backward called without a matching train-mode forward");

    grads.weights.assign(layers.size(), Matrix());
    grads.bias.assign(layers.size(), {});

    // g[i] = dL / d(output of layer i)
    std::vector<Matrix> g(layers.size());
    g.back() = grad_output;
    for (const auto& [idx, extra] : injections) {
        if (idx < 0 || idx >= static_cast<int>(layers.size()))
            throw StructuralError("gradient injection index out of range");
        if (g[idx].empty())
            g[idx] = extra;
        else
            g[idx] += extra;
    }

    Matrix grad_input;
    for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
        if (g[i].empty()) g[i] = Matrix(cache.outputs[i].rows(), cache.outputs[i].cols());
        // the skip path copies the output gradient back to its source
        for (const SkipLink& s : skips) {
            if (s.dst == i) {
                if (g[s.src].empty())
                    g[s.src] = g[i];
                else
                    g[s.src] += g[i];
            }
        }
        const Matrix& below = i == 0 ? cache.input : cache.outputs[i - 1];
        const Layer& l = layers[i];
        Matrix gin;
        switch (l.kind) {
            case LayerKind::dense: {
                grads.weights[i] = Matrix::multiply_at(g[i], below);
                std::vector<double> db(l.dense.bias.size(), 0.0);
                for (std::size_t r = 0; r < g[i].rows(); ++r) {
                    const double* row = g[i].data() + r * g[i].cols();
                    for (std::size_t c = 0; c < g[i].cols(); ++c) db[c] += row[c];
                }
                grads.bias[i] = std::move(db);
                gin = Matrix::multiply(g[i], l.dense.weights);
                break;
            }
            case LayerKind::relu: {
                gin = g[i];
                for (std::size_t k = 0; k < gin.size(); ++k)
                    if (below.data()[k] <= 0.0) gin.data()[k] = 0.0;
                break;
            }
            case LayerKind::dropout: {
                gin = g[i];
                const Matrix& mask = cache.dropout_masks[i];
                if (!mask.empty())
                    for (std::size_t k = 0; k < gin.size(); ++k) gin.data()[k] *= mask.data()[k];
                break;
            }
        }
        if (i == 0) {
            grad_input = std::move(gin);
        } else if (g[i - 1].empty()) {
            g[i - 1] = std::move(gin);
        } else {
            g[i - 1] += gin;
        }
    }
    return grad_input;
}

std::size_t Network::parameter_count(bool trainable_only) const {
    std::size_t n = 0;
    for (const Layer& l : layers) {
        if (l.kind != LayerKind::dense) continue;
        if (trainable_only && !l.dense.trainable) continue;
        n += l.dense.weights.size() + l.dense.bias.size();
    }
    return n;
}

std::vector<double> Network::parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const Layer& l : layers) {
        if (l.kind != LayerKind::dense) continue;
        flat.insert(flat.end(), l.dense.weights.data(), l.dense.weights.data() + l.dense.weights.size());
        flat.insert(flat.end(), l.dense.bias.begin(), l.dense.bias.end());
    }
    return flat;
}

void Network::set_parameters(const std::vector<double>& flat) {
    if (flat.size() != parameter_count()) throw StructuralError("parameter vector size mismatch");
    std::size_t pos = 0;
    for (Layer& l : layers) {
        if (l.kind != LayerKind::dense) continue;
        std::copy_n(flat.begin() + pos, l.dense.weights.size(), l.dense.weights.data());
        pos += l.dense.weights.size();
        std::copy_n(flat.begin() + pos, l.dense.bias.size(), l.dense.bias.begin());
        pos += l.dense.bias.size();
    }
}

void Network::init_parameters(std::uint64_t seed) {
    int dense_idx = 0;
    for (Layer& l : layers) {
        if (l.kind != LayerKind::dense) continue;
        StreamRng rng(StreamKey(seed).add("init").add(dense_idx++));
        const double fan_in = static_cast<double>(l.dense.weights.cols());
        const double fan_out = static_cast<double>(l.dense.weights.rows());
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (std::size_t k = 0; k < l.dense.weights.size(); ++k)
            l.dense.weights.data()[k] = rng.uniform(-limit, limit);
        std::fill(l.dense.bias.begin(), l.dense.bias.end(), 0.0);
    }
}

// ---- losses -----------------------------------------------------------

double mse_loss(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) throw StructuralError("loss shape mismatch");
    if (pred.size() == 0) throw UsageError("mse_loss on empty input");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - target.data()[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

Matrix mse_loss_grad(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) throw StructuralError("loss shape mismatch");
    if (pred.size() == 0) throw UsageError("mse_loss on empty input");
    Matrix g = pred;
    g -= target;
    g *= 2.0 / static_cast<double>(pred.size());
    return g;
}

double reconstruction_loss(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) throw StructuralError("loss shape mismatch");
    if (pred.cols() != kReconstructionWidth)
        throw StructuralError("reconstruction loss expects width-425 batches");
    if (pred.rows() == 0) throw UsageError("reconstruction_loss on empty batch");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - target.data()[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.rows());
}

Matrix reconstruction_loss_grad(const Matrix& pred, const Matrix& target) {
    if (!pred.same_shape(target)) throw StructuralError("loss shape mismatch");
    if (pred.cols() != kReconstructionWidth)
        throw StructuralError("reconstruction loss expects width-425 batches");
    if (pred.rows() == 0) throw UsageError("reconstruction_loss on empty batch");
    Matrix g = pred;
    g -= target;
    g *= 2.0 / static_cast<double>(pred.rows());
    return g;
}

// ---- optimizers -------------------------------------------------------

Optimizer::Optimizer(const OptimizerConfig& cfg, const Network& net) : cfg_(cfg) {
    for (const Layer& l : net.layers) {
        std::size_t n = 0;
        if (l.kind == LayerKind::dense && l.dense.trainable)
            n = l.dense.weights.size() + l.dense.bias.size();
        m_.emplace_back(n, 0.0);
        v_.emplace_back(n, 0.0);
    }
}

void Optimizer::step(Network& net, const Gradients& grads) {
    if (m_.size() != net.layers.size()) throw UsageError("optimizer bound to a different network");
    if (grads.weights.size() != net.layers.size() || grads.bias.size() != net.layers.size())
        throw UsageError("gradients do not match the network layout");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        Layer& l = net.layers[li];
        if (l.kind != LayerKind::dense || !l.dense.trainable) continue;
        if (grads.weights[li].empty())
            throw UsageError("missing gradient for trainable layer");

        const std::size_t wn = l.dense.weights.size();
        auto update = [&](double* param, const double* grad, std::size_t count, std::size_t offset) {
            double* m = m_[li].data() + offset;
            double* v = v_[li].data() + offset;
            for (std::size_t k = 0; k < count; ++k) {
                double g = grad[k];
                if (cfg_.kind == OptimizerKind::adam) g += cfg_.weight_decay * param[k];
                m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
                v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
                const double mhat = m[k] / bc1;
                const double vhat = v[k] / bc2;
                param[k] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
                if (cfg_.kind == OptimizerKind::adamw)
                    param[k] -= cfg_.lr * cfg_.weight_decay * param[k];
            }
        };
        update(l.dense.weights.data(), grads.weights[li].data(), wn, 0);
        update(l.dense.bias.data(), grads.bias[li].data(), l.dense.bias.size(), wn);
    }
}

// ---- gradient checking --------------------------------------------------

namespace {

double eval_loss(const Network& net, const Matrix& x, const Matrix& target, CheckLoss loss,
                 const std::vector<Matrix>& masks) {
    ForwardCache cache;
    const Matrix out = net.forward(x, Mode::train, nullptr, &cache, &masks);
    return loss == CheckLoss::mse ? mse_loss(out, target) : reconstruction_loss(out, target);
}

// one full central-difference sweep; returns (max rel error, argmax)
std::pair<double, std::size_t> fd_sweep(Network net, const Matrix& x, const Matrix& target,
                                        CheckLoss loss, const std::vector<Matrix>& masks) {
    ForwardCache cache;
    const Matrix out = net.forward(x, Mode::train, nullptr, &cache, &masks);
    const Matrix gout = loss == CheckLoss::mse ? mse_loss_grad(out, target)
                                               : reconstruction_loss_grad(out, target);
    Gradients grads;
    net.backward(cache, gout, grads);

    std::vector<double> analytic;
    analytic.reserve(net.parameter_count());
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        if (net.layers[li].kind != LayerKind::dense) continue;
        analytic.insert(analytic.end(), grads.weights[li].data(),
                        grads.weights[li].data() + grads.weights[li].size());
        analytic.insert(analytic.end(), grads.bias[li].begin(), grads.bias[li].end());
    }

    std::vector<double> params = net.parameters();
    const double h = 1e-5;
    double worst = 0.0;
    std::size_t worst_idx = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = params[i];
        params[i] = orig + h;
        net.set_parameters(params);
        const double lp = eval_loss(net, x, target, loss, masks);
        params[i] = orig - h;
        net.set_parameters(params);
        const double lm = eval_loss(net, x, target, loss, masks);
        params[i] = orig;
        const double numeric = (lp - lm) / (2.0 * h);
        const double rel = std::abs(analytic[i] - numeric) /
                           std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
        if (rel > worst) {
            worst = rel;
            worst_idx = i;
        }
    }
    return {worst, worst_idx};
}

}  // namespace

GradCheckReport gradient_check(const Network& net, const Matrix& x, const Matrix& target,
                               CheckLoss loss, double tolerance, std::uint64_t seed) {
    if (net.parameter_count() > 10000)
        throw UsageError("gradient_check is for nets with at most 1e4 parameters");

    // draw dropout masks once and hold them fixed across every evaluation
    std::vector<Matrix> masks;
    {
        StreamRng rng(StreamKey(seed).add("gradcheck-mask"));
        ForwardCache cache;
        net.forward(x, Mode::train, &rng, &cache);
        masks = cache.dropout_masks;
    }

    GradCheckReport report;
    report.tolerance = tolerance;
    auto [err, idx] = fd_sweep(net, x, target, loss, masks);
    report.max_rel_error = err;
    report.worst_parameter = idx;
    report.first_attempt_error = err;
    report.pass = err <= tolerance;

    if (!report.pass) {
        // likely a ReLU kink under some parameter; nudge the input and retry
        StreamRng jitter(StreamKey(seed).add("gradcheck-jitter"));
        Matrix xj = x;
        for (std::size_t k = 0; k < xj.size(); ++k)
            xj.data()[k] += jitter.uniform(-1e-3, 1e-3);
        auto [err2, idx2] = fd_sweep(net, xj, target, loss, masks);
        report.retried = true;
        report.max_rel_error = err2;
        report.worst_parameter = idx2;
        report.pass = err2 <= tolerance;
    }
    return report;
}

// ---- checkpointing ------------------------------------------------------

void save_network(std::ostream& out, const Network& net) {
    out << "nrrnet 1\n";
    out << "layers " << net.layers.size() << "\n";
    for (const Layer& l : net.layers) {
        switch (l.kind) {
            case LayerKind::dense:
                out << "dense " << l.dense.weights.cols() << ' ' << l.dense.weights.rows() << ' '
                    << (l.dense.trainable ? 1 : 0) << "\n";
                break;
            case LayerKind::relu:
                out << "relu\n";
                break;
            case LayerKind::dropout:
                out << "dropout " << format_double(l.dropout_rate) << "\n";
                break;
        }
    }
    out << "skips " << net.skips.size() << "\n";
    for (const SkipLink& s : net.skips) out << s.src << ' ' << s.dst << "\n";
    const std::vector<double> params = net.parameters();
    out << "params " << params.size() << "\n";
    for (std::size_t i = 0; i < params.size(); ++i)
        out << format_double(params[i]) << ((i + 1) % 8 == 0 ? '\n' : ' ');
    if (!params.empty() && params.size() % 8 != 0) out << '\n';
}

Network load_network(std::istream& in) {
    auto expect = [&](const std::string& tag) {
        std::string word;
        if (!(in >> word) || word != tag) throw DataError("bad checkpoint: expected '" + tag + "'");
    };
    expect("nrrnet");
    int version = 0;
    in >> version;
    if (version != 1) throw DataError("unsupported checkpoint version");

    expect("layers");
    std::size_t n_layers = 0;
    in >> n_layers;
    Network net;
    for (std::size_t i = 0; i < n_layers; ++i) {
        std::string kind;
        in >> kind;
        if (kind == "dense") {
            std::size_t cin = 0, cout = 0;
            int trainable = 1;
            in >> cin >> cout >> trainable;
            net.layers.push_back(make_dense(cin, cout, trainable != 0));
        } else if (kind == "relu") {
            net.layers.push_back(make_relu());
        } else if (kind == "dropout") {
            std::string rate;
            in >> rate;
            net.layers.push_back(make_dropout(parse_double(rate)));
        } else {
            throw DataError("bad checkpoint: unknown layer '" + kind + "'");
        }
    }
    expect("skips");
    std::size_t n_skips = 0;
    in >> n_skips;
    for (std::size_t i = 0; i < n_skips; ++i) {
        SkipLink s;
        in >> s.src >> s.dst;
        net.skips.push_back(s);
    }
    expect("params");
    std::size_t n_params = 0;
    in >> n_params;
    if (n_params != net.parameter_count()) throw DataError("bad checkpoint: parameter count mismatch");
    std::vector<double> params(n_params);
    for (std::size_t i = 0; i < n_params; ++i) {
        std::string tok;
        if (!(in >> tok)) throw DataError("bad checkpoint: truncated parameters");
        params[i] = parse_double(tok);
    }
    net.set_parameters(params);
    net.validate();
    return net;
}

}  // namespace nrr::nn
