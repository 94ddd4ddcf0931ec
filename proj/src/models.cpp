#include "nrr/models.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "nrr/textio.hpp"

namespace nrr::models {

static_assert(features::kFeatureCount == nn::kReconstructionWidth,
              "reconstruction width must equal the feature vector width");

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::rf: return "rf";
        case ModelKind::mlp: return "mlp";
        case ModelKind::ae: return "ae";
        case ModelKind::dae: return "dae";
    }
    throw StructuralError("unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "rf") return ModelKind::rf;
    if (name == "mlp") return ModelKind::mlp;
    if (name == "ae") return ModelKind::ae;
    if (name == "dae") return ModelKind::dae;
    throw ConfigError("unknown model kind '" + name + "'");
}

std::vector<ModelKind> all_model_kinds() {
    return {ModelKind::rf, ModelKind::mlp, ModelKind::ae, ModelKind::dae};
}

// ---- builders -----------------------------------------------------------

nn::Network build_mlp(const MlpSpec& spec) {
    nn::Network net;
    std::size_t width = features::kFeatureCount;
    for (std::size_t h : spec.hidden) {
        net.layers.push_back(nn::make_dense(width, h));
        net.layers.push_back(nn::make_relu());
        net.layers.push_back(nn::make_dropout(spec.dropout));
        width = h;
    }
    net.layers.push_back(nn::make_dense(width, 1));
    net.validate();
    return net;
}

AutoencoderNet build_autoencoder(std::span<const std::size_t> encoder,
                                 std::span<const std::size_t> decoder, double dropout) {
    if (encoder.empty()) throw StructuralError("autoencoder needs at least one encoder layer");
    AutoencoderNet parts;
    nn::Network& net = parts.net;
    std::size_t width = features::kFeatureCount;
    std::vector<int> encoder_block_out;  // dropout layer index per encoder block
    for (std::size_t h : encoder) {
        net.layers.push_back(nn::make_dense(width, h));
        net.layers.push_back(nn::make_relu());
        net.layers.push_back(nn::make_dropout(dropout));
        encoder_block_out.push_back(static_cast<int>(net.layers.size()) - 1);
        width = h;
    }
    parts.bottleneck_layer = encoder_block_out.back();
    std::vector<int> decoder_block_dense;  // dense layer index per decoder block
    for (std::size_t h : decoder) {
        net.layers.push_back(nn::make_dense(width, h));
        decoder_block_dense.push_back(static_cast<int>(net.layers.size()) - 1);
        net.layers.push_back(nn::make_relu());
        net.layers.push_back(nn::make_dropout(dropout));
        width = h;
    }
    net.layers.push_back(nn::make_dense(width, features::kFeatureCount));

    // mirror skips: encoder block i feeds the decoder block of equal width,
    // added onto the dense output before its activation
    const std::size_t pairs = std::min(encoder.size() - 1, decoder.size());
    for (std::size_t i = 0; i < pairs; ++i) {
        const std::size_t j = decoder.size() - 1 - i;
        if (encoder[i] != decoder[j]) continue;
        net.skips.push_back({encoder_block_out[i], decoder_block_dense[j]});
    }
    net.validate();
    return parts;
}

nn::Network build_head(std::size_t input_width, std::span<const std::size_t> hidden,
                       double dropout) {
    nn::Network net;
    std::size_t width = input_width;
    for (std::size_t h : hidden) {
        net.layers.push_back(nn::make_dense(width, h));
        net.layers.push_back(nn::make_relu());
        net.layers.push_back(nn::make_dropout(dropout));
        width = h;
    }
    net.layers.push_back(nn::make_dense(width, 1));
    net.validate();
    return net;
}

// ---- training -----------------------------------------------------------

namespace {

Matrix features_matrix(const std::vector<features::Sample>& samples) {
    Matrix x(samples.size(), features::kFeatureCount);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].features.size() != features::kFeatureCount)
            throw StructuralError("sample feature width mismatch");
        std::copy(samples[i].features.begin(), samples[i].features.end(), x.row(i).data());
    }
    return x;
}

Matrix target_matrix(const std::vector<features::Sample>& samples) {
    Matrix y(samples.size(), 1);
    for (std::size_t i = 0; i < samples.size(); ++i) y(i, 0) = samples[i].target;
    return y;
}

void warn_if_unstandardized(const Matrix& x) {
    if (x.rows() == 0) return;
    double offset = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) mean += x(i, j);
        offset += std::abs(mean / static_cast<double>(x.rows()));
    }
    offset /= static_cast<double>(x.cols());
    if (offset > 0.5)
        std::fprintf(stderr,
                     "warning: training features do not look standardized (mean |column mean| = %g)\n",
                     offset);
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int stage,
                                           int epoch) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    StreamRng rng(StreamKey(seed).add("shuffle").add(stage).add(epoch));
    for (std::size_t i = n; i > 1; --i)
        std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

Matrix gather(const Matrix& src, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), src.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = src.row(rows[i]);
        std::copy(r.begin(), r.end(), out.row(i).data());
    }
    return out;
}

StreamRng batch_dropout_rng(std::uint64_t seed, int stage, int epoch, std::size_t batch) {
    return StreamRng(
        StreamKey(seed).add("dropout").add(stage).add(epoch).add(static_cast<std::uint64_t>(batch)));
}

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// start the regression output at the training-target mean so the early
// epochs fit residuals instead of first recovering the offset
void seed_output_bias(nn::Network& net, const Matrix& targets) {
    double mean = 0.0;
    for (std::size_t i = 0; i < targets.rows(); ++i) mean += targets(i, 0);
    mean /= static_cast<double>(targets.rows());
    for (auto it = net.layers.rbegin(); it != net.layers.rend(); ++it)
        if (it->kind == nn::LayerKind::dense) {
            it->dense.bias.back() = mean;
            break;
        }
}

}  // namespace

TrainOutcome train_mlp(const MlpSpec& spec, const std::vector<features::Sample>& train,
                       const std::vector<features::Sample>& validation, std::uint64_t seed) {
    if (train.empty()) throw UsageError("train_mlp needs training samples");
    const auto start = std::chrono::steady_clock::now();
    const Matrix x = features_matrix(train);
    const Matrix y = target_matrix(train);
    const Matrix xv = features_matrix(validation);
    const Matrix yv = target_matrix(validation);
    warn_if_unstandardized(x);

    nn::Network net = build_mlp(spec);
    net.init_parameters(StreamKey(seed).add("mlp-init").value());
    seed_output_bias(net, y);
    nn::Optimizer opt(spec.optimizer, net);

    TrainLog log;
    log.seed = seed;
    const std::size_t n = train.size();
    for (int epoch = 1; epoch <= spec.epochs; ++epoch) {
        const std::vector<std::size_t> perm = epoch_permutation(n, seed, 1, epoch);
        double acc = 0.0;
        std::size_t batch_idx = 0;
        for (std::size_t p = 0; p < n; p += spec.batch_size, ++batch_idx) {
            const std::size_t hi = std::min(n, p + spec.batch_size);
            const std::span<const std::size_t> rows(perm.data() + p, hi - p);
            const Matrix bx = gather(x, rows);
            const Matrix by = gather(y, rows);
            StreamRng drop = batch_dropout_rng(seed, 1, epoch, batch_idx);
            nn::ForwardCache cache;
            const Matrix out = net.forward(bx, nn::Mode::train, &drop, &cache);
            acc += nn::mse_loss(out, by) * static_cast<double>(rows.size());
            nn::Gradients grads;
            net.backward(cache, nn::mse_loss_grad(out, by), grads);
            opt.step(net, grads);
        }
        const double train_loss = acc / static_cast<double>(n);
        const double val_loss =
            validation.empty() ? 0.0 : nn::mse_loss(net.forward(xv, nn::Mode::eval), yv);
        log.epochs.push_back({1, epoch, train_loss, 0.0, train_loss, val_loss});
    }
    log.wall_seconds = elapsed_seconds(start);

    TrainOutcome outcome;
    outcome.model.kind = ModelKind::mlp;
    outcome.model.trunk = std::move(net);
    outcome.log = std::move(log);
    return outcome;
}

AutoencoderNet train_ae_stage1(const AeSpec& spec, const std::vector<features::Sample>& train,
                               const std::vector<features::Sample>& validation,
                               std::uint64_t seed, TrainLog& log) {
    if (train.empty()) throw UsageError("train_ae_stage1 needs training samples");
    const Matrix x = features_matrix(train);
    const Matrix xv = features_matrix(validation);
    warn_if_unstandardized(x);

    AutoencoderNet parts = build_autoencoder(spec.encoder, spec.decoder, spec.dropout);
    parts.net.init_parameters(StreamKey(seed).add("ae-trunk-init").value());
    nn::Optimizer opt(spec.optimizer, parts.net);

    const std::size_t n = train.size();
    for (int epoch = 1; epoch <= spec.ae_epochs; ++epoch) {
        const std::vector<std::size_t> perm = epoch_permutation(n, seed, 1, epoch);
        double acc = 0.0;
        std::size_t batch_idx = 0;
        for (std::size_t p = 0; p < n; p += spec.batch_size, ++batch_idx) {
            const std::size_t hi = std::min(n, p + spec.batch_size);
            const std::span<const std::size_t> rows(perm.data() + p, hi - p);
            const Matrix bx = gather(x, rows);
            StreamRng drop = batch_dropout_rng(seed, 1, epoch, batch_idx);
            nn::ForwardCache cache;
            const Matrix out = parts.net.forward(bx, nn::Mode::train, &drop, &cache);
            acc += nn::reconstruction_loss(out, bx) * static_cast<double>(rows.size());
            nn::Gradients grads;
            parts.net.backward(cache, nn::reconstruction_loss_grad(out, bx), grads);
            opt.step(parts.net, grads);
        }
        const double train_loss = acc / static_cast<double>(n);
        const double val_loss =
            validation.empty()
                ? 0.0
                : nn::reconstruction_loss(parts.net.forward(xv, nn::Mode::eval), xv);
        log.epochs.push_back({1, epoch, 0.0, train_loss, train_loss, val_loss});
    }
    return parts;
}

nn::Network train_ae_stage2(const AeSpec& spec, const AutoencoderNet& trunk,
                            const std::vector<features::Sample>& train,
                            const std::vector<features::Sample>& validation,
                            std::uint64_t seed, TrainLog& log) {
    if (train.empty()) throw UsageError("train_ae_stage2 needs training samples");
    const Matrix x = features_matrix(train);
    const Matrix y = target_matrix(train);
    // codes precomputed once in eval mode; the trunk is never touched again
    const Matrix codes =
        trunk.net.forward_prefix(x, static_cast<std::size_t>(trunk.bottleneck_layer),
                                 nn::Mode::eval);
    Matrix codes_val, yv;
    if (!validation.empty()) {
        codes_val = trunk.net.forward_prefix(features_matrix(validation),
                                             static_cast<std::size_t>(trunk.bottleneck_layer),
                                             nn::Mode::eval);
        yv = target_matrix(validation);
    }

    nn::Network head = build_head(codes.cols(), spec.head_hidden, spec.dropout);
    head.init_parameters(StreamKey(seed).add("ae-head-init").value());
    seed_output_bias(head, y);
    nn::Optimizer opt(spec.optimizer, head);

    const std::size_t n = train.size();
    for (int epoch = 1; epoch <= spec.head_epochs; ++epoch) {
        const std::vector<std::size_t> perm = epoch_permutation(n, seed, 2, epoch);
        double acc = 0.0;
        std::size_t batch_idx = 0;
        for (std::size_t p = 0; p < n; p += spec.batch_size, ++batch_idx) {
            const std::size_t hi = std::min(n, p + spec.batch_size);
            const std::span<const std::size_t> rows(perm.data() + p, hi - p);
            const Matrix bc = gather(codes, rows);
            const Matrix by = gather(y, rows);
            StreamRng drop = batch_dropout_rng(seed, 2, epoch, batch_idx);
            nn::ForwardCache cache;
            const Matrix out = head.forward(bc, nn::Mode::train, &drop, &cache);
            acc += nn::mse_loss(out, by) * static_cast<double>(rows.size());
            nn::Gradients grads;
            head.backward(cache, nn::mse_loss_grad(out, by), grads);
            opt.step(head, grads);
        }
        const double train_loss = acc / static_cast<double>(n);
        const double val_loss =
            validation.empty() ? 0.0
                               : nn::mse_loss(head.forward(codes_val, nn::Mode::eval), yv);
        log.epochs.push_back({2, epoch, train_loss, 0.0, train_loss, val_loss});
    }
    return head;
}

TrainOutcome train_ae_two_stage(const AeSpec& spec, const std::vector<features::Sample>& train,
                                const std::vector<features::Sample>& validation,
                                std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    TrainLog log;
    log.seed = seed;
    AutoencoderNet trunk = train_ae_stage1(spec, train, validation, seed, log);
    nn::Network head = train_ae_stage2(spec, trunk, train, validation, seed, log);
    log.wall_seconds = elapsed_seconds(start);

    TrainOutcome outcome;
    outcome.model.kind = ModelKind::ae;
    outcome.model.trunk = std::move(trunk.net);
    outcome.model.head = std::move(head);
    outcome.model.bottleneck_layer = trunk.bottleneck_layer;
    outcome.log = std::move(log);
    return outcome;
}

TrainOutcome train_dae(const DaeSpec& spec, const std::vector<features::Sample>& train,
                       const std::vector<features::Sample>& validation, std::uint64_t seed) {
    if (train.empty()) throw UsageError("train_dae needs training samples");
    const auto start = std::chrono::steady_clock::now();
    const Matrix x = features_matrix(train);
    const Matrix y = target_matrix(train);
    const Matrix xv = features_matrix(validation);
    const Matrix yv = target_matrix(validation);
    warn_if_unstandardized(x);

    AutoencoderNet trunk = build_autoencoder(spec.encoder, spec.decoder, spec.dropout);
    trunk.net.init_parameters(StreamKey(seed).add("dae-trunk-init").value());
    nn::Network head =
        build_head(spec.encoder.back(), spec.head_hidden, spec.dropout);
    head.init_parameters(StreamKey(seed).add("dae-head-init").value());
    seed_output_bias(head, y);
    nn::Optimizer opt_trunk(spec.optimizer, trunk.net);
    nn::Optimizer opt_head(spec.optimizer, head);
    const int tap = trunk.bottleneck_layer;

    TrainLog log;
    log.seed = seed;
    const std::size_t n = train.size();
    for (int epoch = 1; epoch <= spec.epochs; ++epoch) {
        const std::vector<std::size_t> perm = epoch_permutation(n, seed, 1, epoch);
        double nrr_acc = 0.0, rec_acc = 0.0;
        std::size_t batch_idx = 0;
        for (std::size_t p = 0; p < n; p += spec.batch_size, ++batch_idx) {
            const std::size_t hi = std::min(n, p + spec.batch_size);
            const std::span<const std::size_t> rows(perm.data() + p, hi - p);
            const Matrix bx = gather(x, rows);
            const Matrix by = gather(y, rows);
            StreamRng drop = batch_dropout_rng(seed, 1, epoch, batch_idx);
            nn::ForwardCache trunk_cache;
            const Matrix recon = trunk.net.forward(bx, nn::Mode::train, &drop, &trunk_cache);
            const Matrix& codes = trunk_cache.outputs[static_cast<std::size_t>(tap)];
            nn::ForwardCache head_cache;
            const Matrix pred = head.forward(codes, nn::Mode::train, &drop, &head_cache);

            nrr_acc += nn::mse_loss(pred, by) * static_cast<double>(rows.size());
            rec_acc += nn::reconstruction_loss(recon, bx) * static_cast<double>(rows.size());

            nn::Gradients head_grads;
            const Matrix code_grad =
                head.backward(head_cache, nn::mse_loss_grad(pred, by), head_grads);
            nn::Gradients trunk_grads;
            trunk.net.backward(trunk_cache, nn::reconstruction_loss_grad(recon, bx), trunk_grads,
                               {{tap, code_grad}});
            opt_head.step(head, head_grads);
            opt_trunk.step(trunk.net, trunk_grads);
        }
        const double nrr_loss = nrr_acc / static_cast<double>(n);
        const double rec_loss = rec_acc / static_cast<double>(n);
        double val_loss = 0.0;
        if (!validation.empty()) {
            nn::ForwardCache eval_cache;
            const Matrix recon_v = trunk.net.forward(xv, nn::Mode::eval, nullptr, &eval_cache);
            const Matrix& codes_v = eval_cache.outputs[static_cast<std::size_t>(tap)];
            const Matrix pred_v = head.forward(codes_v, nn::Mode::eval);
            val_loss = nn::mse_loss(pred_v, yv) + nn::reconstruction_loss(recon_v, xv);
        }
        log.epochs.push_back({1, epoch, nrr_loss, rec_loss, nrr_loss + rec_loss, val_loss});
    }
    log.wall_seconds = elapsed_seconds(start);

    TrainOutcome outcome;
    outcome.model.kind = ModelKind::dae;
    outcome.model.trunk = std::move(trunk.net);
    outcome.model.head = std::move(head);
    outcome.model.bottleneck_layer = tap;
    outcome.log = std::move(log);
    return outcome;
}

std::vector<double> predict(const TrainedModel& model,
                            const std::vector<features::Sample>& samples) {
    const Matrix x = features_matrix(samples);
    Matrix out;
    if (model.kind == ModelKind::mlp) {
        out = model.trunk.forward(x, nn::Mode::eval);
    } else if (model.kind == ModelKind::ae || model.kind == ModelKind::dae) {
        const Matrix codes = model.trunk.forward_prefix(
            x, static_cast<std::size_t>(model.bottleneck_layer), nn::Mode::eval);
        out = model.head.forward(codes, nn::Mode::eval);
    } else {
        throw UsageError("predict handles neural models only");
    }
    std::vector<double> preds(out.rows());
    for (std::size_t i = 0; i < out.rows(); ++i) preds[i] = out(i, 0);
    return preds;
}

// ---- checkpoint files ---------------------------------------------------

void save_model(const std::string& path, const TrainedModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "nrrmodel 1\n";
    out << "kind " << to_string(model.kind) << "\n";
    out << "bottleneck " << model.bottleneck_layer << "\n";
    out << "trunk\n";
    nn::save_network(out, model.trunk);
    if (model.head.layers.empty()) {
        out << "head 0\n";
    } else {
        out << "head 1\n";
        nn::save_network(out, model.head);
    }
    out.close();
    if (!out) throw DataError("write failed: " + path);
}

TrainedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    auto expect = [&](const std::string& tag) {
        std::string word;
        if (!(in >> word) || word != tag)
            throw DataError("bad model file " + path + ": expected '" + tag + "'");
    };
    expect("nrrmodel");
    int version = 0;
    in >> version;
    if (version != 1) throw DataError("unsupported model version in " + path);
    TrainedModel model;
    expect("kind");
    std::string kind;
    in >> kind;
    model.kind = model_kind_from_string(kind);
    expect("bottleneck");
    in >> model.bottleneck_layer;
    expect("trunk");
    model.trunk = nn::load_network(in);
    expect("head");
    int has_head = 0;
    in >> has_head;
    if (has_head) model.head = nn::load_network(in);
    return model;
}

}  // namespace nrr::models
