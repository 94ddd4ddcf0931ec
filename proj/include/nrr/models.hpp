#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nrr/features.hpp"
#include "nrr/nn.hpp"

namespace nrr::models {

enum class ModelKind { rf, mlp, ae, dae };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);
// rf, mlp, ae, dae in reporting order
std::vector<ModelKind> all_model_kinds();

/// Regression network: 425 -> 480 -> 480 -> 1, dropout 20%, Adam.
struct MlpSpec {
    std::vector<std::size_t> hidden{480, 480};
    double dropout = 0.20;
    nn::OptimizerConfig optimizer{nn::OptimizerKind::adam, 0.001, 0.0001};
    std::size_t batch_size = 64;
    int epochs = 100;
};

/// Two-stage autoencoder: reconstruction training of the 300/200/120 trunk,
/// then a 180/180 head on the frozen bottleneck.
struct AeSpec {
    std::vector<std::size_t> encoder{300, 200, 120};  // last entry is the bottleneck
    std::vector<std::size_t> decoder{200, 300};
    double dropout = 0.10;
    nn::OptimizerConfig optimizer{nn::OptimizerKind::adamw, 0.0003, 0.01};
    std::size_t batch_size = 64;
    int ae_epochs = 60;
    std::vector<std::size_t> head_hidden{180, 180};
    int head_epochs = 60;
};

/// Joint-loss autoencoder: same trunk, 80/40 head on the bottleneck, one
/// optimizer pass minimizing regression + reconstruction per batch.
struct DaeSpec {
    std::vector<std::size_t> encoder{300, 200, 120};
    std::vector<std::size_t> decoder{200, 300};
    double dropout = 0.10;
    std::vector<std::size_t> head_hidden{80, 40};
    nn::OptimizerConfig optimizer{nn::OptimizerKind::adamw, 0.0003, 0.01};
    std::size_t batch_size = 64;
    int epochs = 100;
};

struct TrainLog {
    struct Epoch {
        int stage = 1;  // 1, or 2 for the autoencoder head stage
        int epoch = 0;  // 1-based within its stage
        double nrr = 0.0;
        double rec = 0.0;
        double total = 0.0;
        double validation = 0.0;
    };
    std::vector<Epoch> epochs;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
};

/// A trained neural model. MLP uses trunk only; AE/DAE pair the autoencoder
/// trunk with a head reading the bottleneck layer's output.
struct TrainedModel {
    ModelKind kind = ModelKind::mlp;
    nn::Network trunk;
    nn::Network head;
    int bottleneck_layer = -1;
};

// ---- builders -----------------------------------------------------------

nn::Network build_mlp(const MlpSpec& spec);

struct AutoencoderNet {
    nn::Network net;
    int bottleneck_layer = -1;
};

/// dense/relu/dropout blocks per width; additive skips join each encoder
/// block to the equal-width mirrored decoder block; linear 425-wide output.
AutoencoderNet build_autoencoder(std::span<const std::size_t> encoder,
                                 std::span<const std::size_t> decoder, double dropout);

nn::Network build_head(std::size_t input_width, std::span<const std::size_t> hidden,
                       double dropout);

// ---- training -----------------------------------------------------------

struct TrainOutcome {
    TrainedModel model;
    TrainLog log;
};

TrainOutcome train_mlp(const MlpSpec& spec, const std::vector<features::Sample>& train,
                       const std::vector<features::Sample>& validation, std::uint64_t seed);

/// Stage 1 alone: reconstruction training of the trunk.
AutoencoderNet train_ae_stage1(const AeSpec& spec, const std::vector<features::Sample>& train,
                               const std::vector<features::Sample>& validation,
                               std::uint64_t seed, TrainLog& log);

/// Stage 2 alone: trains a fresh head on bottleneck codes computed once in
/// eval mode; the trunk is read-only throughout.
nn::Network train_ae_stage2(const AeSpec& spec, const AutoencoderNet& trunk,
                            const std::vector<features::Sample>& train,
                            const std::vector<features::Sample>& validation,
                            std::uint64_t seed, TrainLog& log);

TrainOutcome train_ae_two_stage(const AeSpec& spec, const std::vector<features::Sample>& train,
                                const std::vector<features::Sample>& validation,
                                std::uint64_t seed);

TrainOutcome train_dae(const DaeSpec& spec, const std::vector<features::Sample>& train,
                       const std::vector<features::Sample>& validation, std::uint64_t seed);

/// Eval-mode predictions, one per sample; pure function of (model, samples).
std::vector<double> predict(const TrainedModel& model,
                            const std::vector<features::Sample>& samples);

// ---- checkpoint files ---------------------------------------------------

void save_model(const std::string& path, const TrainedModel& model);
TrainedModel load_model(const std::string& path);

}  // namespace nrr::models
