#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nrr/matrix.hpp"
#include "nrr/rng.hpp"

namespace nrr::nn {

// width of the study's reconstruction target
constexpr std::size_t kReconstructionWidth = 425;

enum class Mode { train, eval };

enum class LayerKind { dense, relu, dropout };

struct DenseParams {
    Matrix weights;              // out x in
    std::vector<double> bias;    // out
    bool trainable = true;
};

struct Layer {
    LayerKind kind = LayerKind::relu;
    DenseParams dense;           // kind == dense
    double dropout_rate = 0.0;   // kind == dropout

    std::size_t out_width(std::size_t in_width) const {
        return kind == LayerKind::dense ? dense.weights.rows() : in_width;
    }
};

Layer make_dense(std::size_t in, std::size_t out, bool trainable = true);
Layer make_relu();
Layer make_dropout(double rate);

/// Additive shortcut: the cached output of layer `src` is added to the
/// output of layer `dst` (widths must match, src precedes dst).
struct SkipLink {
    int src = -1;
    int dst = -1;
};

struct ForwardCache {
    Matrix input;
    std::vector<Matrix> outputs;        // per layer, post skip addition
    std::vector<Matrix> dropout_masks;  // per layer; empty unless dropout in train mode
    bool valid = false;
};

/// Per-layer parameter gradients, shaped like the dense layers they belong to.
struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> bias;
};

class Network {
public:
    std::vector<Layer> layers;
    std::vector<SkipLink> skips;

    std::size_t input_width() const;
    std::size_t output_width() const;
    void validate() const;  // throws StructuralError on bad shapes or skip graphs

    /// Forward pass. In train mode dropout draws fresh masks from `rng`
    /// (or reuses `frozen_masks` when given) and `cache` must be supplied
    /// for a later backward. Eval mode is a pure function of the input.
    Matrix forward(const Matrix& x, Mode mode, StreamRng* rng = nullptr,
                   ForwardCache* cache = nullptr,
                   const std::vector<Matrix>* frozen_masks = nullptr) const;

    /// Runs layers [0, upto] only, e.g. an encoder prefix with the decoder
    /// detached. Skip links with dst > upto are ignored.
    Matrix forward_prefix(const Matrix& x, std::size_t upto, Mode mode,
                          StreamRng* rng = nullptr, ForwardCache* cache = nullptr) const;

    /// Reverse-mode gradients for the batch cached by the last train-mode
    /// forward. `injections` add extra dL/d(output of layer i) terms, which
    /// is how auxiliary heads attached at internal layers contribute.
    /// Returns dL/dinput.
    Matrix backward(const ForwardCache& cache, const Matrix& grad_output,
                    Gradients& grads,
                    const std::vector<std::pair<int, Matrix>>& injections = {}) const;

    std::size_t parameter_count(bool trainable_only = false) const;
    std::vector<double> parameters() const;
    void set_parameters(const std::vector<double>& flat);

    /// Glorot-uniform weight init, zero biases; keyed per layer index.
    void init_parameters(std::uint64_t seed);
};

// ---- losses -----------------------------------------------------------

// mean of squared residuals over all entries
double mse_loss(const Matrix& pred, const Matrix& target);
Matrix mse_loss_grad(const Matrix& pred, const Matrix& target);

// sum over the 425 feature columns, mean over the batch rows
double reconstruction_loss(const Matrix& pred, const Matrix& target);
Matrix reconstruction_loss_grad(const Matrix& pred, const Matrix& target);

// ---- optimizers -------------------------------------------------------

enum class OptimizerKind { adam, adamw };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 0.001;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam folds weight decay into the gradient before the moment update;
/// AdamW applies it decoupled after the adaptive step.
class Optimizer {
public:
    Optimizer(const OptimizerConfig& cfg, const Network& net);
    void step(Network& net, const Gradients& grads);
    std::int64_t steps() const { return step_; }

private:
    OptimizerConfig cfg_;
    std::vector<std::vector<double>> m_;  // first moments, per layer (flat, weights then bias)
    std::vector<std::vector<double>> v_;  // second moments
    std::int64_t step_ = 0;
};

// ---- gradient checking --------------------------------------------------

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_parameter = 0;
    double tolerance = 0.0;
    bool pass = false;
    bool retried = false;              // true when a kink retry with jittered input ran
    double first_attempt_error = 0.0;  // max error before the retry
};

enum class CheckLoss { mse, reconstruction };

/// Central-difference check of every parameter gradient. Dropout masks are
/// frozen from the first forward so analytic and numeric paths agree. If the
/// first attempt fails (typically a ReLU kink), the check retries once with
/// a small seeded input jitter.
GradCheckReport gradient_check(const Network& net, const Matrix& x, const Matrix& target,
                               CheckLoss loss, double tolerance, std::uint64_t seed);

// ---- checkpointing ------------------------------------------------------

// versioned text format; values round-trip bit-exactly
void save_network(std::ostream& out, const Network& net);
Network load_network(std::istream& in);

}  // namespace nrr::nn
