#pragma once

#include "core/common.hpp"

#include <string>
#include <vector>

namespace cyclecluster::model {

struct Layer {
    Matrix w;  // out x in
    Vector b;  // out
};

// Shared classifier: extractor layers (leaky-ReLU after every layer except the
// last, which feeds the L2 normalization), then a single head of width H.
// Class scores are the first C head outputs; cluster scores the first K.
struct ModelParams {
    std::vector<Layer> extractor;
    Layer head;
    double leaky_slope = 0.01;

    int input_dim() const { return static_cast<int>(extractor.front().w.cols()); }
    int embed_dim() const { return static_cast<int>(extractor.back().w.rows()); }
    int head_width() const { return static_cast<int>(head.w.rows()); }
};

// Gradients share the parameter layout.
using ModelGrads = ModelParams;

// Glorot-uniform weights, zero biases, deterministic in seed.
ModelParams init_params(int input_dim, const std::vector<int>& hidden, int embed_dim,
                        int head_width, double leaky_slope, std::uint64_t seed);

ModelParams zero_like(const ModelParams& params);

// Per-batch cache for backward().
struct ForwardTrace {
    Matrix input;                  // b x d_in
    std::vector<Matrix> pre_acts;  // per extractor layer
    std::vector<Matrix> acts;      // post-activation; back() is the pre-norm embedding
    Vector norms;                  // embedding row norms
    Matrix normalized;             // b x d_p, rows unit norm (or zero)
    int head_width = 0;            // columns sliced from the full head output
};

// Extractor + L2 normalization. Zero rows stay zero.
Matrix embed(const ModelParams& params, const Matrix& batch);

// Scores are the first `head_width` columns of the full head output.
Matrix forward(const ModelParams& params, const Matrix& batch, int head_width,
               ForwardTrace* trace = nullptr);

Matrix softmax_rows(const Matrix& scores);

struct LossGrad {
    double loss = 0.0;
    Matrix grad_scores;
};

// Mean over the batch of weight_i * (-log softmax(scores_i)[target_i]).
LossGrad cross_entropy_loss(const Matrix& scores, const std::vector<int>& targets,
                            const Vector& per_sample_weights);

// Exact chain rule through the head, the normalization Jacobian, and the
// extractor.
ModelGrads backward(const ModelParams& params, const ForwardTrace& trace,
                    const Matrix& grad_scores);

struct OptimizerState {
    std::vector<Layer> extractor_buf;
    Layer head_buf;
    double momentum = 0.9;
    double weight_decay = 2e-4;
    double base_lr = 0.05;
    int anneal_epochs = 1;
    std::int64_t step = 0;
    int epoch = 0;
};

OptimizerState make_optimizer(const ModelParams& params, double momentum, double weight_decay,
                              double base_lr, int anneal_epochs);

// buffer <- momentum * buffer + grad + wd * param; param <- param - lr * buffer
void sgd_step(ModelParams& params, const ModelGrads& grads, OptimizerState& state, double lr);

// l0 * 0.5 * (1 + cos(pi * epoch / anneal_epochs)), clamped to 0 past the horizon.
double cosine_lr(int epoch, double base_lr, int anneal_epochs);

struct Checkpoint {
    ModelParams params;
    OptimizerState opt;
};

void save_checkpoint(const std::string& path, const ModelParams& params, const OptimizerState& opt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace cyclecluster::model
