#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "phash/dataset.hpp"
#include "phash/loss.hpp"
#include "phash/matrix.hpp"
#include "phash/similarity_graph.hpp"

namespace phash {

enum class Activation { relu, tanh };

struct EncoderSpec {
    uint32_t input_dim = 0;
    std::vector<uint32_t> hidden;
    uint32_t code_bits = 16;
    Activation activation = Activation::relu;  // hidden layers; output is always tanh

    void validate() const;
};

struct ForwardCache {
    // acts[0] = input, acts[l] = post-activation of layer l, acts.back() = codes
    std::vector<Matrix> acts;
};

// Feed-forward encoder; the last affine layer followed by tanh plays the
// role of the hash layer producing codes in [-1, 1]^K.
struct Encoder {
    EncoderSpec spec;
    std::vector<Matrix> weights;  // layer l: out x in
    std::vector<Matrix> biases;   // layer l: 1 x out

    size_t layer_count() const { return weights.size(); }

    Matrix forward(const Matrix& X) const;
    Matrix forward(const Matrix& X, ForwardCache& cache) const;
};

// Symmetric uniform fan-in initialization, deterministic per seed.
Encoder init_encoder(const EncoderSpec& spec, uint64_t seed);

struct ParamGrads {
    std::vector<Matrix> weights;
    std::vector<Matrix> biases;
};

// Back-propagates d(objective)/d(codes) through the stack.
ParamGrads backward(const Encoder& enc, const ForwardCache& cache, const Matrix& code_grad);

enum class LrSchedule { constant, step };

struct TrainConfig {
    uint32_t batch_size = 64;
    uint32_t epochs = 50;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    LrSchedule lr_schedule = LrSchedule::constant;
    double lr_step_factor = 0.5;
    uint32_t lr_step_every = 20;
    uint64_t seed = 1;
    double fch_lr_multiplier = 10.0;  // hash layer trains from scratch, so it runs hotter

    void validate() const;
};

struct SgdState {
    std::vector<Matrix> vw;
    std::vector<Matrix> vb;

    static SgdState zeros_like(const Encoder& enc);
};

double lr_at_epoch(const TrainConfig& cfg, uint32_t epoch);

// Momentum SGD update with weight decay on the weights; the last (hash)
// layer's rate is scaled by fch_lr_multiplier.
void sgd_step(Encoder& enc, const ParamGrads& grads, const TrainConfig& cfg, double lr_now,
              SgdState& state);

void backward_and_step(Encoder& enc, const ForwardCache& cache, const Matrix& code_grad,
                       const TrainConfig& cfg, double lr_now, SgdState& state);

struct EpochLog {
    uint32_t epoch;
    double mean_ce;
    double mean_quant;
    double mean_quant_err;  // mean | |z| - 1 | over all code entries seen
};

struct TrainResult {
    Encoder encoder;
    std::vector<EpochLog> log;
};

// Mini-batch SGD against the joint objective. Pairs are formed within each
// batch; degrees and scaling weights come from the full graph. Pairs with
// degenerate degree weights are skipped with a warning.
TrainResult train(const LabeledDataset& dataset, const SimilarityGraph& graph,
                  const EncoderSpec& spec, const LossConfig& loss_config,
                  const TrainConfig& train_config);

// Checkpoint format: magic PHMD, spec header, little-endian f64 parameters.
void save_encoder(const Encoder& enc, const std::string& path);
Encoder load_encoder(const std::string& path);

void write_train_log_csv(std::ostream& out, std::span<const EpochLog> log);

}  // namespace phash
