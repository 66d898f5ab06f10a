#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "phash/matrix.hpp"

namespace phash {

enum class WeightGradMode {
    detached,  // priority weights are constants of the current iterate
    full       // gradients flow through the modulating factors too
};

enum class AlphaMode {
    degree,    // caller-supplied degree-based scaling weights
    unit,      // scaling fixed to 1
    focal_pt,  // classification uncertainty p replaces q in the modulating factor
};

struct LossConfig {
    double beta = 0.5;         // sigmoid bandwidth
    double gamma = 2.0;        // focusing parameter
    double inv_epsilon = 0.1;  // quantization tradeoff 1/eps; 0 disables the prior
    WeightGradMode weight_grad_mode = WeightGradMode::detached;
    AlphaMode alpha_mode = AlphaMode::degree;
    bool quant_enabled = true;

    // Throws on out-of-range values; logs a warning for beta >= 1 (large
    // bandwidths saturate the sigmoid and starve back-propagation).
    void validate() const;
};

// Continuous codes for one mini-batch plus the gradient accumulator.
struct CodeBatch {
    Matrix z;     // B x K, entries in [-1, 1]
    Matrix grad;  // B x K

    CodeBatch() = default;
    explicit CodeBatch(Matrix codes) : z(std::move(codes)), grad(z.rows(), z.cols()) {}

    size_t rows() const { return z.rows(); }
    size_t bits() const { return z.cols(); }
};

// One training pair: rows a, b of the batch, similarity label s, and the
// degree-based scaling weight for the pair (ignored in unit mode).
struct PairSpec {
    uint32_t a;
    uint32_t b;
    int s;
    double alpha;
};

struct PairTerms {
    uint32_t i;
    uint32_t j;
    int s;
    double inner;
    double cosine;
    double p;      // likelihood of the observed label
    double q;      // cosine difficulty measure
    double alpha;  // effective scaling weight
    double w;      // alpha * (1 - m)^gamma with m = q (or p in focal_pt mode)
    double loss;   // w * (-log p)
};

struct PointTerms {
    uint32_t index;
    double q;       // quantization difficulty
    double l1_err;  // || |h| - 1 ||_1
    double loss;    // (1-q)^gamma * inv_epsilon * l1_err
};

// sigma(beta x) = 1 / (1 + exp(-beta x)), stable for |beta x| up to ~700.
double adaptive_sigmoid(double x, double beta);

// Likelihood of label s for a code pair: sigma(beta<h_i,h_j>) when s = 1,
// its complement when s = 0.
double pair_probability(std::span<const double> hi, std::span<const double> hj, int s,
                        double beta);

// Cosine difficulty: (1+cos)/2 for similar pairs, (1-cos)/2 for dissimilar.
// q near 1 means the pair is already handled correctly. Magnitude-invariant;
// degenerate (near-zero) inputs yield 0.5.
double pair_difficulty(std::span<const double> hi, std::span<const double> hj, int s);

// w = alpha * (1 - q)^gamma.
double pair_weight(double alpha, double q, double gamma);

// (1 + cos(|h|, 1)) / 2: how close the code is to exact +-1 values up to
// scale. 1 iff all |h_k| are equal; 0.5 for the zero vector.
double point_quantization_difficulty(std::span<const double> h);

// Log of the bimodal Laplacian prior, dropping the code-independent
// normalizer: -inv_epsilon * sum_k || h_k| - 1 |.
double quantization_log_prior(std::span<const double> h, double inv_epsilon);

struct CeLossResult {
    double loss = 0.0;
    std::vector<PairTerms> terms;
};

// Priority cross-entropy loss: sum over pairs of w * (-log p).
CeLossResult priority_ce_loss(const CodeBatch& batch, std::span<const PairSpec> pairs,
                              const LossConfig& config);

struct QuantLossResult {
    double loss = 0.0;
    std::vector<PointTerms> terms;
};

// Priority quantization loss over the listed points (each counted once).
QuantLossResult priority_quant_loss(const CodeBatch& batch, std::span<const uint32_t> points,
                                    const LossConfig& config);

struct ObjectiveResult {
    double total = 0.0;
    double ce = 0.0;
    double quant = 0.0;
};

// Joint objective: total = pair_scale * L + point_scale * Q, with the
// gradient written into batch.grad (overwritten, ordered accumulation).
// The scales default to 1 (plain sum); the trainer passes per-batch mean
// normalizers. Throws on non-finite terms, naming the offending pair/point.
ObjectiveResult objective_and_gradient(CodeBatch& batch, std::span<const PairSpec> pairs,
                                       std::span<const uint32_t> points,
                                       const LossConfig& config, double pair_scale = 1.0,
                                       double point_scale = 1.0);

// Debug trace: pair_i,pair_j,s,inner,p,q,alpha,w,loss
void write_pair_terms_csv(std::ostream& out, std::span<const PairTerms> terms);

}  // namespace phash
