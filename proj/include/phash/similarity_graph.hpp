#pragma once

#include <cstdint>
#include <vector>

#include "phash/dataset.hpp"

namespace phash {

// Pairwise similarity structure over a dataset: s_ij = 1 iff items i and j
// share at least one label, plus per-point degree counts used for the
// class-imbalance scaling weights. Immutable after build; safe for
// concurrent reads.
class SimilarityGraph {
 public:
    size_t size() const { return n_; }
    bool include_self_pairs() const { return self_pairs_; }

    bool sim(size_t i, size_t j) const {
        return (bits_[i * words_ + j / 64] >> (j % 64)) & 1u;
    }

    // Number of pairs containing i, and its similar / dissimilar split.
    uint32_t deg(size_t i) const { return deg1_[i] + deg0_[i]; }
    uint32_t deg1(size_t i) const { return deg1_[i]; }
    uint32_t deg0(size_t i) const { return deg0_[i]; }

    // Degree-based scaling weight:
    //   |S_i||S_j| / sqrt(|S_i^1||S_j^1|)  for similar pairs,
    //   |S_i||S_j| / sqrt(|S_i^0||S_j^0|)  for dissimilar pairs.
    // Throws "degenerate degree" when the denominator vanishes; callers may
    // pre-filter with alpha_defined().
    double alpha(size_t i, size_t j) const;
    bool alpha_defined(size_t i, size_t j) const;

    // Mean of alpha over all in-scope, non-degenerate pairs (1.0 if none).
    // Used by the trainer to normalize weight scale across datasets.
    double mean_alpha() const;

    friend SimilarityGraph build_graph(const LabeledDataset& dataset, bool include_self_pairs);

 private:
    size_t n_ = 0;
    size_t words_ = 0;  // 64-bit words per row of the similarity bit matrix
    bool self_pairs_ = false;
    std::vector<uint64_t> bits_;
    std::vector<uint32_t> deg1_;
    std::vector<uint32_t> deg0_;
};

SimilarityGraph build_graph(const LabeledDataset& dataset, bool include_self_pairs = false);

struct PairSample {
    uint32_t i;
    uint32_t j;
    int s;
};

// All unordered pairs within the batch with their similarity labels.
// batch_indices must be distinct, within range, and number at least two.
std::vector<PairSample> sample_pairs(const SimilarityGraph& graph,
                                     std::span<const uint32_t> batch_indices);

}  // namespace phash
