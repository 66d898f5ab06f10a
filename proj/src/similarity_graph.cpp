#include "phash/similarity_graph.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace phash {

SimilarityGraph build_graph(const LabeledDataset& dataset, bool include_self_pairs) {
    if (dataset.empty()) throw std::invalid_argument("empty dataset");

    SimilarityGraph g;
    g.n_ = dataset.size();
    g.words_ = (g.n_ + 63) / 64;
    g.self_pairs_ = include_self_pairs;
    g.bits_.assign(g.n_ * g.words_, 0);
    g.deg1_.assign(g.n_, 0);
    g.deg0_.assign(g.n_, 0);

    auto set_bit = [&](size_t i, size_t j) { g.bits_[i * g.words_ + j / 64] |= 1ull << (j % 64); };

    for (size_t i = 0; i < g.n_; ++i) {
        for (size_t j = i + 1; j < g.n_; ++j) {
            if (dataset.share_label(i, j)) {
                set_bit(i, j);
                set_bit(j, i);
                ++g.deg1_[i];
                ++g.deg1_[j];
            } else {
                ++g.deg0_[i];
                ++g.deg0_[j];
            }
        }
        if (include_self_pairs) {
            // an item always shares labels with itself
            set_bit(i, i);
            ++g.deg1_[i];
        }
    }
    return g;
}

bool SimilarityGraph::alpha_defined(size_t i, size_t j) const {
    return sim(i, j) ? (deg1_[i] > 0 && deg1_[j] > 0) : (deg0_[i] > 0 && deg0_[j] > 0);
}

double SimilarityGraph::alpha(size_t i, size_t j) const {
    bool s = sim(i, j);
    double di = s ? deg1_[i] : deg0_[i];
    double dj = s ? deg1_[j] : deg0_[j];
    if (di == 0.0 || dj == 0.0) {
        throw std::runtime_error("degenerate degree for pair (" + std::to_string(i) + "," +
                                 std::to_string(j) + ")");
    }
    return static_cast<double>(deg(i)) * static_cast<double>(deg(j)) / std::sqrt(di * dj);
}

double SimilarityGraph::mean_alpha() const {
    double sum = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < n_; ++i) {
        size_t j0 = self_pairs_ ? i : i + 1;
        for (size_t j = j0; j < n_; ++j) {
            if (i == j && !self_pairs_) continue;
            if (!alpha_defined(i, j)) continue;
            sum += alpha(i, j);
            ++count;
        }
    }
    return count == 0 ? 1.0 : sum / static_cast<double>(count);
}

std::vector<PairSample> sample_pairs(const SimilarityGraph& graph,
                                     std::span<const uint32_t> batch_indices) {
    if (batch_indices.size() < 2) throw std::invalid_argument("batch too small");
    std::unordered_set<uint32_t> seen;
    for (uint32_t idx : batch_indices) {
        if (idx >= graph.size()) throw std::out_of_range("batch index out of range");
        if (!seen.insert(idx).second) throw std::invalid_argument("duplicate batch index");
    }
    std::vector<PairSample> pairs;
    pairs.reserve(batch_indices.size() * (batch_indices.size() - 1) / 2);
    for (size_t a = 0; a < batch_indices.size(); ++a) {
        for (size_t b = a + 1; b < batch_indices.size(); ++b) {
            uint32_t i = batch_indices[a];
            uint32_t j = batch_indices[b];
            pairs.push_back({i, j, graph.sim(i, j) ? 1 : 0});
        }
    }
    return pairs;
}

}  // namespace phash
