#pragma once

#include <cstdint>
#include <vector>

#include "phash/dataset.hpp"

namespace phash {

// Gaussian cluster generator with configurable (imbalanced) class sizes.
// Cluster means are rejection-sampled until pairwise distances reach
// `separation`; every item gets its cluster's label.
struct SynthParams {
    uint32_t clusters = 3;
    std::vector<uint32_t> sizes;  // per-cluster counts; empty -> 100 each
    uint32_t dim = 8;
    double noise = 0.3;       // per-coordinate stddev around the cluster mean
    double separation = 4.0;  // minimum distance between cluster means
    uint64_t seed = 1;

    void validate() const;
};

LabeledDataset make_synthetic(const SynthParams& params);

}  // namespace phash
