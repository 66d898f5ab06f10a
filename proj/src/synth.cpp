#include "phash/synth.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "phash/matrix.hpp"

namespace phash {

void SynthParams::validate() const {
    if (clusters < 2) throw std::invalid_argument("synth: need at least 2 clusters");
    if (dim == 0) throw std::invalid_argument("synth: dim must be >= 1");
    if (!sizes.empty() && sizes.size() != clusters) {
        throw std::invalid_argument("synth: sizes list must have one entry per cluster");
    }
    for (uint32_t s : sizes) {
        if (s == 0) throw std::invalid_argument("synth: cluster sizes must be >= 1");
    }
    if (noise < 0.0) throw std::invalid_argument("synth: noise must be >= 0");
    if (separation <= 0.0) throw std::invalid_argument("synth: separation must be > 0");
}

LabeledDataset make_synthetic(const SynthParams& params) {
    params.validate();
    Rng rng(params.seed);

    std::vector<uint32_t> sizes = params.sizes;
    if (sizes.empty()) sizes.assign(params.clusters, 100);

    // rejection-sample cluster means until pairwise separation holds
    double box = params.separation *
                 std::max(2.0, std::ceil(std::pow(params.clusters, 1.0 / params.dim)) + 1.0);
    std::vector<std::vector<double>> means;
    for (uint32_t c = 0; c < params.clusters; ++c) {
        bool placed = false;
        for (int attempt = 0; attempt < 100000 && !placed; ++attempt) {
            std::vector<double> m(params.dim);
            for (uint32_t d = 0; d < params.dim; ++d) m[d] = rng.uniform(-box, box);
            placed = true;
            for (const auto& prev : means) {
                double d2 = 0.0;
                for (uint32_t d = 0; d < params.dim; ++d) {
                    d2 += (m[d] - prev[d]) * (m[d] - prev[d]);
                }
                if (std::sqrt(d2) < params.separation) {
                    placed = false;
                    break;
                }
            }
            if (placed) means.push_back(std::move(m));
        }
        if (!placed) {
            throw std::runtime_error("synth: cannot place cluster means at this separation");
        }
    }

    size_t total = 0;
    for (uint32_t s : sizes) total += s;

    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> labels;
    std::vector<std::vector<float>> features;
    ids.reserve(total);
    labels.reserve(total);
    features.reserve(total);

    size_t index = 0;
    char idbuf[32];
    for (uint32_t c = 0; c < params.clusters; ++c) {
        std::string label = "c" + std::to_string(c);
        for (uint32_t k = 0; k < sizes[c]; ++k, ++index) {
            std::snprintf(idbuf, sizeof(idbuf), "p%06zu", index);
            ids.emplace_back(idbuf);
            labels.push_back({label});
            std::vector<float> f(params.dim);
            for (uint32_t d = 0; d < params.dim; ++d) {
                f[d] = static_cast<float>(means[c][d] + params.noise * rng.gaussian());
            }
            features.push_back(std::move(f));
        }
    }
    return LabeledDataset::from_rows(std::move(ids), labels, std::move(features));
}

}  // namespace phash
