#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phash/matrix.hpp"

namespace phash {

struct Item {
    std::string id;
    std::vector<uint32_t> labels;  // sorted indices into the label vocabulary
    std::vector<float> features;
};

// Labeled feature vectors. Every item carries at least one label and exactly
// dim() features; ids are unique.
class LabeledDataset {
 public:
    LabeledDataset() = default;
    LabeledDataset(std::vector<Item> items, std::vector<std::string> label_vocab);

    // Builds the vocabulary from label strings in order of first appearance.
    static LabeledDataset from_rows(std::vector<std::string> ids,
                                    const std::vector<std::vector<std::string>>& labels,
                                    std::vector<std::vector<float>> features);

    size_t size() const { return items_.size(); }
    size_t dim() const { return dim_; }
    bool empty() const { return items_.empty(); }

    const Item& item(size_t i) const { return items_[i]; }
    const std::vector<Item>& items() const { return items_; }
    const std::vector<std::string>& label_vocab() const { return label_vocab_; }

    bool share_label(size_t i, size_t j) const;

    // n x D feature matrix in doubles.
    Matrix features_matrix() const;
    // Feature matrix for a subset of rows.
    Matrix features_matrix(std::span<const uint32_t> rows) const;

 private:
    std::vector<Item> items_;
    std::vector<std::string> label_vocab_;
    size_t dim_ = 0;
};

// Sorted-vector intersection test.
bool labels_intersect(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b);

// CSV format: header `id,labels,f0,...,f{D-1}`, labels `|`-separated.
// Binary format: magic PHDS, u32 n, u32 D, per item u16 id-length + id bytes,
// u16 label-count + u32 label ids, D little-endian f32. read_dataset sniffs
// the magic and falls back to CSV.
LabeledDataset read_dataset(const std::string& path);
LabeledDataset read_dataset_csv(const std::string& path);
LabeledDataset read_dataset_binary(const std::string& path);
void write_dataset_csv(const LabeledDataset& ds, const std::string& path);
void write_dataset_binary(const LabeledDataset& ds, const std::string& path);

}  // namespace phash
