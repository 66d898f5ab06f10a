#include "phash/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "binio.hpp"

namespace phash {

namespace {

void validate_items(const std::vector<Item>& items, size_t dim, size_t vocab_size) {
    std::unordered_set<std::string> seen;
    seen.reserve(items.size());
    for (const Item& it : items) {
        if (it.labels.empty()) {
            throw std::invalid_argument("dataset: item '" + it.id + "' has no labels");
        }
        if (it.features.size() != dim) {
            throw std::invalid_argument("dataset: item '" + it.id +
                                        "' has inconsistent feature dimension");
        }
        if (!std::is_sorted(it.labels.begin(), it.labels.end())) {
            throw std::invalid_argument("dataset: unsorted label set for item '" + it.id + "'");
        }
        for (uint32_t l : it.labels) {
            if (l >= vocab_size) {
                throw std::invalid_argument("dataset: label id out of range for item '" +
                                            it.id + "'");
            }
        }
        if (!seen.insert(it.id).second) {
            throw std::invalid_argument("dataset: duplicate id '" + it.id + "'");
        }
    }
}

}  // namespace

LabeledDataset::LabeledDataset(std::vector<Item> items, std::vector<std::string> label_vocab)
    : items_(std::move(items)), label_vocab_(std::move(label_vocab)) {
    dim_ = items_.empty() ? 0 : items_.front().features.size();
    validate_items(items_, dim_, label_vocab_.size());
}

LabeledDataset LabeledDataset::from_rows(std::vector<std::string> ids,
                                         const std::vector<std::vector<std::string>>& labels,
                                         std::vector<std::vector<float>> features) {
    if (ids.size() != labels.size() || ids.size() != features.size()) {
        throw std::invalid_argument("dataset: ids/labels/features row counts differ");
    }
    std::vector<std::string> vocab;
    std::unordered_map<std::string, uint32_t> index;
    std::vector<Item> items;
    items.reserve(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
        Item it;
        it.id = std::move(ids[i]);
        it.features = std::move(features[i]);
        for (const std::string& name : labels[i]) {
            auto [pos, inserted] = index.try_emplace(name, static_cast<uint32_t>(vocab.size()));
            if (inserted) vocab.push_back(name);
            it.labels.push_back(pos->second);
        }
        std::sort(it.labels.begin(), it.labels.end());
        it.labels.erase(std::unique(it.labels.begin(), it.labels.end()), it.labels.end());
        items.push_back(std::move(it));
    }
    return LabeledDataset(std::move(items), std::move(vocab));
}

bool labels_intersect(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) return true;
        if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return false;
}

bool LabeledDataset::share_label(size_t i, size_t j) const {
    return labels_intersect(items_[i].labels, items_[j].labels);
}

Matrix LabeledDataset::features_matrix() const {
    Matrix X(items_.size(), dim_);
    for (size_t i = 0; i < items_.size(); ++i) {
        for (size_t d = 0; d < dim_; ++d) X(i, d) = items_[i].features[d];
    }
    return X;
}

Matrix LabeledDataset::features_matrix(std::span<const uint32_t> rows) const {
    Matrix X(rows.size(), dim_);
    for (size_t i = 0; i < rows.size(); ++i) {
        const Item& it = items_[rows[i]];
        for (size_t d = 0; d < dim_; ++d) X(i, d) = it.features[d];
    }
    return X;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

float parse_float(const std::string& tok, const std::string& path, size_t lineno) {
    float v = 0.0f;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad feature value '" +
                                 tok + "'");
    }
    return v;
}

}  // namespace

LabeledDataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split(line, ',');
    if (header.size() < 3 || header[0] != "id" || header[1] != "labels") {
        throw std::runtime_error(path + ": expected header id,labels,f0,...");
    }
    size_t dim = header.size() - 2;

    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> labels;
    std::vector<std::vector<float>> features;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols = split(line, ',');
        if (cols.size() != dim + 2) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": wrong column count");
        }
        ids.push_back(cols[0]);
        std::vector<std::string> labs = split(cols[1], '|');
        labs.erase(std::remove(labs.begin(), labs.end(), std::string()), labs.end());
        labels.push_back(std::move(labs));
        std::vector<float> f(dim);
        for (size_t d = 0; d < dim; ++d) f[d] = parse_float(cols[d + 2], path, lineno);
        features.push_back(std::move(f));
    }
    return LabeledDataset::from_rows(std::move(ids), labels, std::move(features));
}

void write_dataset_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "id,labels";
    for (size_t d = 0; d < ds.dim(); ++d) out << ",f" << d;
    out << "\n";
    char buf[64];
    for (const Item& it : ds.items()) {
        out << it.id << ',';
        for (size_t l = 0; l < it.labels.size(); ++l) {
            if (l > 0) out << '|';
            out << ds.label_vocab()[it.labels[l]];
        }
        for (float f : it.features) {
            std::snprintf(buf, sizeof(buf), ",%.9g", static_cast<double>(f));
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

namespace {
constexpr char kDatasetMagic[4] = {'P', 'H', 'D', 'S'};
}

void write_dataset_binary(const LabeledDataset& ds, const std::string& path) {
    detail::BinWriter w(path);
    w.bytes(kDatasetMagic, 4);
    w.u32(static_cast<uint32_t>(ds.size()));
    w.u32(static_cast<uint32_t>(ds.dim()));
    for (const Item& it : ds.items()) {
        w.str16(it.id);
        if (it.labels.size() > UINT16_MAX) throw std::runtime_error("too many labels");
        w.u16(static_cast<uint16_t>(it.labels.size()));
        for (uint32_t l : it.labels) w.u32(l);
        for (float f : it.features) w.f32(f);
    }
    w.finish();
}

LabeledDataset read_dataset_binary(const std::string& path) {
    detail::BinReader r(path);
    r.expect_magic(kDatasetMagic);
    uint32_t n = r.u32("item count");
    uint32_t dim = r.u32("dimension");
    std::vector<Item> items;
    items.reserve(n);
    uint32_t max_label = 0;
    for (uint32_t i = 0; i < n; ++i) {
        Item it;
        it.id = r.str16("item id");
        uint16_t nl = r.u16("label count");
        it.labels.resize(nl);
        for (uint16_t l = 0; l < nl; ++l) it.labels[l] = r.u32("label id");
        std::sort(it.labels.begin(), it.labels.end());
        it.labels.erase(std::unique(it.labels.begin(), it.labels.end()), it.labels.end());
        if (!it.labels.empty()) max_label = std::max(max_label, it.labels.back());
        it.features.resize(dim);
        for (uint32_t d = 0; d < dim; ++d) it.features[d] = r.f32("feature");
        items.push_back(std::move(it));
    }
    r.expect_eof();
    // PHDS carries numeric label ids only; synthesize names for the vocab.
    std::vector<std::string> vocab;
    if (n > 0) {
        vocab.reserve(max_label + 1);
        for (uint32_t l = 0; l <= max_label; ++l) vocab.push_back("L" + std::to_string(l));
    }
    return LabeledDataset(std::move(items), std::move(vocab));
}

LabeledDataset read_dataset(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw std::runtime_error(path + ": cannot open");
    char magic[4] = {0, 0, 0, 0};
    probe.read(magic, 4);
    probe.close();
    if (std::memcmp(magic, kDatasetMagic, 4) == 0) return read_dataset_binary(path);
    return read_dataset_csv(path);
}

}  // namespace phash
