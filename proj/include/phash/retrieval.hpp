#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "phash/matrix.hpp"

namespace phash {

// Sign thresholding: +1 for z > 0, -1 otherwise (sgn(0) = -1).
// Returns row-major B x K signs.
std::vector<int8_t> binarize(const Matrix& z);

// K-bit binary codes packed into 64-bit words (bit set = +1), with the item
// ids and label sets needed for ground-truth relevance. Padding bits beyond
// K are zero. Immutable after build.
struct PackedCodes {
    uint32_t n = 0;
    uint32_t bits = 0;
    std::vector<uint64_t> words;
    std::vector<std::string> ids;
    std::vector<std::vector<uint32_t>> label_sets;  // sorted vocab indices
    std::vector<std::string> label_vocab;

    size_t words_per_code() const { return (static_cast<size_t>(bits) + 63) / 64; }
    std::span<const uint64_t> code(size_t i) const {
        return {words.data() + i * words_per_code(), words_per_code()};
    }
};

PackedCodes pack(std::span<const int8_t> signs, uint32_t n, uint32_t bits,
                 std::vector<std::string> ids, std::vector<std::vector<uint32_t>> label_sets,
                 std::vector<std::string> label_vocab);

std::vector<int8_t> unpack(const PackedCodes& codes, size_t row);

uint32_t hamming_words(std::span<const uint64_t> a, std::span<const uint64_t> b);

// Hamming distance between code i of A and code j of B; throws on K mismatch.
uint32_t hamming(const PackedCodes& a, size_t i, const PackedCodes& b, size_t j);

// Database indices sorted by ascending distance to the query, ties broken by
// ascending index.
std::vector<uint32_t> rank(const PackedCodes& db, std::span<const uint64_t> query);

// Truncated average precision: sum of Prec@k over relevant top-cutoff hits,
// normalized by min(#relevant in db, cutoff). 0 when nothing relevant is
// retrieved.
double average_precision(std::span<const uint32_t> ranking, std::span<const char> relevant,
                         size_t cutoff);

struct RetrievalReport {
    double map_at_k = 0.0;
    double p_at_h2 = 0.0;
    std::vector<std::pair<double, double>> pr_curve;   // (recall, precision)
    std::vector<std::pair<uint32_t, double>> p_at_n;   // (N, precision)
    size_t query_count = 0;
    size_t k_eval = 0;
    uint32_t bits = 0;
};

// Full metric suite over a query set. Relevance = shared label (vocabularies
// are matched by name when they differ). Queries whose id appears in the
// database are excluded from their own ranking; queries with an empty
// radius-2 ball contribute precision 0 to P@H<=2.
RetrievalReport evaluate(const PackedCodes& queries, const PackedCodes& db, size_t k_eval,
                         std::span<const double> pr_recall_grid,
                         std::span<const uint32_t> n_grid, int threads = 1);

// Code database file: magic PHCB, u32 n, u32 K, label vocabulary, id table,
// per-item label sets, packed words little-endian.
void write_codes(const PackedCodes& codes, const std::string& path);
PackedCodes read_codes(const std::string& path);

void write_report_json(const RetrievalReport& report, std::ostream& out);
void write_pr_csv(const RetrievalReport& report, std::ostream& out);
void write_pn_csv(const RetrievalReport& report, std::ostream& out);

}  // namespace phash
