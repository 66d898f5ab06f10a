#include "phash/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "binio.hpp"
#include "phash/dataset.hpp"
#include "phash/log.hpp"

#include <json.hpp>

namespace phash {

std::vector<int8_t> binarize(const Matrix& z) {
    std::vector<int8_t> signs(z.size());
    for (size_t i = 0; i < z.size(); ++i) signs[i] = z.data()[i] > 0.0 ? 1 : -1;
    return signs;
}

PackedCodes pack(std::span<const int8_t> signs, uint32_t n, uint32_t bits,
                 std::vector<std::string> ids, std::vector<std::vector<uint32_t>> label_sets,
                 std::vector<std::string> label_vocab) {
    if (signs.size() != static_cast<size_t>(n) * bits) {
        throw std::invalid_argument("pack: sign count does not match n x K");
    }
    if (ids.size() != n || label_sets.size() != n) {
        throw std::invalid_argument("pack: metadata count does not match n");
    }
    PackedCodes out;
    out.n = n;
    out.bits = bits;
    out.ids = std::move(ids);
    out.label_sets = std::move(label_sets);
    out.label_vocab = std::move(label_vocab);
    size_t wpc = out.words_per_code();
    out.words.assign(static_cast<size_t>(n) * wpc, 0);
    for (uint32_t i = 0; i < n; ++i) {
        uint64_t* code = out.words.data() + static_cast<size_t>(i) * wpc;
        for (uint32_t k = 0; k < bits; ++k) {
            if (signs[static_cast<size_t>(i) * bits + k] > 0) code[k / 64] |= 1ull << (k % 64);
        }
    }
    return out;
}

std::vector<int8_t> unpack(const PackedCodes& codes, size_t row) {
    if (row >= codes.n) throw std::out_of_range("unpack: row out of range");
    std::span<const uint64_t> code = codes.code(row);
    std::vector<int8_t> signs(codes.bits);
    for (uint32_t k = 0; k < codes.bits; ++k) {
        signs[k] = ((code[k / 64] >> (k % 64)) & 1u) ? 1 : -1;
    }
    return signs;
}

uint32_t hamming_words(std::span<const uint64_t> a, std::span<const uint64_t> b) {
    uint32_t d = 0;
    for (size_t w = 0; w < a.size(); ++w) d += std::popcount(a[w] ^ b[w]);
    return d;
}

uint32_t hamming(const PackedCodes& a, size_t i, const PackedCodes& b, size_t j) {
    if (a.bits != b.bits) throw std::invalid_argument("hamming: code widths differ");
    if (i >= a.n || j >= b.n) throw std::out_of_range("hamming: index out of range");
    return hamming_words(a.code(i), b.code(j));
}

std::vector<uint32_t> rank(const PackedCodes& db, std::span<const uint64_t> query) {
    if (db.n == 0) throw std::invalid_argument("rank: empty database");
    if (query.size() != db.words_per_code()) {
        throw std::invalid_argument("rank: code widths differ");
    }
    std::vector<uint32_t> dist(db.n);
    for (uint32_t i = 0; i < db.n; ++i) dist[i] = hamming_words(db.code(i), query);
    std::vector<uint32_t> order(db.n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](uint32_t x, uint32_t y) {
        return dist[x] != dist[y] ? dist[x] < dist[y] : x < y;
    });
    return order;
}

double average_precision(std::span<const uint32_t> ranking, std::span<const char> relevant,
                         size_t cutoff) {
    if (cutoff < 1) throw std::invalid_argument("average_precision: cutoff must be >= 1");
    size_t total_relevant = 0;
    for (char r : relevant) total_relevant += r != 0;
    if (total_relevant == 0) return 0.0;

    size_t top = std::min(cutoff, ranking.size());
    size_t hits = 0;
    double ap = 0.0;
    for (size_t k = 0; k < top; ++k) {
        if (relevant[ranking[k]]) {
            ++hits;
            ap += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return ap / static_cast<double>(std::min(total_relevant, cutoff));
}

namespace {

struct QueryMetrics {
    double ap = 0.0;
    double p_h2 = 0.0;
    std::vector<double> pr;  // precision at each recall grid point
    std::vector<double> pn;  // precision at each N grid point
};

// Per-query evaluation against the full database ranking.
QueryMetrics evaluate_query(const PackedCodes& db, std::span<const uint64_t> qcode,
                            const std::vector<char>& relevant, int excluded, size_t k_eval,
                            std::span<const double> pr_recall_grid,
                            std::span<const uint32_t> n_grid) {
    QueryMetrics m;
    m.pr.assign(pr_recall_grid.size(), 0.0);
    m.pn.assign(n_grid.size(), 0.0);

    std::vector<uint32_t> dist(db.n);
    for (uint32_t i = 0; i < db.n; ++i) dist[i] = hamming_words(db.code(i), qcode);

    std::vector<uint32_t> order;
    order.reserve(db.n);
    for (uint32_t i = 0; i < db.n; ++i) {
        if (static_cast<int>(i) != excluded) order.push_back(i);
    }
    std::sort(order.begin(), order.end(), [&](uint32_t x, uint32_t y) {
        return dist[x] != dist[y] ? dist[x] < dist[y] : x < y;
    });

    size_t total_relevant = 0;
    for (uint32_t i = 0; i < db.n; ++i) {
        if (static_cast<int>(i) != excluded && relevant[i]) ++total_relevant;
    }

    m.ap = average_precision(order, {relevant.data(), relevant.size()}, k_eval);

    size_t ball = 0, ball_rel = 0;
    for (uint32_t i : order) {
        if (dist[i] <= 2) {
            ++ball;
            ball_rel += relevant[i] != 0;
        }
    }
    m.p_h2 = ball == 0 ? 0.0 : static_cast<double>(ball_rel) / static_cast<double>(ball);

    // precision/recall along the ranking, then suffix-max for interpolation
    if (total_relevant > 0 && !pr_recall_grid.empty()) {
        std::vector<double> prec(order.size()), rec(order.size());
        size_t hits = 0;
        for (size_t k = 0; k < order.size(); ++k) {
            hits += relevant[order[k]] != 0;
            prec[k] = static_cast<double>(hits) / static_cast<double>(k + 1);
            rec[k] = static_cast<double>(hits) / static_cast<double>(total_relevant);
        }
        std::vector<double> best(order.size());
        double running = 0.0;
        for (size_t k = order.size(); k-- > 0;) {
            running = std::max(running, prec[k]);
            best[k] = running;
        }
        for (size_t g = 0; g < pr_recall_grid.size(); ++g) {
            double target = pr_recall_grid[g];
            size_t k = 0;
            while (k < order.size() && rec[k] < target) ++k;
            m.pr[g] = k < order.size() ? best[k] : 0.0;
        }
    }

    size_t hits = 0;
    size_t next = 0;
    std::vector<std::pair<uint32_t, size_t>> sorted_n;
    for (size_t g = 0; g < n_grid.size(); ++g) sorted_n.emplace_back(n_grid[g], g);
    std::sort(sorted_n.begin(), sorted_n.end());
    for (size_t k = 0; k < order.size() && next < sorted_n.size(); ++k) {
        hits += relevant[order[k]] != 0;
        while (next < sorted_n.size() && sorted_n[next].first == k + 1) {
            m.pn[sorted_n[next].second] =
                static_cast<double>(hits) / static_cast<double>(k + 1);
            ++next;
        }
    }
    // grid entries beyond the database size use the full ranking
    size_t total = order.size();
    for (; next < sorted_n.size(); ++next) {
        size_t h = 0;
        for (uint32_t i : order) h += relevant[i] != 0;
        m.pn[sorted_n[next].second] =
            total == 0 ? 0.0 : static_cast<double>(h) / static_cast<double>(total);
    }
    return m;
}

void run_chunked(size_t count, int threads, const std::function<void(size_t)>& fn) {
    if (threads <= 1 || count < 2) {
        for (size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    size_t workers = std::min<size_t>(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&, t]() {
            for (size_t i = t; i < count; i += workers) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace

RetrievalReport evaluate(const PackedCodes& queries, const PackedCodes& db, size_t k_eval,
                         std::span<const double> pr_recall_grid,
                         std::span<const uint32_t> n_grid, int threads) {
    if (queries.n == 0) throw std::invalid_argument("evaluate: empty query set");
    if (db.n == 0) throw std::invalid_argument("evaluate: empty database");
    if (queries.bits != db.bits) throw std::invalid_argument("evaluate: code widths differ");
    if (k_eval < 1) throw std::invalid_argument("evaluate: k_eval must be >= 1");

    // Vocabularies are matched by label name when they differ.
    bool same_vocab = queries.label_vocab == db.label_vocab;
    std::unordered_map<std::string, uint32_t> db_vocab;
    if (!same_vocab) {
        db_vocab.reserve(db.label_vocab.size());
        for (uint32_t i = 0; i < db.label_vocab.size(); ++i) db_vocab[db.label_vocab[i]] = i;
    }
    auto mapped_labels = [&](const std::vector<uint32_t>& labels) {
        if (same_vocab) return labels;
        std::vector<uint32_t> out;
        out.reserve(labels.size());
        for (uint32_t l : labels) {
            auto it = db_vocab.find(queries.label_vocab[l]);
            if (it != db_vocab.end()) out.push_back(it->second);
        }
        std::sort(out.begin(), out.end());
        return out;
    };

    std::unordered_map<std::string, uint32_t> db_ids;
    db_ids.reserve(db.n);
    for (uint32_t i = 0; i < db.n; ++i) db_ids[db.ids[i]] = i;

    std::vector<QueryMetrics> per_query(queries.n);
    run_chunked(queries.n, threads, [&](size_t qi) {
        std::vector<uint32_t> qlabels = mapped_labels(queries.label_sets[qi]);
        std::vector<char> relevant(db.n, 0);
        for (uint32_t i = 0; i < db.n; ++i) {
            relevant[i] = labels_intersect(qlabels, db.label_sets[i]) ? 1 : 0;
        }
        int excluded = -1;
        auto it = db_ids.find(queries.ids[qi]);
        if (it != db_ids.end()) {
            excluded = static_cast<int>(it->second);
            relevant[excluded] = 0;  // the query itself is outside its ranking universe
        }
        per_query[qi] = evaluate_query(db, queries.code(qi), relevant, excluded, k_eval,
                                       pr_recall_grid, n_grid);
    });

    RetrievalReport report;
    report.query_count = queries.n;
    report.k_eval = k_eval;
    report.bits = db.bits;
    report.pr_curve.reserve(pr_recall_grid.size());
    report.p_at_n.reserve(n_grid.size());

    double nq = static_cast<double>(queries.n);
    for (const QueryMetrics& m : per_query) {
        report.map_at_k += m.ap;
        report.p_at_h2 += m.p_h2;
    }
    report.map_at_k /= nq;
    report.p_at_h2 /= nq;
    for (size_t g = 0; g < pr_recall_grid.size(); ++g) {
        double acc = 0.0;
        for (const QueryMetrics& m : per_query) acc += m.pr[g];
        report.pr_curve.emplace_back(pr_recall_grid[g], acc / nq);
    }
    for (size_t g = 0; g < n_grid.size(); ++g) {
        double acc = 0.0;
        for (const QueryMetrics& m : per_query) acc += m.pn[g];
        report.p_at_n.emplace_back(n_grid[g], acc / nq);
    }
    return report;
}

namespace {
constexpr char kCodesMagic[4] = {'P', 'H', 'C', 'B'};
}

void write_codes(const PackedCodes& codes, const std::string& path) {
    detail::BinWriter w(path);
    w.bytes(kCodesMagic, 4);
    w.u32(codes.n);
    w.u32(codes.bits);
    w.u32(static_cast<uint32_t>(codes.label_vocab.size()));
    for (const std::string& name : codes.label_vocab) w.str16(name);
    for (uint32_t i = 0; i < codes.n; ++i) w.str16(codes.ids[i]);
    for (uint32_t i = 0; i < codes.n; ++i) {
        const std::vector<uint32_t>& labels = codes.label_sets[i];
        if (labels.size() > UINT16_MAX) throw std::runtime_error("too many labels");
        w.u16(static_cast<uint16_t>(labels.size()));
        for (uint32_t l : labels) w.u32(l);
    }
    for (uint64_t word : codes.words) w.u64(word);
    w.finish();
}

PackedCodes read_codes(const std::string& path) {
    detail::BinReader r(path);
    r.expect_magic(kCodesMagic);
    PackedCodes codes;
    codes.n = r.u32("code count");
    codes.bits = r.u32("code width");
    if (codes.bits == 0) r.fail("code width");
    uint32_t vocab = r.u32("label vocab size");
    codes.label_vocab.reserve(vocab);
    for (uint32_t i = 0; i < vocab; ++i) codes.label_vocab.push_back(r.str16("label name"));
    codes.ids.reserve(codes.n);
    for (uint32_t i = 0; i < codes.n; ++i) codes.ids.push_back(r.str16("item id"));
    codes.label_sets.resize(codes.n);
    for (uint32_t i = 0; i < codes.n; ++i) {
        uint16_t nl = r.u16("label count");
        codes.label_sets[i].resize(nl);
        for (uint16_t l = 0; l < nl; ++l) {
            uint32_t lab = r.u32("label id");
            if (lab >= vocab) r.fail("label id");
            codes.label_sets[i][l] = lab;
        }
        std::sort(codes.label_sets[i].begin(), codes.label_sets[i].end());
    }
    codes.words.resize(static_cast<size_t>(codes.n) * codes.words_per_code());
    for (size_t i = 0; i < codes.words.size(); ++i) codes.words[i] = r.u64("packed code word");
    r.expect_eof();

    // padding bits beyond K must be zero
    size_t wpc = codes.words_per_code();
    if (codes.bits % 64 != 0) {
        uint64_t mask = ~((1ull << (codes.bits % 64)) - 1);
        for (uint32_t i = 0; i < codes.n; ++i) {
            if (codes.words[i * wpc + wpc - 1] & mask) r.fail("nonzero padding bits");
        }
    }
    return codes;
}

void write_report_json(const RetrievalReport& report, std::ostream& out) {
    nlohmann::json j;
    j["map_at_k"] = report.map_at_k;
    j["k_eval"] = report.k_eval;
    j["p_at_h2"] = report.p_at_h2;
    j["bits"] = report.bits;
    j["query_count"] = report.query_count;
    j["pr_curve"] = nlohmann::json::array();
    for (auto& [r, p] : report.pr_curve) j["pr_curve"].push_back({{"recall", r}, {"precision", p}});
    j["p_at_n"] = nlohmann::json::array();
    for (auto& [n, p] : report.p_at_n) j["p_at_n"].push_back({{"n", n}, {"precision", p}});
    out << j.dump(2) << "\n";
}

void write_pr_csv(const RetrievalReport& report, std::ostream& out) {
    out << "recall,precision\n";
    char buf[80];
    for (auto& [r, p] : report.pr_curve) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", r, p);
        out << buf;
    }
}

void write_pn_csv(const RetrievalReport& report, std::ostream& out) {
    out << "n,precision\n";
    char buf[80];
    for (auto& [n, p] : report.p_at_n) {
        std::snprintf(buf, sizeof(buf), "%u,%.17g\n", n, p);
        out << buf;
    }
}

}  // namespace phash
