// Python bindings for the core operations: graph construction, priority
// losses with gradients, encoder training, and the Hamming retrieval engine.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "phash/dataset.hpp"
#include "phash/encoder.hpp"
#include "phash/loss.hpp"
#include "phash/matrix.hpp"
#include "phash/retrieval.hpp"
#include "phash/similarity_graph.hpp"
#include "phash/synth.hpp"

namespace py = pybind11;
using namespace phash;

namespace {

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    Matrix m(arr.shape(0), arr.shape(1));
    std::memcpy(m.data(), arr.data(), sizeof(double) * m.size());
    return m;
}

py::array_t<double> from_matrix(const Matrix& m) {
    py::array_t<double> arr({m.rows(), m.cols()});
    std::memcpy(arr.mutable_data(), m.data(), sizeof(double) * m.size());
    return arr;
}

LabeledDataset dataset_from_arrays(
    const py::array_t<float, py::array::c_style | py::array::forcecast>& features,
    const std::vector<std::vector<std::string>>& labels,
    const std::vector<std::string>& ids) {
    if (features.ndim() != 2) throw std::invalid_argument("features must be 2-D");
    size_t n = features.shape(0);
    size_t d = features.shape(1);
    if (labels.size() != n) throw std::invalid_argument("labels row count mismatch");
    std::vector<std::string> row_ids = ids;
    if (row_ids.empty()) {
        for (size_t i = 0; i < n; ++i) row_ids.push_back("x" + std::to_string(i));
    }
    if (row_ids.size() != n) throw std::invalid_argument("ids row count mismatch");
    std::vector<std::vector<float>> rows(n, std::vector<float>(d));
    for (size_t i = 0; i < n; ++i) {
        std::memcpy(rows[i].data(), features.data(i, 0), sizeof(float) * d);
    }
    return LabeledDataset::from_rows(std::move(row_ids), labels, std::move(rows));
}

std::vector<PairSpec> to_pair_specs(
    const std::vector<std::tuple<uint32_t, uint32_t, int, double>>& pairs) {
    std::vector<PairSpec> out;
    out.reserve(pairs.size());
    for (const auto& [a, b, s, alpha] : pairs) out.push_back({a, b, s, alpha});
    return out;
}

PackedCodes pack_from_signs(
    const py::array_t<int8_t, py::array::c_style | py::array::forcecast>& signs,
    const std::vector<std::string>& ids,
    const std::vector<std::vector<uint32_t>>& label_sets,
    const std::vector<std::string>& label_vocab) {
    if (signs.ndim() != 2) throw std::invalid_argument("signs must be 2-D");
    uint32_t n = static_cast<uint32_t>(signs.shape(0));
    uint32_t bits = static_cast<uint32_t>(signs.shape(1));
    std::vector<int8_t> flat(static_cast<size_t>(n) * bits);
    std::memcpy(flat.data(), signs.data(), flat.size());
    std::vector<std::vector<uint32_t>> sorted = label_sets;
    for (auto& ls : sorted) std::sort(ls.begin(), ls.end());
    return pack(flat, n, bits, ids, std::move(sorted), label_vocab);
}

}  // namespace

PYBIND11_MODULE(_phash, m) {
    m.doc() = "deep priority hashing: priority losses, encoder training, Hamming retrieval";

    py::enum_<AlphaMode>(m, "AlphaMode")
        .value("degree", AlphaMode::degree)
        .value("unit", AlphaMode::unit)
        .value("focal_pt", AlphaMode::focal_pt);

    py::enum_<WeightGradMode>(m, "WeightGradMode")
        .value("detached", WeightGradMode::detached)
        .value("full", WeightGradMode::full);

    py::enum_<Activation>(m, "Activation")
        .value("relu", Activation::relu)
        .value("tanh", Activation::tanh);

    py::class_<LossConfig>(m, "LossConfig")
        .def(py::init<>())
        .def_readwrite("beta", &LossConfig::beta)
        .def_readwrite("gamma", &LossConfig::gamma)
        .def_readwrite("inv_epsilon", &LossConfig::inv_epsilon)
        .def_readwrite("weight_grad_mode", &LossConfig::weight_grad_mode)
        .def_readwrite("alpha_mode", &LossConfig::alpha_mode)
        .def_readwrite("quant_enabled", &LossConfig::quant_enabled)
        .def("validate", &LossConfig::validate);

    py::class_<EncoderSpec>(m, "EncoderSpec")
        .def(py::init<>())
        .def_readwrite("input_dim", &EncoderSpec::input_dim)
        .def_readwrite("hidden", &EncoderSpec::hidden)
        .def_readwrite("code_bits", &EncoderSpec::code_bits)
        .def_readwrite("activation", &EncoderSpec::activation);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("momentum", &TrainConfig::momentum)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("fch_lr_multiplier", &TrainConfig::fch_lr_multiplier);

    py::class_<LabeledDataset>(m, "Dataset")
        .def(py::init(&dataset_from_arrays), py::arg("features"), py::arg("labels"),
             py::arg("ids") = std::vector<std::string>())
        .def_property_readonly("n", &LabeledDataset::size)
        .def_property_readonly("dim", &LabeledDataset::dim)
        .def_property_readonly("label_vocab", &LabeledDataset::label_vocab)
        .def("ids",
             [](const LabeledDataset& ds) {
                 std::vector<std::string> out;
                 for (const Item& it : ds.items()) out.push_back(it.id);
                 return out;
             })
        .def("label_sets",
             [](const LabeledDataset& ds) {
                 std::vector<std::vector<uint32_t>> out;
                 for (const Item& it : ds.items()) out.push_back(it.labels);
                 return out;
             })
        .def("features", [](const LabeledDataset& ds) {
            return from_matrix(ds.features_matrix());
        });

    m.def("read_dataset", &read_dataset, py::arg("path"));
    m.def("write_dataset_csv", &write_dataset_csv, py::arg("dataset"), py::arg("path"));
    m.def("write_dataset_binary", &write_dataset_binary, py::arg("dataset"), py::arg("path"));

    py::class_<SynthParams>(m, "SynthParams")
        .def(py::init<>())
        .def_readwrite("clusters", &SynthParams::clusters)
        .def_readwrite("sizes", &SynthParams::sizes)
        .def_readwrite("dim", &SynthParams::dim)
        .def_readwrite("noise", &SynthParams::noise)
        .def_readwrite("separation", &SynthParams::separation)
        .def_readwrite("seed", &SynthParams::seed);
    m.def("make_synthetic", &make_synthetic, py::arg("params"));

    py::class_<SimilarityGraph>(m, "SimilarityGraph")
        .def_property_readonly("n", &SimilarityGraph::size)
        .def("sim", &SimilarityGraph::sim)
        .def("deg", &SimilarityGraph::deg)
        .def("deg1", &SimilarityGraph::deg1)
        .def("deg0", &SimilarityGraph::deg0)
        .def("alpha", &SimilarityGraph::alpha)
        .def("alpha_defined", &SimilarityGraph::alpha_defined)
        .def("mean_alpha", &SimilarityGraph::mean_alpha);

    m.def("build_graph", &build_graph, py::arg("dataset"),
          py::arg("include_self_pairs") = false);
    m.def(
        "sample_pairs",
        [](const SimilarityGraph& g, const std::vector<uint32_t>& batch) {
            std::vector<std::tuple<uint32_t, uint32_t, int>> out;
            for (const PairSample& p : sample_pairs(g, batch)) {
                out.emplace_back(p.i, p.j, p.s);
            }
            return out;
        },
        py::arg("graph"), py::arg("batch_indices"));

    // scalar loss operations
    m.def("adaptive_sigmoid", &adaptive_sigmoid, py::arg("x"), py::arg("beta"));
    m.def(
        "pair_probability",
        [](const std::vector<double>& hi, const std::vector<double>& hj, int s, double beta) {
            return pair_probability(hi, hj, s, beta);
        },
        py::arg("hi"), py::arg("hj"), py::arg("s"), py::arg("beta"));
    m.def(
        "pair_difficulty",
        [](const std::vector<double>& hi, const std::vector<double>& hj, int s) {
            return pair_difficulty(hi, hj, s);
        },
        py::arg("hi"), py::arg("hj"), py::arg("s"));
    m.def("pair_weight", &pair_weight, py::arg("alpha"), py::arg("q"), py::arg("gamma"));
    m.def(
        "point_quantization_difficulty",
        [](const std::vector<double>& h) { return point_quantization_difficulty(h); },
        py::arg("h"));
    m.def(
        "quantization_log_prior",
        [](const std::vector<double>& h, double inv_epsilon) {
            return quantization_log_prior(h, inv_epsilon);
        },
        py::arg("h"), py::arg("inv_epsilon"));

    py::class_<PairTerms>(m, "PairTerms")
        .def_readonly("i", &PairTerms::i)
        .def_readonly("j", &PairTerms::j)
        .def_readonly("s", &PairTerms::s)
        .def_readonly("inner", &PairTerms::inner)
        .def_readonly("cosine", &PairTerms::cosine)
        .def_readonly("p", &PairTerms::p)
        .def_readonly("q", &PairTerms::q)
        .def_readonly("alpha", &PairTerms::alpha)
        .def_readonly("w", &PairTerms::w)
        .def_readonly("loss", &PairTerms::loss);

    m.def(
        "priority_ce_loss",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& z,
           const std::vector<std::tuple<uint32_t, uint32_t, int, double>>& pairs,
           const LossConfig& cfg) {
            CodeBatch batch(to_matrix(z));
            auto res = priority_ce_loss(batch, to_pair_specs(pairs), cfg);
            return py::make_tuple(res.loss, res.terms);
        },
        py::arg("z"), py::arg("pairs"), py::arg("config"));

    m.def(
        "priority_quant_loss",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& z,
           const std::vector<uint32_t>& points, const LossConfig& cfg) {
            CodeBatch batch(to_matrix(z));
            auto res = priority_quant_loss(batch, points, cfg);
            return res.loss;
        },
        py::arg("z"), py::arg("points"), py::arg("config"));

    m.def(
        "objective_and_gradient",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& z,
           const std::vector<std::tuple<uint32_t, uint32_t, int, double>>& pairs,
           const std::vector<uint32_t>& points, const LossConfig& cfg, double pair_scale,
           double point_scale) {
            CodeBatch batch(to_matrix(z));
            auto res = objective_and_gradient(batch, to_pair_specs(pairs), points, cfg,
                                              pair_scale, point_scale);
            return py::make_tuple(res.total, res.ce, res.quant, from_matrix(batch.grad));
        },
        py::arg("z"), py::arg("pairs"), py::arg("points"), py::arg("config"),
        py::arg("pair_scale") = 1.0, py::arg("point_scale") = 1.0);

    py::class_<Encoder>(m, "Encoder")
        .def_property_readonly("spec", [](const Encoder& e) { return e.spec; })
        .def("forward",
             [](const Encoder& e,
                const py::array_t<double, py::array::c_style | py::array::forcecast>& X) {
                 return from_matrix(e.forward(to_matrix(X)));
             })
        .def("save", [](const Encoder& e, const std::string& path) { save_encoder(e, path); });

    m.def("init_encoder", &init_encoder, py::arg("spec"), py::arg("seed"));
    m.def("load_encoder", &load_encoder, py::arg("path"));

    py::class_<EpochLog>(m, "EpochLog")
        .def_readonly("epoch", &EpochLog::epoch)
        .def_readonly("mean_ce", &EpochLog::mean_ce)
        .def_readonly("mean_quant", &EpochLog::mean_quant)
        .def_readonly("mean_quant_err", &EpochLog::mean_quant_err);

    m.def(
        "train",
        [](const LabeledDataset& ds, const SimilarityGraph& g, const EncoderSpec& spec,
           const LossConfig& lc, const TrainConfig& tc) {
            TrainResult res = train(ds, g, spec, lc, tc);
            return py::make_tuple(std::move(res.encoder), res.log);
        },
        py::arg("dataset"), py::arg("graph"), py::arg("encoder_spec"), py::arg("loss_config"),
        py::arg("train_config"));

    m.def(
        "binarize",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& z) {
            Matrix m2 = to_matrix(z);
            std::vector<int8_t> signs = binarize(m2);
            py::array_t<int8_t> arr({m2.rows(), m2.cols()});
            std::memcpy(arr.mutable_data(), signs.data(), signs.size());
            return arr;
        },
        py::arg("z"));

    py::class_<PackedCodes>(m, "PackedCodes")
        .def_property_readonly("n", [](const PackedCodes& c) { return c.n; })
        .def_property_readonly("bits", [](const PackedCodes& c) { return c.bits; })
        .def_property_readonly("ids", [](const PackedCodes& c) { return c.ids; })
        .def_property_readonly("label_sets", [](const PackedCodes& c) { return c.label_sets; })
        .def_property_readonly("label_vocab",
                               [](const PackedCodes& c) { return c.label_vocab; })
        .def("unpack", [](const PackedCodes& c, size_t row) {
            std::vector<int8_t> s = unpack(c, row);
            py::array_t<int8_t> arr(s.size());
            std::memcpy(arr.mutable_data(), s.data(), s.size());
            return arr;
        });

    m.def("pack", &pack_from_signs, py::arg("signs"), py::arg("ids"), py::arg("label_sets"),
          py::arg("label_vocab"));
    m.def("hamming", &hamming, py::arg("a"), py::arg("i"), py::arg("b"), py::arg("j"));
    m.def(
        "rank",
        [](const PackedCodes& db, const PackedCodes& queries, size_t qi) {
            if (qi >= queries.n) throw std::out_of_range("query index out of range");
            return rank(db, queries.code(qi));
        },
        py::arg("db"), py::arg("queries"), py::arg("query_index"));
    m.def(
        "average_precision",
        [](const std::vector<uint32_t>& ranking, const std::vector<bool>& relevant,
           size_t cutoff) {
            std::vector<char> rel(relevant.begin(), relevant.end());
            return average_precision(ranking, rel, cutoff);
        },
        py::arg("ranking"), py::arg("relevant"), py::arg("cutoff"));

    py::class_<RetrievalReport>(m, "RetrievalReport")
        .def_readonly("map_at_k", &RetrievalReport::map_at_k)
        .def_readonly("p_at_h2", &RetrievalReport::p_at_h2)
        .def_readonly("pr_curve", &RetrievalReport::pr_curve)
        .def_readonly("p_at_n", &RetrievalReport::p_at_n)
        .def_readonly("query_count", &RetrievalReport::query_count)
        .def_readonly("k_eval", &RetrievalReport::k_eval)
        .def_readonly("bits", &RetrievalReport::bits);

    m.def(
        "evaluate",
        [](const PackedCodes& queries, const PackedCodes& db, size_t k_eval,
           const std::vector<double>& pr_grid, const std::vector<uint32_t>& n_grid,
           int threads) { return evaluate(queries, db, k_eval, pr_grid, n_grid, threads); },
        py::arg("queries"), py::arg("db"), py::arg("k_eval") = 100,
        py::arg("pr_recall_grid") = std::vector<double>{},
        py::arg("n_grid") = std::vector<uint32_t>{}, py::arg("threads") = 1);

    m.def("write_codes", &write_codes, py::arg("codes"), py::arg("path"));
    m.def("read_codes", &read_codes, py::arg("path"));
}
