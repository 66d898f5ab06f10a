// phash: deep priority hashing toolkit.
// Subcommands: synth, train, encode, eval, ablate. Config files are flat
// `key = value` text; command-line flags override config values, which
// override defaults.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "phash/dataset.hpp"
#include "phash/encoder.hpp"
#include "phash/log.hpp"
#include "phash/loss.hpp"
#include "phash/retrieval.hpp"
#include "phash/similarity_graph.hpp"
#include "phash/synth.hpp"

namespace {

using phash::AlphaMode;
using phash::WeightGradMode;

struct LossFlags {
    double beta = 0.5;
    double gamma = 2.0;
    double inv_epsilon = 0.1;
    std::string alpha_mode = "degree";
    std::string weight_grad = "detached";
};

struct TrainFlags {
    uint32_t batch = 64;
    uint32_t epochs = 50;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    uint64_t seed = 1;
    double fch_multiplier = 10.0;
    double lr_step_factor = 1.0;
    uint32_t lr_step_every = 0;
    std::string hidden = "32";
    std::string activation = "relu";
    uint32_t bits = 16;
    bool include_self_pairs = false;
};

struct SynthFlags {
    uint32_t clusters = 3;
    std::string sizes;
    uint32_t dims = 8;
    double noise = 0.3;
    double separation = 4.0;
    uint64_t seed = 1;
};

phash::LossConfig to_loss_config(const LossFlags& f) {
    phash::LossConfig cfg;
    cfg.beta = f.beta;
    cfg.gamma = f.gamma;
    cfg.inv_epsilon = f.inv_epsilon;
    cfg.quant_enabled = f.inv_epsilon > 0.0;
    if (f.alpha_mode == "degree") {
        cfg.alpha_mode = AlphaMode::degree;
    } else if (f.alpha_mode == "unit") {
        cfg.alpha_mode = AlphaMode::unit;
    } else if (f.alpha_mode == "focal-pt") {
        cfg.alpha_mode = AlphaMode::focal_pt;
    } else {
        throw CLI::ValidationError("--alpha-mode", "expected degree, unit, or focal-pt");
    }
    if (f.weight_grad == "detached") {
        cfg.weight_grad_mode = WeightGradMode::detached;
    } else if (f.weight_grad == "full") {
        cfg.weight_grad_mode = WeightGradMode::full;
    } else {
        throw CLI::ValidationError("--weight-grad", "expected detached or full");
    }
    return cfg;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
    std::vector<T> out;
    if (text.empty()) return out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            size_t used = 0;
            unsigned long long v = std::stoull(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(static_cast<T>(v));
        } catch (const std::exception&) {
            throw std::runtime_error(std::string(what) + ": bad list entry '" + tok + "'");
        }
    }
    return out;
}

phash::TrainConfig to_train_config(const TrainFlags& f) {
    phash::TrainConfig cfg;
    cfg.batch_size = f.batch;
    cfg.epochs = f.epochs;
    cfg.lr = f.lr;
    cfg.momentum = f.momentum;
    cfg.weight_decay = f.weight_decay;
    cfg.seed = f.seed;
    cfg.fch_lr_multiplier = f.fch_multiplier;
    if (f.lr_step_every > 0 && f.lr_step_factor != 1.0) {
        cfg.lr_schedule = phash::LrSchedule::step;
        cfg.lr_step_factor = f.lr_step_factor;
        cfg.lr_step_every = f.lr_step_every;
    }
    return cfg;
}

phash::EncoderSpec to_encoder_spec(const TrainFlags& f, size_t input_dim) {
    phash::EncoderSpec spec;
    spec.input_dim = static_cast<uint32_t>(input_dim);
    spec.hidden = parse_list<uint32_t>(f.hidden, "--hidden");
    spec.code_bits = f.bits;
    if (f.activation == "relu") {
        spec.activation = phash::Activation::relu;
    } else if (f.activation == "tanh") {
        spec.activation = phash::Activation::tanh;
    } else {
        throw CLI::ValidationError("--activation", "expected relu or tanh");
    }
    return spec;
}

void add_loss_options(CLI::App* cmd, LossFlags& f) {
    cmd->add_option("--beta", f.beta, "sigmoid bandwidth");
    cmd->add_option("--gamma", f.gamma, "focusing parameter");
    cmd->add_option("--inv-epsilon", f.inv_epsilon, "quantization tradeoff 1/eps (0 disables)");
    cmd->add_option("--alpha-mode", f.alpha_mode, "degree|unit|focal-pt");
    cmd->add_option("--weight-grad", f.weight_grad, "detached|full");
}

void add_train_options(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--bits", f.bits, "code length K");
    cmd->add_option("--hidden", f.hidden, "comma-separated hidden widths");
    cmd->add_option("--activation", f.activation, "hidden activation: relu|tanh");
    cmd->add_option("--batch", f.batch, "mini-batch size");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--lr", f.lr, "learning rate");
    cmd->add_option("--momentum", f.momentum, "SGD momentum");
    cmd->add_option("--weight-decay", f.weight_decay, "L2 weight decay");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--fch-multiplier", f.fch_multiplier, "hash-layer lr multiplier");
    cmd->add_option("--lr-step-factor", f.lr_step_factor, "step decay factor");
    cmd->add_option("--lr-step-every", f.lr_step_every, "epochs between lr steps");
    cmd->add_flag("--include-self-pairs", f.include_self_pairs,
                  "count self-pairs in the similarity graph");
}

void add_synth_options(CLI::App* cmd, SynthFlags& f) {
    cmd->add_option("--clusters", f.clusters, "number of Gaussian clusters");
    cmd->add_option("--sizes", f.sizes, "comma-separated per-cluster counts");
    cmd->add_option("--dims", f.dims, "feature dimension");
    cmd->add_option("--noise", f.noise, "per-coordinate stddev");
    cmd->add_option("--separation", f.separation, "minimum distance between cluster means");
    cmd->add_option("--seed", f.seed, "random seed");
}

phash::SynthParams to_synth_params(const SynthFlags& f) {
    phash::SynthParams p;
    p.clusters = f.clusters;
    p.sizes = parse_list<uint32_t>(f.sizes, "--sizes");
    p.dim = f.dims;
    p.noise = f.noise;
    p.separation = f.separation;
    p.seed = f.seed;
    return p;
}

phash::PackedCodes encode_dataset(const phash::Encoder& enc, const phash::LabeledDataset& ds) {
    phash::Matrix z = enc.forward(ds.features_matrix());
    std::vector<int8_t> signs = phash::binarize(z);
    std::vector<std::string> ids;
    std::vector<std::vector<uint32_t>> labels;
    ids.reserve(ds.size());
    labels.reserve(ds.size());
    for (const phash::Item& it : ds.items()) {
        ids.push_back(it.id);
        labels.push_back(it.labels);
    }
    return phash::pack(signs, static_cast<uint32_t>(ds.size()), enc.spec.code_bits,
                       std::move(ids), std::move(labels), ds.label_vocab());
}

// Class-balanced query rows: up to `per_class` items per label, in dataset order.
std::vector<uint32_t> balanced_query_rows(const phash::LabeledDataset& ds, uint32_t per_class) {
    std::vector<uint32_t> taken(ds.label_vocab().size(), 0);
    std::vector<uint32_t> rows;
    for (uint32_t i = 0; i < ds.size(); ++i) {
        for (uint32_t l : ds.item(i).labels) {
            if (taken[l] < per_class) {
                ++taken[l];
                rows.push_back(i);
                break;
            }
        }
    }
    return rows;
}

phash::PackedCodes select_codes(const phash::PackedCodes& all, std::span<const uint32_t> rows) {
    std::vector<int8_t> signs;
    signs.reserve(rows.size() * all.bits);
    std::vector<std::string> ids;
    std::vector<std::vector<uint32_t>> labels;
    for (uint32_t r : rows) {
        std::vector<int8_t> s = phash::unpack(all, r);
        signs.insert(signs.end(), s.begin(), s.end());
        ids.push_back(all.ids[r]);
        labels.push_back(all.label_sets[r]);
    }
    return phash::pack(signs, static_cast<uint32_t>(rows.size()), all.bits, std::move(ids),
                       std::move(labels), all.label_vocab);
}

std::vector<double> recall_grid(uint32_t points) {
    std::vector<double> grid;
    grid.reserve(points);
    for (uint32_t i = 1; i <= points; ++i) {
        grid.push_back(static_cast<double>(i) / static_cast<double>(points));
    }
    return grid;
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& fn) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    fn(out);
    if (!out) throw std::runtime_error(path.string() + ": write failed");
}

// --- config file merging -------------------------------------------------

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open config file");
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        }
        std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": empty key");
        }
        entries.emplace_back(key, value);
    }
    return entries;
}

// Rewrites the argument list so config values come first (flags win via
// last-wins policy). Unknown config keys are errors.
std::vector<std::string> merge_config(const CLI::App& app, std::vector<std::string> args) {
    if (args.empty()) return args;
    size_t sub_pos = 0;
    const CLI::App* sub = nullptr;
    for (; sub_pos < args.size(); ++sub_pos) {
        if (auto* s = app.get_subcommand_no_throw(args[sub_pos]); s != nullptr) {
            sub = s;
            break;
        }
    }
    if (sub == nullptr) return args;

    std::string config_path;
    for (size_t i = sub_pos + 1; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            config_path = args[i + 1];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
        }
    }
    if (config_path.empty()) return args;

    std::vector<std::string> merged(args.begin(), args.begin() + sub_pos + 1);
    for (const auto& [key, value] : read_config_file(config_path)) {
        const CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config") {
            throw std::runtime_error(config_path + ": unknown config key '" + key + "'");
        }
        if (opt->get_expected_min() == 0) {
            merged.push_back("--" + key + "=" + (value.empty() ? "true" : value));
        } else {
            merged.push_back("--" + key + "=" + value);
        }
    }
    merged.insert(merged.end(), args.begin() + sub_pos + 1, args.end());
    return merged;
}

void set_take_last(CLI::App& app) {
    for (CLI::Option* opt : app.get_options()) {
        opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
    for (CLI::App* sub : app.get_subcommands(nullptr)) set_take_last(*sub);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep priority hashing toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic clustered dataset");
    SynthFlags synth_flags;
    std::string synth_out;
    std::string synth_format = "csv";
    std::string synth_config;
    synth->add_option("--dataset", synth_out, "output dataset path")->required();
    add_synth_options(synth, synth_flags);
    synth->add_option("--format", synth_format, "csv|bin");
    synth->add_option("--config", synth_config, "flat key = value config file");

    // train
    auto* train = app.add_subcommand("train", "train an encoder on a labeled dataset");
    LossFlags train_loss;
    TrainFlags train_flags;
    std::string train_dataset, train_model, train_log, train_config_file;
    int train_threads = 1;
    bool train_deterministic = false;
    train->add_option("--dataset", train_dataset, "input dataset")->required();
    train->add_option("--model", train_model, "output model checkpoint")->required();
    train->add_option("--log", train_log, "output per-epoch training log CSV");
    add_loss_options(train, train_loss);
    add_train_options(train, train_flags);
    train->add_option("--threads", train_threads, "worker thread cap");
    train->add_flag("--deterministic", train_deterministic, "force ordered reductions");
    train->add_option("--config", train_config_file, "flat key = value config file");

    // encode
    auto* encode = app.add_subcommand("encode", "encode a dataset into binary codes");
    std::string enc_dataset, enc_model, enc_codes, enc_config;
    encode->add_option("--dataset", enc_dataset, "input dataset")->required();
    encode->add_option("--model", enc_model, "model checkpoint")->required();
    encode->add_option("--codes", enc_codes, "output codes file")->required();
    encode->add_option("--config", enc_config, "flat key = value config file");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate retrieval quality of code files");
    std::string eval_queries, eval_db, eval_report, eval_ngrid = "1,2,5,10,20,50,100";
    std::string eval_config;
    uint32_t eval_mapk = 100;
    uint32_t eval_pr_points = 20;
    int eval_threads = 1;
    bool eval_deterministic = false;
    eval->add_option("--queries", eval_queries, "query codes file")->required();
    eval->add_option("--codes", eval_db, "database codes file")->required();
    eval->add_option("--report", eval_report, "output report JSON path")->required();
    eval->add_option("--map-k", eval_mapk, "MAP cutoff");
    eval->add_option("--pr-points", eval_pr_points, "recall grid resolution");
    eval->add_option("--n-grid", eval_ngrid, "comma-separated P@N cutoffs");
    eval->add_option("--threads", eval_threads, "worker thread cap");
    eval->add_flag("--deterministic", eval_deterministic, "force ordered reductions");
    eval->add_option("--config", eval_config, "flat key = value config file");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "compare DPH against DPH-F/DPH-W/DPH-Q");
    LossFlags ab_loss;
    TrainFlags ab_train;
    SynthFlags ab_synth;
    ab_synth.sizes = "200,80,20";
    std::string ab_dataset, ab_report, ab_bits = "16", ab_config;
    uint32_t ab_qpc = 20;
    uint32_t ab_mapk = 100;
    int ab_threads = 1;
    ablate->add_option("--dataset", ab_dataset, "dataset path (generated if omitted)");
    ablate->add_option("--report", ab_report, "output MAP table CSV")->required();
    ablate->add_option("--bits", ab_bits, "comma-separated code lengths");
    ablate->add_option("--queries-per-class", ab_qpc, "balanced query count per class");
    ablate->add_option("--map-k", ab_mapk, "MAP cutoff");
    ablate->add_option("--threads", ab_threads, "worker thread cap");
    add_loss_options(ablate, ab_loss);
    {
        // --bits and --seed belong to the shared groups below; keep one owner each
        TrainFlags& f = ab_train;
        ablate->add_option("--hidden", f.hidden, "comma-separated hidden widths");
        ablate->add_option("--activation", f.activation, "hidden activation: relu|tanh");
        ablate->add_option("--batch", f.batch, "mini-batch size");
        ablate->add_option("--epochs", f.epochs, "training epochs");
        ablate->add_option("--lr", f.lr, "learning rate");
        ablate->add_option("--momentum", f.momentum, "SGD momentum");
        ablate->add_option("--weight-decay", f.weight_decay, "L2 weight decay");
        ablate->add_option("--seed", f.seed, "random seed");
        ablate->add_option("--fch-multiplier", f.fch_multiplier, "hash-layer lr multiplier");
    }
    ablate->add_option("--clusters", ab_synth.clusters, "synth: number of clusters");
    ablate->add_option("--sizes", ab_synth.sizes, "synth: per-cluster counts");
    ablate->add_option("--dims", ab_synth.dims, "synth: feature dimension");
    ablate->add_option("--noise", ab_synth.noise, "synth: per-coordinate stddev");
    ablate->add_option("--separation", ab_synth.separation, "synth: mean separation");
    ablate->add_option("--config", ab_config, "flat key = value config file");

    set_take_last(app);

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = merge_config(app, std::move(args));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (synth->parsed()) {
            phash::LabeledDataset ds = phash::make_synthetic(to_synth_params(synth_flags));
            if (synth_format == "csv") {
                phash::write_dataset_csv(ds, synth_out);
            } else if (synth_format == "bin") {
                phash::write_dataset_binary(ds, synth_out);
            } else {
                throw std::runtime_error("--format: expected csv or bin");
            }
            std::printf("wrote %zu items (dim %zu) to %s\n", ds.size(), ds.dim(),
                        synth_out.c_str());
        } else if (train->parsed()) {
            phash::LabeledDataset ds = phash::read_dataset(train_dataset);
            phash::SimilarityGraph graph =
                phash::build_graph(ds, train_flags.include_self_pairs);
            phash::LossConfig loss_cfg = to_loss_config(train_loss);
            phash::TrainConfig train_cfg = to_train_config(train_flags);
            phash::EncoderSpec spec = to_encoder_spec(train_flags, ds.dim());
            phash::TrainResult result = phash::train(ds, graph, spec, loss_cfg, train_cfg);
            phash::save_encoder(result.encoder, train_model);
            if (!train_log.empty()) {
                write_file(train_log,
                           [&](std::ostream& o) { phash::write_train_log_csv(o, result.log); });
            }
            if (!result.log.empty()) {
                const phash::EpochLog& last = result.log.back();
                std::printf("trained %u epochs: ce %.6f quant %.6f |abs(z)-1| %.4f\n",
                            train_cfg.epochs, last.mean_ce, last.mean_quant,
                            last.mean_quant_err);
            }
            std::printf("model written to %s\n", train_model.c_str());
        } else if (encode->parsed()) {
            phash::LabeledDataset ds = phash::read_dataset(enc_dataset);
            phash::Encoder enc = phash::load_encoder(enc_model);
            phash::PackedCodes codes = encode_dataset(enc, ds);
            phash::write_codes(codes, enc_codes);
            std::printf("encoded %u items at %u bits to %s\n", codes.n, codes.bits,
                        enc_codes.c_str());
        } else if (eval->parsed()) {
            phash::PackedCodes queries = phash::read_codes(eval_queries);
            phash::PackedCodes db = phash::read_codes(eval_db);
            std::vector<double> pr = recall_grid(eval_pr_points);
            std::vector<uint32_t> ngrid = parse_list<uint32_t>(eval_ngrid, "--n-grid");
            phash::RetrievalReport report =
                phash::evaluate(queries, db, eval_mapk, pr, ngrid, eval_threads);
            std::filesystem::path report_path(eval_report);
            write_file(report_path,
                       [&](std::ostream& o) { phash::write_report_json(report, o); });
            std::filesystem::path dir = report_path.parent_path();
            write_file(dir / "pr_curve.csv",
                       [&](std::ostream& o) { phash::write_pr_csv(report, o); });
            write_file(dir / "p_at_n.csv",
                       [&](std::ostream& o) { phash::write_pn_csv(report, o); });
            std::printf("MAP@%zu %.4f  P@H<=2 %.4f  (%zu queries, %u bits)\n", report.k_eval,
                        report.map_at_k, report.p_at_h2, report.query_count, report.bits);
        } else if (ablate->parsed()) {
            phash::LabeledDataset ds = ab_dataset.empty()
                                           ? phash::make_synthetic(to_synth_params(ab_synth))
                                           : phash::read_dataset(ab_dataset);
            phash::SimilarityGraph graph = phash::build_graph(ds, false);
            std::vector<uint32_t> bits_list = parse_list<uint32_t>(ab_bits, "--bits");
            if (bits_list.empty()) throw std::runtime_error("--bits: empty list");
            std::vector<uint32_t> query_rows = balanced_query_rows(ds, ab_qpc);
            if (query_rows.empty()) throw std::runtime_error("ablate: no queries selected");

            const char* names[4] = {"DPH", "DPH-F", "DPH-W", "DPH-Q"};
            std::vector<std::vector<double>> table(4,
                                                   std::vector<double>(bits_list.size(), 0.0));
            std::vector<double> pr = recall_grid(10);
            std::vector<uint32_t> ngrid = {10};
            for (size_t bi = 0; bi < bits_list.size(); ++bi) {
                for (int v = 0; v < 4; ++v) {
                    phash::LossConfig cfg = to_loss_config(ab_loss);
                    if (v == 1) cfg.alpha_mode = AlphaMode::focal_pt;
                    if (v == 2) {
                        cfg.alpha_mode = AlphaMode::unit;
                        cfg.gamma = 0.0;
                    }
                    if (v == 3) {
                        cfg.inv_epsilon = 0.0;
                        cfg.quant_enabled = false;
                    }
                    TrainFlags tf = ab_train;
                    tf.bits = bits_list[bi];
                    phash::EncoderSpec spec = to_encoder_spec(tf, ds.dim());
                    phash::TrainResult res =
                        phash::train(ds, graph, spec, cfg, to_train_config(tf));
                    phash::PackedCodes all = encode_dataset(res.encoder, ds);
                    phash::PackedCodes queries = select_codes(all, query_rows);
                    phash::RetrievalReport rep =
                        phash::evaluate(queries, all, ab_mapk, pr, ngrid, ab_threads);
                    table[v][bi] = rep.map_at_k;
                    std::printf("%-6s %3u bits: MAP@%u %.4f\n", names[v], bits_list[bi],
                                ab_mapk, rep.map_at_k);
                }
            }
            write_file(ab_report, [&](std::ostream& o) {
                o << "method";
                for (uint32_t b : bits_list) o << "," << b;
                o << "\n";
                char buf[64];
                for (int v = 0; v < 4; ++v) {
                    o << names[v];
                    for (size_t bi = 0; bi < bits_list.size(); ++bi) {
                        std::snprintf(buf, sizeof(buf), ",%.6f", table[v][bi]);
                        o << buf;
                    }
                    o << "\n";
                }
            });
            std::printf("ablation table written to %s\n", ab_report.c_str());
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
