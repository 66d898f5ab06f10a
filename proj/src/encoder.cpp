#include "phash/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "binio.hpp"
#include "phash/log.hpp"

namespace phash {

void EncoderSpec::validate() const {
    if (input_dim == 0) throw std::invalid_argument("encoder spec: input_dim must be >= 1");
    if (code_bits == 0) throw std::invalid_argument("encoder spec: code_bits must be >= 1");
    for (uint32_t w : hidden) {
        if (w == 0) throw std::invalid_argument("encoder spec: hidden widths must be >= 1");
    }
}

void TrainConfig::validate() const {
    if (batch_size < 2) throw std::invalid_argument("train config: batch_size must be >= 2");
    if (!(lr >= 0.0)) throw std::invalid_argument("train config: lr must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) {
        throw std::invalid_argument("train config: momentum must be in [0, 1)");
    }
    if (weight_decay < 0.0) {
        throw std::invalid_argument("train config: weight_decay must be >= 0");
    }
    if (!(fch_lr_multiplier > 0.0)) {
        throw std::invalid_argument("train config: fch_lr_multiplier must be > 0");
    }
}

Encoder init_encoder(const EncoderSpec& spec, uint64_t seed) {
    spec.validate();
    Encoder enc;
    enc.spec = spec;
    Rng rng(seed);

    std::vector<uint32_t> widths;
    widths.push_back(spec.input_dim);
    widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
    widths.push_back(spec.code_bits);

    for (size_t l = 1; l < widths.size(); ++l) {
        uint32_t in = widths[l - 1];
        uint32_t out = widths[l];
        double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Matrix W(out, in);
        for (size_t i = 0; i < W.size(); ++i) W.data()[i] = rng.uniform(-bound, bound);
        enc.weights.push_back(std::move(W));
        enc.biases.emplace_back(1, out);  // zero biases
    }
    return enc;
}

namespace {

void apply_activation(Matrix& m, Activation act) {
    if (act == Activation::relu) {
        for (size_t i = 0; i < m.size(); ++i) m.data()[i] = std::max(m.data()[i], 0.0);
    } else {
        for (size_t i = 0; i < m.size(); ++i) m.data()[i] = std::tanh(m.data()[i]);
    }
}

}  // namespace

Matrix Encoder::forward(const Matrix& X, ForwardCache& cache) const {
    if (X.cols() != spec.input_dim) throw std::invalid_argument("forward: dimension mismatch");
    cache.acts.clear();
    cache.acts.reserve(layer_count() + 1);
    cache.acts.push_back(X);
    for (size_t l = 0; l < layer_count(); ++l) {
        Matrix a = affine_forward(cache.acts.back(), weights[l], biases[l]);
        apply_activation(a, l + 1 == layer_count() ? Activation::tanh : spec.activation);
        cache.acts.push_back(std::move(a));
    }
    return cache.acts.back();
}

Matrix Encoder::forward(const Matrix& X) const {
    ForwardCache cache;
    return forward(X, cache);
}

ParamGrads backward(const Encoder& enc, const ForwardCache& cache, const Matrix& code_grad) {
    size_t layers = enc.layer_count();
    if (cache.acts.size() != layers + 1) throw std::invalid_argument("backward: stale cache");
    const Matrix& z = cache.acts.back();
    if (!code_grad.same_shape(z)) throw std::invalid_argument("backward: grad shape mismatch");

    ParamGrads grads;
    grads.weights.resize(layers);
    grads.biases.resize(layers);

    // output layer: tanh
    Matrix delta(z.rows(), z.cols());
    for (size_t i = 0; i < z.size(); ++i) {
        double t = z.data()[i];
        delta.data()[i] = code_grad.data()[i] * (1.0 - t * t);
    }

    for (size_t l = layers; l-- > 0;) {
        grads.weights[l] = matmul_tn(delta, cache.acts[l]);
        Matrix gb(1, delta.cols());
        for (size_t r = 0; r < delta.rows(); ++r) {
            for (size_t c = 0; c < delta.cols(); ++c) gb(0, c) += delta(r, c);
        }
        grads.biases[l] = std::move(gb);

        if (l == 0) break;
        Matrix next = matmul_nn(delta, enc.weights[l]);
        const Matrix& act = cache.acts[l];
        if (enc.spec.activation == Activation::relu) {
            for (size_t i = 0; i < next.size(); ++i) {
                if (act.data()[i] <= 0.0) next.data()[i] = 0.0;
            }
        } else {
            for (size_t i = 0; i < next.size(); ++i) {
                double t = act.data()[i];
                next.data()[i] *= 1.0 - t * t;
            }
        }
        delta = std::move(next);
    }
    return grads;
}

SgdState SgdState::zeros_like(const Encoder& enc) {
    SgdState st;
    for (size_t l = 0; l < enc.layer_count(); ++l) {
        st.vw.emplace_back(enc.weights[l].rows(), enc.weights[l].cols());
        st.vb.emplace_back(1, enc.biases[l].cols());
    }
    return st;
}

double lr_at_epoch(const TrainConfig& cfg, uint32_t epoch) {
    if (cfg.lr_schedule == LrSchedule::constant || cfg.lr_step_every == 0) return cfg.lr;
    return cfg.lr * std::pow(cfg.lr_step_factor, epoch / cfg.lr_step_every);
}

void sgd_step(Encoder& enc, const ParamGrads& grads, const TrainConfig& cfg, double lr_now,
              SgdState& state) {
    for (size_t l = 0; l < enc.layer_count(); ++l) {
        double lr_l = lr_now * (l + 1 == enc.layer_count() ? cfg.fch_lr_multiplier : 1.0);
        Matrix& W = enc.weights[l];
        Matrix& vW = state.vw[l];
        const Matrix& gW = grads.weights[l];
        for (size_t i = 0; i < W.size(); ++i) {
            double g = gW.data()[i] + cfg.weight_decay * W.data()[i];
            if (!std::isfinite(g)) throw std::runtime_error("non-finite parameter gradient");
            vW.data()[i] = cfg.momentum * vW.data()[i] + g;
            W.data()[i] -= lr_l * vW.data()[i];
        }
        Matrix& b = enc.biases[l];
        Matrix& vb = state.vb[l];
        const Matrix& gb = grads.biases[l];
        for (size_t i = 0; i < b.size(); ++i) {
            if (!std::isfinite(gb.data()[i])) {
                throw std::runtime_error("non-finite parameter gradient");
            }
            vb.data()[i] = cfg.momentum * vb.data()[i] + gb.data()[i];
            b.data()[i] -= lr_l * vb.data()[i];
        }
    }
}

void backward_and_step(Encoder& enc, const ForwardCache& cache, const Matrix& code_grad,
                       const TrainConfig& cfg, double lr_now, SgdState& state) {
    ParamGrads grads = backward(enc, cache, code_grad);
    sgd_step(enc, grads, cfg, lr_now, state);
}

TrainResult train(const LabeledDataset& dataset, const SimilarityGraph& graph,
                  const EncoderSpec& spec, const LossConfig& loss_config,
                  const TrainConfig& train_config) {
    spec.validate();
    loss_config.validate();
    train_config.validate();
    if (dataset.size() != graph.size()) {
        throw std::invalid_argument("train: dataset and graph sizes differ");
    }
    if (spec.input_dim != dataset.dim()) {
        throw std::invalid_argument("train: encoder input_dim does not match dataset");
    }

    TrainResult result;
    result.encoder = init_encoder(spec, train_config.seed);
    SgdState state = SgdState::zeros_like(result.encoder);
    Rng rng(train_config.seed ^ 0x9e3779b97f4a7c15ull);

    // Eq. 9 weights scale with dataset size; normalize by the global mean so
    // one learning rate works across alpha modes and dataset sizes.
    double alpha_norm = 1.0;
    if (loss_config.alpha_mode != AlphaMode::unit) {
        alpha_norm = graph.mean_alpha();
        if (alpha_norm <= 0.0) alpha_norm = 1.0;
    }

    std::vector<uint32_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    size_t degenerate_skips = 0;
    for (uint32_t epoch = 0; epoch < train_config.epochs; ++epoch) {
        rng.shuffle(order);
        double lr_now = lr_at_epoch(train_config, epoch);

        double sum_ce = 0.0;
        double sum_quant = 0.0;
        size_t steps = 0;
        double sum_qerr = 0.0;
        size_t qerr_entries = 0;

        for (size_t start = 0; start < order.size(); start += train_config.batch_size) {
            size_t end = std::min(order.size(), start + train_config.batch_size);
            size_t b = end - start;
            if (b < 2) continue;  // a single leftover point forms no pairs
            std::span<const uint32_t> batch_idx(order.data() + start, b);

            ForwardCache cache;
            CodeBatch batch(result.encoder.forward(dataset.features_matrix(batch_idx), cache));

            std::vector<PairSpec> pairs;
            pairs.reserve(b * (b - 1) / 2);
            for (size_t x = 0; x < b; ++x) {
                for (size_t y = x + 1; y < b; ++y) {
                    uint32_t gi = batch_idx[x];
                    uint32_t gj = batch_idx[y];
                    double a = 1.0;
                    if (loss_config.alpha_mode != AlphaMode::unit) {
                        if (!graph.alpha_defined(gi, gj)) {
                            if (degenerate_skips++ == 0) {
                                log::warn("skipping pairs with degenerate degree weights");
                            }
                            continue;
                        }
                        a = graph.alpha(gi, gj) / alpha_norm;
                    }
                    pairs.push_back({static_cast<uint32_t>(x), static_cast<uint32_t>(y),
                                     graph.sim(gi, gj) ? 1 : 0, a});
                }
            }
            if (pairs.empty()) continue;

            std::vector<uint32_t> points(b);
            std::iota(points.begin(), points.end(), 0);

            ObjectiveResult obj = objective_and_gradient(
                batch, pairs, points, loss_config, 1.0 / static_cast<double>(pairs.size()),
                1.0 / static_cast<double>(b));

            sum_ce += obj.ce;
            sum_quant += obj.quant;
            ++steps;
            for (size_t i = 0; i < batch.z.size(); ++i) {
                sum_qerr += std::abs(std::abs(batch.z.data()[i]) - 1.0);
            }
            qerr_entries += batch.z.size();

            backward_and_step(result.encoder, cache, batch.grad, train_config, lr_now, state);
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.mean_ce = steps > 0 ? sum_ce / static_cast<double>(steps) : 0.0;
        entry.mean_quant = steps > 0 ? sum_quant / static_cast<double>(steps) : 0.0;
        entry.mean_quant_err =
            qerr_entries > 0 ? sum_qerr / static_cast<double>(qerr_entries) : 0.0;
        result.log.push_back(entry);
        log::info("epoch %u: ce %.6f quant %.6f |abs(z)-1| %.4f", epoch, entry.mean_ce,
                  entry.mean_quant, entry.mean_quant_err);
    }
    if (degenerate_skips > 0) {
        log::info("skipped %zu pair evaluations with degenerate degrees", degenerate_skips);
    }
    return result;
}

namespace {
constexpr char kModelMagic[4] = {'P', 'H', 'M', 'D'};
constexpr uint32_t kModelVersion = 1;
}  // namespace

void save_encoder(const Encoder& enc, const std::string& path) {
    detail::BinWriter w(path);
    w.bytes(kModelMagic, 4);
    w.u32(kModelVersion);
    w.u32(enc.spec.input_dim);
    w.u32(enc.spec.code_bits);
    w.u32(static_cast<uint32_t>(enc.spec.hidden.size()));
    for (uint32_t h : enc.spec.hidden) w.u32(h);
    w.u32(enc.spec.activation == Activation::relu ? 0 : 1);
    for (size_t l = 0; l < enc.layer_count(); ++l) {
        for (size_t i = 0; i < enc.weights[l].size(); ++i) w.f64(enc.weights[l].data()[i]);
        for (size_t i = 0; i < enc.biases[l].size(); ++i) w.f64(enc.biases[l].data()[i]);
    }
    w.finish();
}

Encoder load_encoder(const std::string& path) {
    detail::BinReader r(path);
    r.expect_magic(kModelMagic);
    uint32_t version = r.u32("version");
    if (version != kModelVersion) {
        throw std::runtime_error(path + ": unsupported model version " +
                                 std::to_string(version));
    }
    EncoderSpec spec;
    spec.input_dim = r.u32("input_dim");
    spec.code_bits = r.u32("code_bits");
    uint32_t nh = r.u32("hidden layer count");
    if (nh > 64) r.fail("hidden layer count");
    spec.hidden.resize(nh);
    for (uint32_t i = 0; i < nh; ++i) spec.hidden[i] = r.u32("hidden width");
    uint32_t act = r.u32("activation");
    if (act > 1) r.fail("activation");
    spec.activation = act == 0 ? Activation::relu : Activation::tanh;
    spec.validate();

    Encoder enc;
    enc.spec = spec;
    std::vector<uint32_t> widths;
    widths.push_back(spec.input_dim);
    widths.insert(widths.end(), spec.hidden.begin(), spec.hidden.end());
    widths.push_back(spec.code_bits);
    for (size_t l = 1; l < widths.size(); ++l) {
        Matrix W(widths[l], widths[l - 1]);
        for (size_t i = 0; i < W.size(); ++i) W.data()[i] = r.f64("weight");
        enc.weights.push_back(std::move(W));
        Matrix b(1, widths[l]);
        for (size_t i = 0; i < b.size(); ++i) b.data()[i] = r.f64("bias");
        enc.biases.push_back(std::move(b));
    }
    r.expect_eof();
    return enc;
}

void write_train_log_csv(std::ostream& out, std::span<const EpochLog> log) {
    out << "epoch,mean_ce,mean_quant,mean_quant_err\n";
    char buf[160];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof(buf), "%u,%.17g,%.17g,%.17g\n", e.epoch, e.mean_ce,
                      e.mean_quant, e.mean_quant_err);
        out << buf;
    }
}

}  // namespace phash
