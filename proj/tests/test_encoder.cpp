#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "phash/encoder.hpp"
#include "phash/synth.hpp"

using phash::Activation;
using phash::Encoder;
using phash::EncoderSpec;
using phash::ForwardCache;
using phash::Matrix;
using phash::TrainConfig;

namespace {

EncoderSpec small_spec() {
    EncoderSpec spec;
    spec.input_dim = 5;
    spec.hidden = {7};
    spec.code_bits = 6;
    spec.activation = Activation::relu;
    return spec;
}

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("initialization is deterministic per seed") {
    Encoder a = phash::init_encoder(small_spec(), 42);
    Encoder b = phash::init_encoder(small_spec(), 42);
    Encoder c = phash::init_encoder(small_spec(), 43);
    REQUIRE(a.layer_count() == 2);
    bool all_equal = true;
    bool any_diff_seed = false;
    for (size_t l = 0; l < a.layer_count(); ++l) {
        for (size_t i = 0; i < a.weights[l].size(); ++i) {
            all_equal &= a.weights[l].data()[i] == b.weights[l].data()[i];
            any_diff_seed |= a.weights[l].data()[i] != c.weights[l].data()[i];
        }
    }
    CHECK(all_equal);
    CHECK(any_diff_seed);
}

TEST_CASE("zero hidden layers form a single affine+tanh map") {
    EncoderSpec spec;
    spec.input_dim = 8;
    spec.code_bits = 16;
    Encoder enc = phash::init_encoder(spec, 1);
    REQUIRE(enc.layer_count() == 1);
    CHECK(enc.weights[0].rows() == 16);
    CHECK(enc.weights[0].cols() == 8);

    phash::Rng rng(2);
    Matrix X(4, 8);
    for (size_t i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-2.0, 2.0);
    Matrix z = enc.forward(X);
    CHECK(z.rows() == 4);
    CHECK(z.cols() == 16);
    for (size_t i = 0; i < z.size(); ++i) {
        CHECK(z.data()[i] <= 1.0);
        CHECK(z.data()[i] >= -1.0);
    }
}

TEST_CASE("forward matches a hand-computed single-layer case") {
    EncoderSpec spec;
    spec.input_dim = 2;
    spec.code_bits = 1;
    Encoder enc = phash::init_encoder(spec, 1);
    enc.weights[0](0, 0) = 0.5;
    enc.weights[0](0, 1) = -0.25;
    enc.biases[0](0, 0) = 0.1;
    Matrix X(1, 2);
    X(0, 0) = 1.0;
    X(0, 1) = 2.0;
    Matrix z = enc.forward(X);
    // tanh(0.5 - 0.5 + 0.1) = tanh(0.1), frozen scalar oracle
    CHECK(z(0, 0) == doctest::Approx(0.09966799462495582).epsilon(1e-13));
}

TEST_CASE("forward rejects dimension mismatches") {
    Encoder enc = phash::init_encoder(small_spec(), 3);
    Matrix bad(2, 4);
    CHECK_THROWS_AS(enc.forward(bad), std::invalid_argument);
}

TEST_CASE("encoder parameter gradients match finite differences") {
    phash::Rng rng(51);
    for (Activation act : {Activation::relu, Activation::tanh}) {
        EncoderSpec spec = small_spec();
        spec.activation = act;
        Encoder enc = phash::init_encoder(spec, 7 + static_cast<int>(act));

        Matrix X(6, spec.input_dim);
        for (size_t i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1.5, 1.5);

        std::vector<phash::PairSpec> pairs;
        for (uint32_t a = 0; a < 6; ++a) {
            for (uint32_t b = a + 1; b < 6; ++b) {
                pairs.push_back({a, b, static_cast<int>((a * 7 + b) % 2), 1.5});
            }
        }
        std::vector<uint32_t> points(6);
        std::iota(points.begin(), points.end(), 0);
        phash::LossConfig cfg;
        cfg.weight_grad_mode = phash::WeightGradMode::full;

        auto loss_at = [&](const Encoder& e) {
            phash::CodeBatch b(e.forward(X));
            return oracle::full_loss(b.z, pairs, points, cfg);
        };

        ForwardCache cache;
        phash::CodeBatch batch(enc.forward(X, cache));
        phash::objective_and_gradient(batch, pairs, points, cfg);
        phash::ParamGrads grads = phash::backward(enc, cache, batch.grad);

        double step = 1e-6;
        for (size_t l = 0; l < enc.layer_count(); ++l) {
            Matrix fd_w(enc.weights[l].rows(), enc.weights[l].cols());
            for (size_t i = 0; i < enc.weights[l].size(); ++i) {
                Encoder probe = enc;
                probe.weights[l].data()[i] += step;
                double fp = loss_at(probe);
                probe.weights[l].data()[i] -= 2 * step;
                double fm = loss_at(probe);
                fd_w.data()[i] = (fp - fm) / (2 * step);
            }
            CHECK(oracle::max_rel_err(grads.weights[l], fd_w) < 1e-4);

            Matrix fd_b(1, enc.biases[l].cols());
            for (size_t i = 0; i < enc.biases[l].size(); ++i) {
                Encoder probe = enc;
                probe.biases[l].data()[i] += step;
                double fp = loss_at(probe);
                probe.biases[l].data()[i] -= 2 * step;
                double fm = loss_at(probe);
                fd_b.data()[i] = (fp - fm) / (2 * step);
            }
            CHECK(oracle::max_rel_err(grads.biases[l], fd_b) < 1e-4);
        }
    }
}

TEST_CASE("zero gradient and zero weight decay leave parameters unchanged") {
    Encoder enc = phash::init_encoder(small_spec(), 11);
    Encoder before = enc;
    Matrix X(3, 5);
    for (size_t i = 0; i < X.size(); ++i) X.data()[i] = 0.3;
    ForwardCache cache;
    Matrix z = enc.forward(X, cache);
    Matrix zero_grad(z.rows(), z.cols());
    TrainConfig cfg;
    cfg.weight_decay = 0.0;
    cfg.momentum = 0.0;
    phash::SgdState state = phash::SgdState::zeros_like(enc);
    phash::backward_and_step(enc, cache, zero_grad, cfg, cfg.lr, state);
    for (size_t l = 0; l < enc.layer_count(); ++l) {
        for (size_t i = 0; i < enc.weights[l].size(); ++i) {
            CHECK(enc.weights[l].data()[i] == before.weights[l].data()[i]);
        }
    }
}

TEST_CASE("single step without momentum matches the hand-computed update") {
    // one layer, one unit: z = tanh(w x + b); objective grad dL/dz = g
    EncoderSpec spec;
    spec.input_dim = 1;
    spec.code_bits = 1;
    Encoder enc = phash::init_encoder(spec, 5);
    enc.weights[0](0, 0) = 0.8;
    enc.biases[0](0, 0) = -0.2;

    Matrix X(1, 1);
    X(0, 0) = 0.5;
    ForwardCache cache;
    Matrix z = enc.forward(X, cache);
    double pre = 0.8 * 0.5 - 0.2;
    CHECK(z(0, 0) == doctest::Approx(std::tanh(pre)).epsilon(1e-14));

    Matrix grad(1, 1);
    grad(0, 0) = 0.7;
    TrainConfig cfg;
    cfg.lr = 0.1;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    cfg.fch_lr_multiplier = 1.0;
    phash::SgdState state = phash::SgdState::zeros_like(enc);
    phash::backward_and_step(enc, cache, grad, cfg, cfg.lr, state);

    double delta = 0.7 * (1.0 - std::tanh(pre) * std::tanh(pre));
    CHECK(enc.weights[0](0, 0) == doctest::Approx(0.8 - 0.1 * delta * 0.5).epsilon(1e-12));
    CHECK(enc.biases[0](0, 0) == doctest::Approx(-0.2 - 0.1 * delta).epsilon(1e-12));
}

TEST_CASE("hash-layer learning rate multiplier only scales the last layer") {
    EncoderSpec spec = small_spec();
    Encoder enc = phash::init_encoder(spec, 9);
    Encoder ref = enc;

    phash::ParamGrads grads;
    for (size_t l = 0; l < enc.layer_count(); ++l) {
        Matrix gw(enc.weights[l].rows(), enc.weights[l].cols());
        gw.fill(1.0);
        grads.weights.push_back(gw);
        Matrix gb(1, enc.biases[l].cols());
        gb.fill(1.0);
        grads.biases.push_back(gb);
    }
    TrainConfig cfg;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    cfg.lr = 0.01;
    cfg.fch_lr_multiplier = 10.0;
    phash::SgdState state = phash::SgdState::zeros_like(enc);
    phash::sgd_step(enc, grads, cfg, cfg.lr, state);

    CHECK(ref.weights[0](0, 0) - enc.weights[0](0, 0) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(ref.weights[1](0, 0) - enc.weights[1](0, 0) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("step schedule decays the learning rate") {
    TrainConfig cfg;
    cfg.lr = 0.4;
    cfg.lr_schedule = phash::LrSchedule::step;
    cfg.lr_step_factor = 0.5;
    cfg.lr_step_every = 10;
    CHECK(phash::lr_at_epoch(cfg, 0) == 0.4);
    CHECK(phash::lr_at_epoch(cfg, 9) == 0.4);
    CHECK(phash::lr_at_epoch(cfg, 10) == doctest::Approx(0.2));
    CHECK(phash::lr_at_epoch(cfg, 25) == doctest::Approx(0.1));
}

TEST_CASE("training with lr 0 leaves parameters unchanged") {
    phash::SynthParams params;
    params.clusters = 2;
    params.sizes = {12, 12};
    params.dim = 4;
    params.seed = 3;
    phash::LabeledDataset ds = phash::make_synthetic(params);
    phash::SimilarityGraph graph = build_graph(ds);

    EncoderSpec spec;
    spec.input_dim = 4;
    spec.hidden = {8};
    spec.code_bits = 8;
    TrainConfig tc;
    tc.lr = 0.0;
    tc.epochs = 3;
    tc.batch_size = 8;
    tc.seed = 21;
    tc.weight_decay = 0.0;
    phash::LossConfig lc;
    phash::TrainResult res = phash::train(ds, graph, spec, lc, tc);

    Encoder init = phash::init_encoder(spec, tc.seed);
    for (size_t l = 0; l < init.layer_count(); ++l) {
        for (size_t i = 0; i < init.weights[l].size(); ++i) {
            CHECK(res.encoder.weights[l].data()[i] == init.weights[l].data()[i]);
        }
    }
    CHECK(res.log.size() == 3);
}

TEST_CASE("training is deterministic and reduces the loss on easy data") {
    phash::SynthParams params;
    params.clusters = 3;
    params.sizes = {20, 20, 20};
    params.dim = 4;
    params.seed = 5;
    phash::LabeledDataset ds = phash::make_synthetic(params);
    phash::SimilarityGraph graph = build_graph(ds);

    EncoderSpec spec;
    spec.input_dim = 4;
    spec.hidden = {16};
    spec.code_bits = 8;
    TrainConfig tc;
    tc.epochs = 12;
    tc.batch_size = 16;
    tc.seed = 77;
    phash::LossConfig lc;

    phash::TrainResult a = phash::train(ds, graph, spec, lc, tc);
    phash::TrainResult b = phash::train(ds, graph, spec, lc, tc);
    REQUIRE(a.log.size() == b.log.size());
    for (size_t e = 0; e < a.log.size(); ++e) {
        CHECK(a.log[e].mean_ce == b.log[e].mean_ce);
        CHECK(a.log[e].mean_quant == b.log[e].mean_quant);
    }
    for (size_t l = 0; l < a.encoder.layer_count(); ++l) {
        for (size_t i = 0; i < a.encoder.weights[l].size(); ++i) {
            CHECK(a.encoder.weights[l].data()[i] == b.encoder.weights[l].data()[i]);
        }
    }
    CHECK(a.log.back().mean_ce < a.log.front().mean_ce);
}

TEST_CASE("quantization loss drives codes toward +-1") {
    phash::SynthParams params;
    params.clusters = 3;
    params.sizes = {20, 20, 20};
    params.dim = 4;
    params.seed = 9;
    phash::LabeledDataset ds = phash::make_synthetic(params);
    phash::SimilarityGraph graph = build_graph(ds);

    EncoderSpec spec;
    spec.input_dim = 4;
    spec.hidden = {16};
    spec.code_bits = 8;
    TrainConfig tc;
    tc.epochs = 15;
    tc.batch_size = 16;
    tc.seed = 13;

    phash::LossConfig with_q;
    with_q.inv_epsilon = 0.1;
    phash::LossConfig without_q;
    without_q.inv_epsilon = 0.0;
    without_q.quant_enabled = false;

    double err_with = phash::train(ds, graph, spec, with_q, tc).log.back().mean_quant_err;
    double err_without = phash::train(ds, graph, spec, without_q, tc).log.back().mean_quant_err;
    CHECK(err_with < err_without);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    EncoderSpec spec;
    spec.input_dim = 6;
    spec.hidden = {9, 5};
    spec.code_bits = 12;
    spec.activation = Activation::tanh;
    Encoder enc = phash::init_encoder(spec, 31337);

    auto path = temp_path("phash_model_test.phmd");
    phash::save_encoder(enc, path.string());
    Encoder back = phash::load_encoder(path.string());

    CHECK(back.spec.input_dim == spec.input_dim);
    CHECK(back.spec.hidden == spec.hidden);
    CHECK(back.spec.code_bits == spec.code_bits);
    CHECK(back.spec.activation == spec.activation);
    REQUIRE(back.layer_count() == enc.layer_count());
    for (size_t l = 0; l < enc.layer_count(); ++l) {
        for (size_t i = 0; i < enc.weights[l].size(); ++i) {
            CHECK(back.weights[l].data()[i] == enc.weights[l].data()[i]);
        }
        for (size_t i = 0; i < enc.biases[l].size(); ++i) {
            CHECK(back.biases[l].data()[i] == enc.biases[l].data()[i]);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("malformed checkpoints report the byte offset") {
    auto path = temp_path("phash_model_trunc.phmd");
    {
        EncoderSpec spec;
        spec.input_dim = 3;
        spec.code_bits = 4;
        phash::save_encoder(phash::init_encoder(spec, 1), path.string());
    }
    auto size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, size - 5);
    CHECK_THROWS_WITH_AS(phash::load_encoder(path.string()),
                         doctest::Contains("at byte"), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("train log CSV has the expected columns") {
    std::vector<phash::EpochLog> log = {{0, 1.5, 0.25, 0.6}, {1, 1.2, 0.2, 0.5}};
    std::ostringstream out;
    phash::write_train_log_csv(out, log);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,mean_ce,mean_quant,mean_quant_err");
}
