#include <doctest.h>

#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "phash/loss.hpp"

using phash::AlphaMode;
using phash::CodeBatch;
using phash::LossConfig;
using phash::Matrix;
using phash::PairSpec;
using phash::WeightGradMode;

namespace {

struct Problem {
    Matrix z;
    std::vector<PairSpec> pairs;
    std::vector<uint32_t> points;
};

Problem random_problem(phash::Rng& rng) {
    Problem p;
    size_t b = 3 + rng.below(5);
    size_t k = 2 + rng.below(12);
    p.z = Matrix(b, k);
    for (size_t i = 0; i < p.z.size(); ++i) p.z.data()[i] = rng.uniform(-0.95, 0.95);
    for (uint32_t x = 0; x < b; ++x) {
        for (uint32_t y = x + 1; y < b; ++y) {
            p.pairs.push_back(
                {x, y, static_cast<int>(rng.below(2)), std::exp(rng.uniform(-0.5, 2.0))});
        }
    }
    p.points.resize(b);
    std::iota(p.points.begin(), p.points.end(), 0);
    return p;
}

LossConfig random_config(phash::Rng& rng, WeightGradMode mode) {
    LossConfig cfg;
    cfg.beta = rng.uniform(0.1, 0.9);
    double gammas[] = {0.0, 0.5, 1.0, 2.0, 3.0};
    cfg.gamma = gammas[rng.below(5)];
    double eps[] = {0.0, 0.1, 1.0};
    cfg.inv_epsilon = eps[rng.below(3)];
    cfg.quant_enabled = cfg.inv_epsilon > 0.0;
    AlphaMode modes[] = {AlphaMode::degree, AlphaMode::unit, AlphaMode::focal_pt};
    cfg.alpha_mode = modes[rng.below(3)];
    cfg.weight_grad_mode = mode;
    return cfg;
}

}  // namespace

TEST_CASE("detached-mode gradient matches finite differences of the frozen loss") {
    phash::Rng rng(101);
    for (int trial = 0; trial < 15; ++trial) {
        Problem p = random_problem(rng);
        LossConfig cfg = random_config(rng, WeightGradMode::detached);

        CodeBatch batch(p.z);
        auto res = phash::objective_and_gradient(batch, p.pairs, p.points, cfg);
        CHECK(res.total == doctest::Approx(oracle::full_loss(p.z, p.pairs, p.points, cfg))
                               .epsilon(1e-10));

        oracle::FrozenWeights fw = oracle::freeze_weights(p.z, p.pairs, p.points, cfg);
        Matrix fd = oracle::fd_gradient(p.z, [&](const Matrix& z) {
            return oracle::frozen_loss(z, p.pairs, p.points, cfg, fw);
        });
        CHECK(oracle::max_rel_err(batch.grad, fd) < 1e-5);
    }
}

TEST_CASE("full-mode gradient matches finite differences of the full loss") {
    phash::Rng rng(103);
    for (int trial = 0; trial < 15; ++trial) {
        Problem p = random_problem(rng);
        LossConfig cfg = random_config(rng, WeightGradMode::full);

        CodeBatch batch(p.z);
        phash::objective_and_gradient(batch, p.pairs, p.points, cfg);

        Matrix fd = oracle::fd_gradient(p.z, [&](const Matrix& z) {
            return oracle::full_loss(z, p.pairs, p.points, cfg);
        });
        CHECK(oracle::max_rel_err(batch.grad, fd) < 1e-5);
    }
}

TEST_CASE("scales multiply the objective and its gradient linearly") {
    phash::Rng rng(107);
    Problem p = random_problem(rng);
    LossConfig cfg = random_config(rng, WeightGradMode::full);
    cfg.inv_epsilon = 0.5;
    cfg.quant_enabled = true;

    CodeBatch base(p.z);
    auto r1 = phash::objective_and_gradient(base, p.pairs, p.points, cfg);

    double ps = 1.0 / static_cast<double>(p.pairs.size());
    double qs = 1.0 / static_cast<double>(p.points.size());
    CodeBatch scaled(p.z);
    auto r2 = phash::objective_and_gradient(scaled, p.pairs, p.points, cfg, ps, qs);

    CHECK(r2.ce == doctest::Approx(r1.ce * ps).epsilon(1e-12));
    CHECK(r2.quant == doctest::Approx(r1.quant * qs).epsilon(1e-12));

    Matrix fd = oracle::fd_gradient(p.z, [&](const Matrix& z) {
        return oracle::full_loss(z, p.pairs, p.points, cfg, ps, qs);
    });
    CHECK(oracle::max_rel_err(scaled.grad, fd) < 1e-5);
}

TEST_CASE("zero-weight batch yields zero objective and gradient") {
    // binary codes: every pair has q = 1 (or 0 loss) and quantization error 0
    Matrix z(3, 4);
    double rows[3][4] = {{1, -1, 1, -1}, {1, -1, 1, -1}, {-1, 1, -1, 1}};
    for (size_t r = 0; r < 3; ++r) {
        for (size_t c = 0; c < 4; ++c) z(r, c) = rows[r][c];
    }
    std::vector<PairSpec> pairs = {{0, 1, 1, 2.0}, {0, 2, 0, 2.0}, {1, 2, 0, 2.0}};
    std::vector<uint32_t> points = {0, 1, 2};
    for (WeightGradMode mode : {WeightGradMode::detached, WeightGradMode::full}) {
        LossConfig cfg;
        cfg.gamma = 2.0;
        cfg.weight_grad_mode = mode;
        CodeBatch batch(z);
        auto res = phash::objective_and_gradient(batch, pairs, points, cfg);
        CHECK(res.total == 0.0);
        for (size_t i = 0; i < batch.grad.size(); ++i) CHECK(batch.grad.data()[i] == 0.0);
    }
}

TEST_CASE("gradient buffer is overwritten, not accumulated") {
    phash::Rng rng(109);
    Problem p = random_problem(rng);
    LossConfig cfg;
    CodeBatch batch(p.z);
    phash::objective_and_gradient(batch, p.pairs, p.points, cfg);
    Matrix first = batch.grad;
    phash::objective_and_gradient(batch, p.pairs, p.points, cfg);
    for (size_t i = 0; i < first.size(); ++i) {
        CHECK(batch.grad.data()[i] == first.data()[i]);
    }
}
