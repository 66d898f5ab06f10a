#include "phash/loss.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "phash/log.hpp"

namespace phash {

namespace {

constexpr double kNormGuard = 1e-12;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// log(1 + e^x) without overflow
double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// d[(1-m)^gamma]/dm with the boundary conventions used throughout: zero at
// m = 1 except for gamma = 1, where the factor is linear.
double dmod_dm(double one_minus_m, double gamma) {
    if (gamma == 0.0) return 0.0;
    if (one_minus_m <= 0.0) return gamma == 1.0 ? -1.0 : 0.0;
    return -gamma * std::pow(one_minus_m, gamma - 1.0);
}

struct PairEval {
    double inner;
    double cosine;
    double sig;          // sigma(beta * inner)
    double p;            // likelihood of the observed label
    double neg_log_p;
    double q;            // cosine difficulty
    double one_minus_m;  // 1 - q, or 1 - p in focal_pt mode (computed stably)
    double mod;          // (1 - m)^gamma
    double alpha_eff;
    double w;
    double loss;
    bool cos_defined;    // false when the zero-guard fired
    double ni, nj;
};

PairEval eval_pair(std::span<const double> zi, std::span<const double> zj, int s, double alpha,
                   const LossConfig& cfg) {
    PairEval ev{};
    ev.inner = dot(zi, zj);
    ev.ni = norm2(zi);
    ev.nj = norm2(zj);

    double bx = cfg.beta * ev.inner;
    ev.sig = sigmoid(bx);
    ev.p = s == 1 ? ev.sig : sigmoid(-bx);
    ev.neg_log_p = s == 1 ? softplus(-bx) : softplus(bx);

    if (ev.ni < kNormGuard && ev.nj < kNormGuard) {
        log::debug("pair difficulty: both codes below zero-guard norm, using q = 0.5");
        ev.cosine = 0.0;
        ev.cos_defined = false;
    } else {
        double denom = std::max(ev.ni * ev.nj, kNormGuard * kNormGuard);
        ev.cosine = std::clamp(ev.inner / denom, -1.0, 1.0);
        ev.cos_defined = true;
    }
    ev.q = s == 1 ? 0.5 * (1.0 + ev.cosine) : 0.5 * (1.0 - ev.cosine);

    if (cfg.alpha_mode == AlphaMode::focal_pt) {
        ev.one_minus_m = s == 1 ? sigmoid(-bx) : ev.sig;
    } else {
        ev.one_minus_m = s == 1 ? 0.5 * (1.0 - ev.cosine) : 0.5 * (1.0 + ev.cosine);
    }
    ev.one_minus_m = std::max(ev.one_minus_m, 0.0);

    ev.alpha_eff = cfg.alpha_mode == AlphaMode::unit ? 1.0 : alpha;
    ev.mod = std::pow(ev.one_minus_m, cfg.gamma);
    ev.w = ev.alpha_eff * ev.mod;
    ev.loss = ev.w * ev.neg_log_p;
    return ev;
}

struct PointEval {
    double abs_sum;   // sum_k |h_k|
    double norm;      // ||h||_2
    double cosine;    // cos(|h|, 1)
    double q;
    double one_minus_q;
    double mod;
    double l1_err;    // sum_k ||h_k| - 1|
    double loss;
    bool cos_defined;
};

PointEval eval_point(std::span<const double> h, const LossConfig& cfg) {
    PointEval ev{};
    size_t k = h.size();
    double norm_sq = 0.0;
    for (double v : h) {
        ev.abs_sum += std::abs(v);
        norm_sq += v * v;
        ev.l1_err += std::abs(std::abs(v) - 1.0);
    }
    ev.norm = std::sqrt(norm_sq);
    if (ev.norm < kNormGuard) {
        log::debug("quantization difficulty: zero code, using q = 0.5");
        ev.cosine = 0.0;
        ev.cos_defined = false;
    } else {
        // single square root keeps cos exactly 1 for balanced magnitudes
        ev.cosine = std::clamp(ev.abs_sum / std::sqrt(norm_sq * static_cast<double>(k)),
                               -1.0, 1.0);
        ev.cos_defined = true;
    }
    ev.q = 0.5 * (1.0 + ev.cosine);
    ev.one_minus_q = std::max(0.5 * (1.0 - ev.cosine), 0.0);
    ev.mod = std::pow(ev.one_minus_q, cfg.gamma);
    ev.loss = ev.mod * cfg.inv_epsilon * ev.l1_err;
    return ev;
}

void check_codes_finite(const CodeBatch& batch) {
    for (size_t i = 0; i < batch.z.size(); ++i) {
        if (!std::isfinite(batch.z.data()[i])) throw std::runtime_error("non-finite code");
    }
}

void check_pair_indices(const CodeBatch& batch, std::span<const PairSpec> pairs) {
    for (const PairSpec& pr : pairs) {
        if (pr.a >= batch.rows() || pr.b >= batch.rows()) {
            throw std::out_of_range("pair index out of range");
        }
    }
}

}  // namespace

void LossConfig::validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("loss config: beta must be > 0");
    if (!(gamma >= 0.0)) throw std::invalid_argument("loss config: gamma must be >= 0");
    if (!(inv_epsilon >= 0.0)) {
        throw std::invalid_argument("loss config: inv_epsilon must be >= 0");
    }
    if (beta >= 1.0) {
        log::warn("beta = %g saturates the sigmoid; values below 1 train better", beta);
    }
}

double adaptive_sigmoid(double x, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("adaptive_sigmoid: beta must be > 0");
    return sigmoid(beta * x);
}

double pair_probability(std::span<const double> hi, std::span<const double> hj, int s,
                        double beta) {
    if (hi.size() != hj.size()) throw std::invalid_argument("pair_probability: length mismatch");
    if (!(beta > 0.0)) throw std::invalid_argument("pair_probability: beta must be > 0");
    double bx = beta * dot(hi, hj);
    return s == 1 ? sigmoid(bx) : sigmoid(-bx);
}

double pair_difficulty(std::span<const double> hi, std::span<const double> hj, int s) {
    if (hi.size() != hj.size()) throw std::invalid_argument("pair_difficulty: length mismatch");
    double ni = norm2(hi);
    double nj = norm2(hj);
    if (ni < kNormGuard && nj < kNormGuard) {
        log::debug("pair difficulty: both codes below zero-guard norm, using q = 0.5");
        return 0.5;
    }
    double c = std::clamp(dot(hi, hj) / std::max(ni * nj, kNormGuard * kNormGuard), -1.0, 1.0);
    return s == 1 ? 0.5 * (1.0 + c) : 0.5 * (1.0 - c);
}

double pair_weight(double alpha, double q, double gamma) {
    return alpha * std::pow(std::max(1.0 - q, 0.0), gamma);
}

double point_quantization_difficulty(std::span<const double> h) {
    LossConfig cfg;  // gamma unused here
    PointEval ev = eval_point(h, cfg);
    return ev.q;
}

double quantization_log_prior(std::span<const double> h, double inv_epsilon) {
    double l1 = 0.0;
    for (double v : h) l1 += std::abs(std::abs(v) - 1.0);
    return -inv_epsilon * l1;
}

CeLossResult priority_ce_loss(const CodeBatch& batch, std::span<const PairSpec> pairs,
                              const LossConfig& config) {
    config.validate();
    check_codes_finite(batch);
    check_pair_indices(batch, pairs);

    CeLossResult res;
    res.terms.reserve(pairs.size());
    for (const PairSpec& pr : pairs) {
        PairEval ev = eval_pair(batch.z.row_span(pr.a), batch.z.row_span(pr.b), pr.s, pr.alpha,
                                config);
        if (!std::isfinite(ev.loss)) {
            throw std::runtime_error("non-finite term for pair (" + std::to_string(pr.a) + "," +
                                     std::to_string(pr.b) + ")");
        }
        res.loss += ev.loss;
        res.terms.push_back({pr.a, pr.b, pr.s, ev.inner, ev.cosine, ev.p, ev.q, ev.alpha_eff,
                             ev.w, ev.loss});
    }
    return res;
}

QuantLossResult priority_quant_loss(const CodeBatch& batch, std::span<const uint32_t> points,
                                    const LossConfig& config) {
    config.validate();
    check_codes_finite(batch);

    QuantLossResult res;
    res.terms.reserve(points.size());
    for (uint32_t idx : points) {
        if (idx >= batch.rows()) throw std::out_of_range("point index out of range");
        PointEval ev = eval_point(batch.z.row_span(idx), config);
        if (!std::isfinite(ev.loss)) {
            throw std::runtime_error("non-finite term for point " + std::to_string(idx));
        }
        res.loss += ev.loss;
        res.terms.push_back({idx, ev.q, ev.l1_err, ev.loss});
    }
    return res;
}

ObjectiveResult objective_and_gradient(CodeBatch& batch, std::span<const PairSpec> pairs,
                                       std::span<const uint32_t> points,
                                       const LossConfig& config, double pair_scale,
                                       double point_scale) {
    config.validate();
    check_codes_finite(batch);
    check_pair_indices(batch, pairs);
    if (!batch.grad.same_shape(batch.z)) batch.grad = Matrix(batch.rows(), batch.bits());
    batch.grad.fill(0.0);

    const bool full = config.weight_grad_mode == WeightGradMode::full;
    const size_t K = batch.bits();

    ObjectiveResult res;
    for (const PairSpec& pr : pairs) {
        std::span<const double> zi = batch.z.row_span(pr.a);
        std::span<const double> zj = batch.z.row_span(pr.b);
        PairEval ev = eval_pair(zi, zj, pr.s, pr.alpha, config);
        if (!std::isfinite(ev.loss)) {
            throw std::runtime_error("non-finite term for pair (" + std::to_string(pr.a) + "," +
                                     std::to_string(pr.b) + ")");
        }
        res.ce += ev.loss;

        // d(-log p)/d<zi,zj>
        double dce_du = config.beta * (ev.sig - pr.s);
        double coeff = pair_scale * ev.w * dce_du;

        double* gi = batch.grad.row(pr.a);
        double* gj = batch.grad.row(pr.b);
        for (size_t k = 0; k < K; ++k) {
            gi[k] += coeff * zj[k];
            gj[k] += coeff * zi[k];
        }

        if (full && config.gamma > 0.0) {
            double dmod = dmod_dm(ev.one_minus_m, config.gamma);
            if (dmod != 0.0) {
                double base = pair_scale * ev.alpha_eff * dmod * ev.neg_log_p;
                if (config.alpha_mode == AlphaMode::focal_pt) {
                    // m = p, dp/du = (2s-1) beta sig (1-sig)
                    double dp_du = (2.0 * pr.s - 1.0) * config.beta * ev.sig * (1.0 - ev.sig);
                    double c2 = base * dp_du;
                    for (size_t k = 0; k < K; ++k) {
                        gi[k] += c2 * zj[k];
                        gj[k] += c2 * zi[k];
                    }
                } else if (ev.cos_defined) {
                    // m = q, dq/dcos = +-1/2
                    double dq_dc = pr.s == 1 ? 0.5 : -0.5;
                    double c2 = base * dq_dc;
                    double inv_ninj = 1.0 / std::max(ev.ni * ev.nj, kNormGuard * kNormGuard);
                    double ri = ev.inner / std::max(ev.ni * ev.ni, kNormGuard * kNormGuard);
                    double rj = ev.inner / std::max(ev.nj * ev.nj, kNormGuard * kNormGuard);
                    for (size_t k = 0; k < K; ++k) {
                        gi[k] += c2 * inv_ninj * (zj[k] - ri * zi[k]);
                        gj[k] += c2 * inv_ninj * (zi[k] - rj * zj[k]);
                    }
                }
            }
        }
    }

    if (config.quant_enabled && config.inv_epsilon > 0.0) {
        double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(K));
        for (uint32_t idx : points) {
            if (idx >= batch.rows()) throw std::out_of_range("point index out of range");
            std::span<const double> h = batch.z.row_span(idx);
            PointEval ev = eval_point(h, config);
            if (!std::isfinite(ev.loss)) {
                throw std::runtime_error("non-finite term for point " + std::to_string(idx));
            }
            res.quant += ev.loss;

            double* g = batch.grad.row(idx);
            double ce = config.inv_epsilon * ev.l1_err;
            double dmod = full ? dmod_dm(ev.one_minus_q, config.gamma) : 0.0;
            for (size_t k = 0; k < K; ++k) {
                double sgn_h = h[k] > 0.0 ? 1.0 : (h[k] < 0.0 ? -1.0 : 0.0);
                double sgn_e = std::abs(h[k]) > 1.0 ? 1.0 : (std::abs(h[k]) < 1.0 ? -1.0 : 0.0);
                double de_dh = sgn_h * sgn_e;  // d l1_err / dh_k, 0 at the kinks
                double gk = ev.mod * config.inv_epsilon * de_dh;
                if (dmod != 0.0 && ev.cos_defined) {
                    // chain through q = (1 + cos(|h|, 1)) / 2
                    double dc_dh = inv_sqrt_k * (sgn_h / ev.norm -
                                                 ev.abs_sum * h[k] / (ev.norm * ev.norm * ev.norm));
                    gk += dmod * 0.5 * dc_dh * ce;
                }
                g[k] += point_scale * gk;
            }
        }
    }

    res.ce *= pair_scale;
    res.quant *= point_scale;
    res.total = res.ce + res.quant;
    return res;
}

void write_pair_terms_csv(std::ostream& out, std::span<const PairTerms> terms) {
    out << "pair_i,pair_j,s,inner,p,q,alpha,w,loss\n";
    char buf[256];
    for (const PairTerms& t : terms) {
        std::snprintf(buf, sizeof(buf), "%u,%u,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t.i,
                      t.j, t.s, t.inner, t.p, t.q, t.alpha, t.w, t.loss);
        out << buf;
    }
}

}  // namespace phash
