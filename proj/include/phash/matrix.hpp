#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace phash {

// Dense row-major matrix of doubles. Just enough linear algebra for the
// encoder and the loss math; callers keep shapes straight.
class Matrix {
 public:
    Matrix() = default;
    Matrix(size_t rows, size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    static Matrix zeros(size_t rows, size_t cols) { return Matrix(rows, cols); }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }

    double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
    double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

    double* row(size_t r) { return data_.data() + r * cols_; }
    const double* row(size_t r) const { return data_.data() + r * cols_; }
    std::span<const double> row_span(size_t r) const { return {row(r), cols_}; }
    std::span<double> row_span(size_t r) { return {row(r), cols_}; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<double> data_;
};

// Y = X * W^T + b, with X (B x in), W (out x in), b (1 x out).
Matrix affine_forward(const Matrix& X, const Matrix& W, const Matrix& b);

// A^T * B for A (m x k), B (m x n) -> k x n.
Matrix matmul_tn(const Matrix& A, const Matrix& B);

// A * B for A (m x k), B (k x n) -> m x n.
Matrix matmul_nn(const Matrix& A, const Matrix& B);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// Deterministic random source. The standard distributions are
// implementation-defined, so draws are derived from the raw mt19937_64
// stream to keep seeds reproducible across toolchains.
class Rng {
 public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next() { return gen_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal, Box-Muller
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * M_PI * u2);
    }

    // uniform integer in [0, bound)
    uint64_t below(uint64_t bound) { return gen_() % bound; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

 private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace phash
