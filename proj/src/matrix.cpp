#include "phash/matrix.hpp"

namespace phash {

Matrix affine_forward(const Matrix& X, const Matrix& W, const Matrix& b) {
    if (X.cols() != W.cols() || b.cols() != W.rows()) {
        throw std::invalid_argument("affine_forward: shape mismatch");
    }
    Matrix Y(X.rows(), W.rows());
    for (size_t r = 0; r < X.rows(); ++r) {
        const double* x = X.row(r);
        double* y = Y.row(r);
        for (size_t o = 0; o < W.rows(); ++o) {
            const double* w = W.row(o);
            double acc = b(0, o);
            for (size_t c = 0; c < X.cols(); ++c) acc += x[c] * w[c];
            y[o] = acc;
        }
    }
    return Y;
}

Matrix matmul_tn(const Matrix& A, const Matrix& B) {
    if (A.rows() != B.rows()) throw std::invalid_argument("matmul_tn: shape mismatch");
    Matrix C(A.cols(), B.cols());
    for (size_t m = 0; m < A.rows(); ++m) {
        const double* a = A.row(m);
        const double* b = B.row(m);
        for (size_t i = 0; i < A.cols(); ++i) {
            double ai = a[i];
            if (ai == 0.0) continue;
            double* c = C.row(i);
            for (size_t j = 0; j < B.cols(); ++j) c[j] += ai * b[j];
        }
    }
    return C;
}

Matrix matmul_nn(const Matrix& A, const Matrix& B) {
    if (A.cols() != B.rows()) throw std::invalid_argument("matmul_nn: shape mismatch");
    Matrix C(A.rows(), B.cols());
    for (size_t i = 0; i < A.rows(); ++i) {
        const double* a = A.row(i);
        double* c = C.row(i);
        for (size_t k = 0; k < A.cols(); ++k) {
            double ak = a[k];
            if (ak == 0.0) continue;
            const double* b = B.row(k);
            for (size_t j = 0; j < B.cols(); ++j) c[j] += ak * b[j];
        }
    }
    return C;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> a) {
    return std::sqrt(dot(a, a));
}

}  // namespace phash
