#ifndef DMT_MATRIX_HPP
#define DMT_MATRIX_HPP

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

#include "common.hpp"

namespace dmt {

/**
 * @brief Dense row-major matrix of 64-bit floats.
 *
 * The whole library works in double precision; the divergence losses take
 * logs of quantities close to 0 and 1 and single precision falls apart near
 * the clamp boundaries.
 */
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;  // length rows * cols

    Matrix() = default;
    Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(size_t i, size_t j) { return data[i * cols + j]; }
    double at(size_t i, size_t j) const { return data[i * cols + j]; }

    double* row(size_t i) { return data.data() + i * cols; }
    const double* row(size_t i) const { return data.data() + i * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double x : data) {
            if (!std::isfinite(x)) return false;
        }
        return true;
    }
};

/**
 * Squared Euclidean distances between all row pairs of `a`.
 *
 * The result is exactly symmetric (each pair is computed once and mirrored)
 * with a zero diagonal. Squared distances are the primitive throughout the
 * library; square roots are taken only where a formula consumes a raw
 * distance.
 */
inline Matrix pairwise_sq_distances(const Matrix& a) {
    const size_t m = a.rows, n = a.cols;
    Matrix d(m, m, 0.0);
#ifdef _OPENMP
    #pragma omp parallel for schedule(static)
#endif
    for (size_t i = 0; i < m; ++i) {
        const double* xi = a.row(i);
        for (size_t j = i + 1; j < m; ++j) {
            const double* xj = a.row(j);
            double s = 0.0;
            for (size_t t = 0; t < n; ++t) {
                const double diff = xi[t] - xj[t];
                s += diff * diff;
            }
            d.at(i, j) = s;
            d.at(j, i) = s;
        }
    }
    return d;
}

/// c = a * b
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    assert(a.cols == b.rows);
    Matrix c(a.rows, b.cols, 0.0);
    const size_t m = a.rows, k = a.cols, n = b.cols;
#ifdef _OPENMP
    #pragma omp parallel for schedule(static)
#endif
    for (size_t i = 0; i < m; ++i) {
        double* ci = c.row(i);
        const double* ai = a.row(i);
        for (size_t t = 0; t < k; ++t) {
            const double av = ai[t];
            const double* bt = b.row(t);
            for (size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
        }
    }
    return c;
}

/// c = a * b^T
inline Matrix matmul_abt(const Matrix& a, const Matrix& b) {
    assert(a.cols == b.cols);
    Matrix c(a.rows, b.rows, 0.0);
    const size_t m = a.rows, k = a.cols, n = b.rows;
#ifdef _OPENMP
    #pragma omp parallel for schedule(static)
#endif
    for (size_t i = 0; i < m; ++i) {
        double* ci = c.row(i);
        const double* ai = a.row(i);
        for (size_t j = 0; j < n; ++j) {
            const double* bj = b.row(j);
            double s = 0.0;
            for (size_t t = 0; t < k; ++t) s += ai[t] * bj[t];
            ci[j] = s;
        }
    }
    return c;
}

/// c = a^T * b; accumulation runs over rows of `a` in index order per output
/// row, so the result does not depend on the thread count.
inline Matrix matmul_atb(const Matrix& a, const Matrix& b) {
    assert(a.rows == b.rows);
    Matrix c(a.cols, b.cols, 0.0);
    const size_t m = a.rows, k = a.cols, n = b.cols;
#ifdef _OPENMP
    #pragma omp parallel for schedule(static)
#endif
    for (size_t t = 0; t < k; ++t) {
        double* ct = c.row(t);
        for (size_t i = 0; i < m; ++i) {
            const double av = a.at(i, t);
            const double* bi = b.row(i);
            for (size_t j = 0; j < n; ++j) ct[j] += av * bi[j];
        }
    }
    return c;
}

inline std::vector<double> column_sums(const Matrix& a) {
    std::vector<double> s(a.cols, 0.0);
    for (size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        for (size_t j = 0; j < a.cols; ++j) s[j] += ai[j];
    }
    return s;
}

/// Gathers a subset of rows into a new matrix.
inline Matrix gather_rows(const Matrix& a, const std::vector<size_t>& idx) {
    Matrix out(idx.size(), a.cols);
    for (size_t i = 0; i < idx.size(); ++i) {
        const double* src = a.row(idx[i]);
        double* dst = out.row(i);
        for (size_t j = 0; j < a.cols; ++j) dst[j] = src[j];
    }
    return out;
}

}

#endif
