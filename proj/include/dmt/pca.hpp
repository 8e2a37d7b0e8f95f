#ifndef DMT_PCA_HPP
#define DMT_PCA_HPP

#include <cmath>
#include <vector>

#include "common.hpp"
#include "matrix.hpp"

namespace dmt {

/**
 * Top-2 principal directions by power iteration with deflation, plus the
 * centred projection. Used to flatten wide layer activations for plotting.
 */
struct PcaResult {
    std::vector<double> mean;
    std::vector<double> v1, v2;
    double lambda1 = 0.0, lambda2 = 0.0;
    Matrix projected;  // M x 2
};

namespace detail {

inline void normalize(std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
}

inline std::vector<double> power_iterate(const Matrix& cov, size_t start_coord,
                                         double* eigenvalue) {
    const size_t d = cov.rows;
    std::vector<double> v(d, 0.0);
    // Deterministic start: a coordinate axis nudged by a fixed ramp, so ties
    // between symmetric directions resolve the same way every run.
    v[start_coord % d] = 1.0;
    for (size_t j = 0; j < d; ++j) v[j] += 1e-3 * static_cast<double>(j + 1) / static_cast<double>(d);
    normalize(v);
    std::vector<double> next(d, 0.0);
    double lambda = 0.0;
    for (int iter = 0; iter < 10000; ++iter) {
        for (size_t i = 0; i < d; ++i) {
            double s = 0.0;
            const double* row = cov.row(i);
            for (size_t j = 0; j < d; ++j) s += row[j] * v[j];
            next[i] = s;
        }
        double n = 0.0;
        for (double x : next) n += x * x;
        n = std::sqrt(n);
        if (n < 1e-300) break;  // zero matrix: any direction works
        double dot = 0.0;
        for (size_t j = 0; j < d; ++j) dot += v[j] * next[j] / n;
        for (size_t j = 0; j < d; ++j) v[j] = next[j] / n;
        lambda = n;
        if (std::abs(std::abs(dot) - 1.0) < 1e-15) break;
    }
    *eigenvalue = lambda;
    return v;
}

}  // namespace detail

inline PcaResult pca_top2(const Matrix& x) {
    const size_t m = x.rows, d = x.cols;
    if (m < 2 || d < 1) throw UsageError("pca_top2: need at least 2 rows and 1 column");
    PcaResult res;
    res.mean.assign(d, 0.0);
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < d; ++j) res.mean[j] += x.at(i, j);
    }
    for (size_t j = 0; j < d; ++j) res.mean[j] /= static_cast<double>(m);

    Matrix centered(m, d);
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < d; ++j) centered.at(i, j) = x.at(i, j) - res.mean[j];
    }
    Matrix cov = matmul_atb(centered, centered);
    for (double& v : cov.data) v /= static_cast<double>(m - 1);

    res.v1 = detail::power_iterate(cov, 0, &res.lambda1);
    // Deflate and repeat for the second direction.
    for (size_t i = 0; i < d; ++i) {
        for (size_t j = 0; j < d; ++j) cov.at(i, j) -= res.lambda1 * res.v1[i] * res.v1[j];
    }
    res.v2 = detail::power_iterate(cov, 1, &res.lambda2);
    // Re-orthogonalize against v1 to clean up deflation round-off.
    double dot = 0.0;
    for (size_t j = 0; j < d; ++j) dot += res.v1[j] * res.v2[j];
    for (size_t j = 0; j < d; ++j) res.v2[j] -= dot * res.v1[j];
    detail::normalize(res.v2);

    res.projected = Matrix(m, 2);
    for (size_t i = 0; i < m; ++i) {
        double p1 = 0.0, p2 = 0.0;
        for (size_t j = 0; j < d; ++j) {
            p1 += centered.at(i, j) * res.v1[j];
            p2 += centered.at(i, j) * res.v2[j];
        }
        res.projected.at(i, 0) = p1;
        res.projected.at(i, 1) = p2;
    }
    return res;
}

}

#endif
