#ifndef DMT_GRAPH_HPP
#define DMT_GRAPH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "matrix.hpp"
#include "special.hpp"

namespace dmt {

/// Clamp band for similarities; keeps the divergence logs finite even for
/// duplicate points whose raw similarity reaches the kernel maximum.
constexpr double kSimilarityClamp = 1e-6;

/// Bisection domain and budget for the perplexity solve. 64 halvings of a
/// 16-decade bracket in log space reach relative width below 1e-15.
constexpr double kSigmaMin = 1e-10;
constexpr double kSigmaMax = 1e6;
constexpr int kSigmaMaxIters = 64;
constexpr double kSigmaTolerance = 1e-5;

/**
 * @brief Exact k-nearest-neighbour structure plus per-point calibration.
 *
 * `rho[i]` is the distance to the nearest neighbour; `sigma[i]` the solved
 * kernel scale. Ties in the neighbour ordering break toward the smaller
 * index so that duplicated points get deterministic neighbourhoods.
 */
struct NeighborGraph {
    std::vector<std::vector<size_t>> knn_indices;   // M x k, ascending distance
    std::vector<std::vector<double>> knn_sq_dists;  // matching squared distances
    std::vector<double> rho;                        // nearest-neighbour raw distance
    std::vector<double> sigma;                      // solved scale per point
    std::vector<char> sigma_converged;
    double q = 0.0;         // perplexity target used for sigma
    double nu_input = 0.0;  // kernel shape used in the input space

    size_t size() const { return knn_indices.size(); }
    size_t k() const { return knn_indices.empty() ? 0 : knn_indices[0].size(); }
};

/// Symmetric fuzzy similarity matrix with zero diagonal, entries clamped to
/// [1e-6, 1 - 1e-6].
struct SimilaritySet {
    Matrix u;

    size_t size() const { return u.rows; }
    double operator()(size_t i, size_t j) const { return u.at(i, j); }
};

/// Exact brute-force k-NN under Euclidean distance, ties by smaller index.
inline NeighborGraph build_knn(const Matrix& x, size_t k) {
    const size_t m = x.rows;
    if (k < 1 || k > m - 1) throw UsageError("build_knn: k out of range");
    const Matrix d2 = pairwise_sq_distances(x);
    NeighborGraph g;
    g.knn_indices.assign(m, {});
    g.knn_sq_dists.assign(m, {});
    g.rho.assign(m, 0.0);
#ifdef _OPENMP
    #pragma omp parallel for schedule(static)
#endif
    for (size_t i = 0; i < m; ++i) {
        std::vector<size_t> order;
        order.reserve(m - 1);
        for (size_t j = 0; j < m; ++j) {
            if (j != i) order.push_back(j);
        }
        const double* row = d2.row(i);
        std::partial_sort(order.begin(), order.begin() + k, order.end(),
                          [&](size_t a, size_t b) {
                              return row[a] < row[b] || (row[a] == row[b] && a < b);
                          });
        order.resize(k);
        g.knn_indices[i] = order;
        auto& dist = g.knn_sq_dists[i];
        dist.resize(k);
        for (size_t t = 0; t < k; ++t) dist[t] = row[order[t]];
        g.rho[i] = std::sqrt(dist[0]);
    }
    return g;
}

/**
 * Kernel normalizer 2*pi*(Gamma((nu+1)/2) / (sqrt(nu*pi)*Gamma(nu/2)))^2,
 * evaluated in log space. Approaches 1 as nu grows.
 */
inline double log_c_nu(double nu) {
    if (!(nu > 0.0)) throw NumericError("c_nu: nu must be positive");
    return std::log(2.0 * M_PI) +
           2.0 * (log_gamma((nu + 1.0) / 2.0) - 0.5 * std::log(nu * M_PI) - log_gamma(nu / 2.0));
}

inline double c_nu(double nu) {
    return std::exp(log_c_nu(nu));
}

/**
 * Normalized squared-t similarity kernel
 *   g(d^2 | sigma, nu) = C_nu * (1 + d^2 / (sigma*nu))^-(nu+1),
 * computed as exp(log C_nu - (nu+1) * log1p(d^2/(sigma*nu))).
 */
inline double kernel(double d_sq, double sigma, double nu) {
    return std::exp(log_c_nu(nu) - (nu + 1.0) * std::log1p(d_sq / (sigma * nu)));
}

/// Local calibration: subtract the nearest-neighbour distance in raw space,
/// clamp at zero, and return the squared result for the kernel.
inline double calibrate_sq(double raw_sq_dist, double rho) {
    const double d = std::sqrt(raw_sq_dist) - rho;
    return d > 0.0 ? d * d : 0.0;
}

inline std::vector<double> calibrate_row(const std::vector<double>& sq_dists, double rho) {
    std::vector<double> out(sq_dists.size());
    for (size_t t = 0; t < sq_dists.size(); ++t) out[t] = calibrate_sq(sq_dists[t], rho);
    return out;
}

struct SigmaResult {
    double sigma = kSigmaMin;
    bool converged = false;
    double residual = 0.0;      // sum u - log2(Q) at the returned sigma
    uint64_t kernel_evals = 0;  // instrumentation for the complexity budget
};

/**
 * Solves sum_j g(d_j^2 | sigma, nu) = log2(Q) for sigma by bisection on
 * [1e-10, 1e6] in log space, at most 64 iterations or until the residual
 * drops below 1e-5. The sum is strictly increasing in sigma for positive
 * distances. When the target is unreachable (duplicates, bound hit) the
 * nearest bound is returned with converged = false.
 */
inline SigmaResult solve_sigma(const std::vector<double>& cal_sq_dists, double q, double nu) {
    if (cal_sq_dists.empty()) throw UsageError("solve_sigma: empty distance vector");
    if (!(q > 1.0)) throw UsageError("solve_sigma: Q must exceed 1");
    const double target = std::log2(q);
    const double log_c = log_c_nu(nu);
    const double c = std::exp(log_c);
    const double exponent = nu + 1.0;
    // Terms with (1 + t)^-(nu+1) < 1e-14 cannot move the residual at its
    // 1e-5 tolerance even summed over every point; the sorted copy lets the
    // accumulation stop at the cutoff.
    const double t_cutoff = std::expm1(14.0 * std::log(10.0) / exponent);

    std::vector<double> sorted(cal_sq_dists);
    std::sort(sorted.begin(), sorted.end());

    SigmaResult res;
    auto sum_at = [&](double sigma) {
        double s = 0.0;
        const double inv = 1.0 / (sigma * nu);
        uint64_t evals = 0;
        for (double d : sorted) {
            const double t = d * inv;
            if (t > t_cutoff) break;
            s += std::exp(-exponent * std::log1p(t));
            ++evals;
        }
        res.kernel_evals += evals;
        return c * s;
    };

    double lo = kSigmaMin, hi = kSigmaMax;
    const double sum_hi = sum_at(hi);
    if (sum_hi < target) {
        res.sigma = hi;
        res.converged = false;
        res.residual = sum_hi - target;
        return res;
    }
    const double sum_lo = sum_at(lo);
    if (sum_lo > target) {
        res.sigma = lo;
        res.converged = false;
        res.residual = sum_lo - target;
        return res;
    }

    double mid = std::sqrt(lo * hi);
    double sum_mid = 0.0;
    for (int iter = 0; iter < kSigmaMaxIters; ++iter) {
        mid = std::sqrt(lo * hi);
        sum_mid = sum_at(mid);
        if (std::abs(sum_mid - target) <= kSigmaTolerance) {
            res.sigma = mid;
            res.converged = true;
            res.residual = sum_mid - target;
            return res;
        }
        if (sum_mid < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    res.sigma = mid;
    res.converged = std::abs(sum_mid - target) <= kSigmaTolerance;
    res.residual = sum_mid - target;
    return res;
}

/**
 * Probabilistic-OR symmetrization u_ij = u_j|i + u_i|j - u_j|i * u_i|j,
 * clamped to [1e-6, 1 - 1e-6] with a zero diagonal.
 */
inline SimilaritySet symmetrize(const Matrix& u_cond) {
    if (u_cond.rows != u_cond.cols) throw UsageError("symmetrize: matrix must be square");
    const size_t m = u_cond.rows;
    SimilaritySet s;
    s.u = Matrix(m, m, 0.0);
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = i + 1; j < m; ++j) {
            const double a = u_cond.at(i, j);
            const double b = u_cond.at(j, i);
            double v = a + b - a * b;
            v = std::min(1.0 - kSimilarityClamp, std::max(kSimilarityClamp, v));
            s.u.at(i, j) = v;
            s.u.at(j, i) = v;
        }
    }
    return s;
}

/// Summation-set rule for the input-space sigma solve: every other point at
/// desk scale, the k-NN set beyond it (far pairs stop mattering and the
/// neighbour list is what the complexity budget assumes).
constexpr size_t kSigmaAllPairsLimit = 5000;

inline size_t auto_knn_k(size_t m, double q) {
    const size_t k = std::max<size_t>(15, static_cast<size_t>(3.0 * q));
    return std::min(m - 1, k);
}

/**
 * @brief Precomputed input-space similarities with batch restriction.
 *
 * Built once per training run: k-NN graph, per-point calibration, sigma
 * solve, kernel, OR-symmetrization. `restrict_to` returns the similarity
 * set for a batch; restriction commutes with symmetrization because the
 * symmetrization is per-pair.
 */
struct InputSimilarities {
    NeighborGraph graph;
    SimilaritySet full;       // M x M symmetrized, clamped
    uint64_t kernel_evals = 0;

    SimilaritySet restrict_to(const std::vector<size_t>& batch) const {
        SimilaritySet s;
        s.u = Matrix(batch.size(), batch.size(), 0.0);
        for (size_t a = 0; a < batch.size(); ++a) {
            for (size_t b = 0; b < batch.size(); ++b) {
                if (a != b) s.u.at(a, b) = full.u.at(batch[a], batch[b]);
            }
        }
        return s;
    }
};

struct InputSimilarityConfig {
    double q = 40.0;
    double nu_input = 100.0;
    size_t knn_k = 0;  // 0 = auto: min(M-1, max(15, 3Q))
};

inline InputSimilarities input_similarities(const Dataset& ds, const InputSimilarityConfig& cfg) {
    const size_t m = ds.size();
    if (m < 2) throw UsageError("input_similarities: need at least 2 points");
    const size_t k = cfg.knn_k > 0 ? std::min(cfg.knn_k, m - 1) : auto_knn_k(m, cfg.q);

    InputSimilarities sim;
    sim.graph = build_knn(ds.features, k);
    sim.graph.q = cfg.q;
    sim.graph.nu_input = cfg.nu_input;
    sim.graph.sigma.assign(m, kSigmaMin);
    sim.graph.sigma_converged.assign(m, 0);

    const Matrix d2 = pairwise_sq_distances(ds.features);
    const bool all_pairs = m <= kSigmaAllPairsLimit;

    std::vector<uint64_t> evals(m, 0);
#ifdef _OPENMP
    #pragma omp parallel for schedule(static)
#endif
    for (size_t i = 0; i < m; ++i) {
        std::vector<double> cal;
        if (all_pairs) {
            cal.reserve(m - 1);
            const double* row = d2.row(i);
            for (size_t j = 0; j < m; ++j) {
                if (j != i) cal.push_back(calibrate_sq(row[j], sim.graph.rho[i]));
            }
        } else {
            cal = calibrate_row(sim.graph.knn_sq_dists[i], sim.graph.rho[i]);
        }
        const SigmaResult r = solve_sigma(cal, cfg.q, cfg.nu_input);
        sim.graph.sigma[i] = r.sigma;
        sim.graph.sigma_converged[i] = r.converged ? 1 : 0;
        evals[i] = r.kernel_evals;
    }
    for (uint64_t e : evals) sim.kernel_evals += e;

    // Conditional similarities at the solved scales, then OR-symmetrize.
    Matrix u_cond(m, m, 0.0);
    const double log_c = log_c_nu(cfg.nu_input);
    const double exponent = cfg.nu_input + 1.0;
#ifdef _OPENMP
    #pragma omp parallel for schedule(static)
#endif
    for (size_t i = 0; i < m; ++i) {
        const double* row = d2.row(i);
        const double inv = 1.0 / (sim.graph.sigma[i] * cfg.nu_input);
        double* out = u_cond.row(i);
        for (size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            const double cal = calibrate_sq(row[j], sim.graph.rho[i]);
            out[j] = std::exp(log_c - exponent * std::log1p(cal * inv));
        }
    }
    sim.kernel_evals += static_cast<uint64_t>(m) * (m - 1);
    sim.full = symmetrize(u_cond);
    return sim;
}

/**
 * @brief Per-batch latent-space similarities.
 *
 * rho is zero in the latent space (calibration happens at the input layer
 * only); sigma is re-solved per batch against the same perplexity target.
 * The conditional kernel values are kept because the loss gradient chains
 * through them. `fixed_sigma`, when supplied, bypasses the solve so that
 * finite-difference oracles can evaluate the same sigma-frozen objective the
 * analytic gradient differentiates.
 */
struct LatentSimilarities {
    SimilaritySet set;
    Matrix v;                    // conditional kernel values v[i][j] = u_{j|i}
    std::vector<double> sigma;
    std::vector<char> converged;
    std::vector<double> residual;
    uint64_t kernel_evals = 0;
};

inline LatentSimilarities latent_similarities(const Matrix& z, double q, double nu,
                                              const std::vector<double>* fixed_sigma = nullptr) {
    const size_t m = z.rows;
    LatentSimilarities lat;
    lat.sigma.assign(m, kSigmaMin);
    lat.converged.assign(m, 0);
    lat.residual.assign(m, 0.0);
    if (m < 2) {
        lat.set.u = Matrix(m, m, 0.0);
        lat.v = Matrix(m, m, 0.0);
        return lat;
    }
    const Matrix d2 = pairwise_sq_distances(z);

    std::vector<uint64_t> evals(m, 0);
    if (fixed_sigma) {
        lat.sigma = *fixed_sigma;
        for (size_t i = 0; i < m; ++i) lat.converged[i] = 1;
    } else {
#ifdef _OPENMP
        #pragma omp parallel for schedule(static)
#endif
        for (size_t i = 0; i < m; ++i) {
            std::vector<double> row;
            row.reserve(m - 1);
            for (size_t j = 0; j < m; ++j) {
                if (j != i) row.push_back(d2.at(i, j));
            }
            const SigmaResult r = solve_sigma(row, q, nu);
            lat.sigma[i] = r.sigma;
            lat.converged[i] = r.converged ? 1 : 0;
            lat.residual[i] = r.residual;
            evals[i] = r.kernel_evals;
        }
    }
    for (uint64_t e : evals) lat.kernel_evals += e;

    lat.v = Matrix(m, m, 0.0);
    const double log_c = log_c_nu(nu);
    const double exponent = nu + 1.0;
#ifdef _OPENMP
    #pragma omp parallel for schedule(static)
#endif
    for (size_t i = 0; i < m; ++i) {
        const double inv = 1.0 / (lat.sigma[i] * nu);
        const double* drow = d2.row(i);
        double* out = lat.v.row(i);
        for (size_t j = 0; j < m; ++j) {
            if (j != i) out[j] = std::exp(log_c - exponent * std::log1p(drow[j] * inv));
        }
    }
    lat.kernel_evals += static_cast<uint64_t>(m) * (m - 1);
    lat.set = symmetrize(lat.v);
    return lat;
}

}

#endif
