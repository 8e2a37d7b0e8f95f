#ifndef DMT_METRICS_HPP
#define DMT_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "common.hpp"
#include "matrix.hpp"
#include "rng.hpp"

namespace dmt {

/**
 * @brief Neighbour ranks for every ordered pair.
 *
 * rank(i, j) is the position of j (1 = nearest) when the other points are
 * sorted by ascending distance from i, ties broken toward the smaller
 * index. The tie rule makes duplicated points rank identically in any two
 * spaces, which keeps the metrics deterministic on degenerate data.
 */
struct RankTable {
    size_t m = 0;
    std::vector<uint32_t> ranks;  // m*m, 0 on the diagonal

    uint32_t rank(size_t i, size_t j) const { return ranks[i * m + j]; }
};

inline RankTable build_rank_table(const Matrix& x) {
    const Matrix d2 = pairwise_sq_distances(x);
    RankTable rt;
    rt.m = x.rows;
    rt.ranks.assign(rt.m * rt.m, 0);
#ifdef _OPENMP
    #pragma omp parallel for schedule(static)
#endif
    for (size_t i = 0; i < rt.m; ++i) {
        std::vector<uint32_t> order;
        order.reserve(rt.m - 1);
        for (size_t j = 0; j < rt.m; ++j) {
            if (j != i) order.push_back(static_cast<uint32_t>(j));
        }
        const double* row = d2.row(i);
        std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
            return row[a] < row[b] || (row[a] == row[b] && a < b);
        });
        for (size_t t = 0; t < order.size(); ++t) {
            rt.ranks[i * rt.m + order[t]] = static_cast<uint32_t>(t + 1);
        }
    }
    return rt;
}

namespace detail {

inline void check_con_k(size_t m, size_t k) {
    if (k < 1 || 2 * m < 3 * k + 2) {
        throw UsageError("metrics: k out of range for the rank normalizer");
    }
}

/// 1 - T * sum over (j in k-NN of `from` but not of `to`) of (rank_to - k).
inline double rank_preservation(const RankTable& from, const RankTable& to, size_t k) {
    const size_t m = from.m;
    check_con_k(m, k);
    int64_t s = 0;
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            if (from.rank(i, j) <= k && to.rank(i, j) > k) {
                s += static_cast<int64_t>(to.rank(i, j)) - static_cast<int64_t>(k);
            }
        }
    }
    const double t = 2.0 / (static_cast<double>(m) * static_cast<double>(k) *
                            static_cast<double>(2 * m - 3 * k - 1));
    return 1.0 - t * static_cast<double>(s);
}

}  // namespace detail

/// Continuity: k-NN preservation going from latent back to input; penalises
/// input-space neighbours that fell out of the latent neighbourhood.
inline double continuity(const Matrix& x_in, const Matrix& x_lat, size_t k) {
    return detail::rank_preservation(build_rank_table(x_in), build_rank_table(x_lat), k);
}

/// Trustworthiness: the mirror image, penalising latent neighbours that are
/// not input-space neighbours.
inline double trustworthiness(const Matrix& x_in, const Matrix& x_lat, size_t k) {
    return detail::rank_preservation(build_rank_table(x_lat), build_rank_table(x_in), k);
}

/// Mean relative rank error over both directions; 0 when the rank structure
/// is identical.
inline double rre(const Matrix& x_in, const Matrix& x_lat, size_t k) {
    const RankTable rin = build_rank_table(x_in);
    const RankTable rlat = build_rank_table(x_lat);
    const size_t m = rin.m;
    if (k < 1 || k > m - 1) throw UsageError("rre: k out of range");
    double norm = 0.0;
    for (size_t kp = 1; kp <= k; ++kp) {
        norm += std::abs(static_cast<double>(m) - 2.0 * static_cast<double>(kp)) /
                static_cast<double>(kp);
    }
    const double t = 1.0 / (static_cast<double>(m) * norm);
    double mr_from_in = 0.0, mr_from_lat = 0.0;
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            const double a = rin.rank(i, j), b = rlat.rank(i, j);
            if (rin.rank(i, j) <= k) mr_from_in += std::abs(a - b) / a;
            if (rlat.rank(i, j) <= k) mr_from_lat += std::abs(b - a) / b;
        }
    }
    return (t * mr_from_in + t * mr_from_lat) / 2.0;
}

/// Number of sampled ordered pairs for the distance correlation above the
/// all-pairs size limit.
constexpr size_t kDpcAllPairsLimit = 3000;
constexpr size_t kDpcSamplePairs = 2000000;

/**
 * Pearson correlation between corresponding pairwise distances of the two
 * spaces (two-pass estimator, ordered pairs). Coincident point sets have no
 * distance variance and yield an empty result.
 */
inline std::optional<double> dpc(const Matrix& x_in, const Matrix& x_lat,
                                 uint64_t sample_seed = 1) {
    const size_t m = x_in.rows;
    if (m < 3 || x_lat.rows != m) throw UsageError("dpc: need matching spaces with >= 3 points");

    std::vector<std::pair<size_t, size_t>> pairs;
    if (m <= kDpcAllPairsLimit) {
        pairs.reserve(m * (m - 1));
        for (size_t i = 0; i < m; ++i) {
            for (size_t j = 0; j < m; ++j) {
                if (i != j) pairs.emplace_back(i, j);
            }
        }
    } else {
        SeededRng rng(sample_seed);
        pairs.reserve(kDpcSamplePairs);
        while (pairs.size() < kDpcSamplePairs) {
            const size_t i = rng.next_below(m), j = rng.next_below(m);
            if (i != j) pairs.emplace_back(i, j);
        }
    }

    auto dist = [](const Matrix& x, size_t i, size_t j) {
        double s = 0.0;
        const double* a = x.row(i);
        const double* b = x.row(j);
        for (size_t t = 0; t < x.cols; ++t) {
            const double diff = a[t] - b[t];
            s += diff * diff;
        }
        return std::sqrt(s);
    };

    const double n = static_cast<double>(pairs.size());
    double mean_a = 0.0, mean_b = 0.0;
    for (const auto& [i, j] : pairs) {
        mean_a += dist(x_in, i, j);
        mean_b += dist(x_lat, i, j);
    }
    mean_a /= n;
    mean_b /= n;
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (const auto& [i, j] : pairs) {
        const double da = dist(x_in, i, j) - mean_a;
        const double db = dist(x_lat, i, j) - mean_b;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if (var_a <= 0.0 || var_b <= 0.0) return std::nullopt;
    return cov / std::sqrt(var_a * var_b);
}

namespace detail {

/// Per-class mean distance to the class centroid, ranked ascending with
/// ties broken by class index.
inline std::vector<int> scatter_ranks(const Matrix& x, const std::vector<int>& labels,
                                      int num_classes) {
    std::vector<double> scatter(num_classes, 0.0);
    std::vector<size_t> count(num_classes, 0);
    Matrix centroids(num_classes, x.cols, 0.0);
    for (size_t i = 0; i < x.rows; ++i) {
        const int c = labels[i];
        ++count[c];
        for (size_t j = 0; j < x.cols; ++j) centroids.at(c, j) += x.at(i, j);
    }
    for (int c = 0; c < num_classes; ++c) {
        if (count[c] == 0) throw UsageError("srm: empty class " + std::to_string(c));
        for (size_t j = 0; j < x.cols; ++j) centroids.at(c, j) /= static_cast<double>(count[c]);
    }
    for (size_t i = 0; i < x.rows; ++i) {
        const int c = labels[i];
        double s = 0.0;
        for (size_t j = 0; j < x.cols; ++j) {
            const double diff = x.at(i, j) - centroids.at(c, j);
            s += diff * diff;
        }
        scatter[c] += std::sqrt(s);
    }
    for (int c = 0; c < num_classes; ++c) scatter[c] /= static_cast<double>(count[c]);

    std::vector<int> order(num_classes);
    for (int c = 0; c < num_classes; ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return scatter[a] < scatter[b] || (scatter[a] == scatter[b] && a < b);
    });
    std::vector<int> rank(num_classes);
    for (int pos = 0; pos < num_classes; ++pos) rank[order[pos]] = pos + 1;
    return rank;
}

}  // namespace detail

/// Scatter rank mismatch: normalized Spearman's footrule between the class
/// scatter rankings of the two spaces. 0 means the ranking is preserved.
inline double srm(const Matrix& x_in, const Matrix& x_lat, const std::vector<int>& labels) {
    if (labels.size() != x_in.rows || x_lat.rows != x_in.rows) {
        throw UsageError("srm: labels/spaces size mismatch");
    }
    int num_classes = 0;
    for (int l : labels) num_classes = std::max(num_classes, l + 1);
    const auto r_in = detail::scatter_ranks(x_in, labels, num_classes);
    const auto r_lat = detail::scatter_ranks(x_lat, labels, num_classes);
    double s = 0.0;
    for (int c = 0; c < num_classes; ++c) s += std::abs(r_in[c] - r_lat[c]);
    return s / (static_cast<double>(num_classes) * static_cast<double>(num_classes));
}

// ---------------------------------------------------------------------------
// Linear max-margin classifier (hinge loss, L2 regularization) trained by
// seeded stochastic subgradient descent, one-vs-rest.
// ---------------------------------------------------------------------------

namespace detail {

struct LinearModel {
    std::vector<double> w;  // last entry acts on the constant bias feature
};

/// Stochastic subgradient descent on the L2-regularized hinge loss with the
/// usual 1/(lambda t) step and radius projection; the bias rides along as a
/// constant-one feature.
inline LinearModel train_hinge(const Matrix& x, const std::vector<int>& y, int positive,
                               double lambda, size_t epochs_over_data, SeededRng& rng) {
    LinearModel model;
    model.w.assign(x.cols + 1, 0.0);
    const size_t n = x.rows;
    const size_t iters = epochs_over_data * n;
    const double radius = 1.0 / std::sqrt(lambda);
    for (size_t it = 1; it <= iters; ++it) {
        const size_t i = rng.next_below(n);
        const double eta = 1.0 / (lambda * static_cast<double>(it));
        const double label = (y[i] == positive) ? 1.0 : -1.0;
        const double* xi = x.row(i);
        double margin = model.w.back();
        for (size_t t = 0; t < x.cols; ++t) margin += model.w[t] * xi[t];
        margin *= label;
        const double shrink = 1.0 - eta * lambda;
        for (double& w : model.w) w *= shrink;
        if (margin < 1.0) {
            for (size_t t = 0; t < x.cols; ++t) model.w[t] += eta * label * xi[t];
            model.w.back() += eta * label;
        }
        double norm_sq = 0.0;
        for (double w : model.w) norm_sq += w * w;
        if (norm_sq > radius * radius) {
            const double scale = radius / std::sqrt(norm_sq);
            for (double& w : model.w) w *= scale;
        }
    }
    return model;
}

}  // namespace detail

/**
 * Mean 5-fold cross-validated accuracy of a linear hinge-loss classifier on
 * the embedding. Folds and the subgradient descent are seeded, so the value
 * is reproducible. Features are standardized with training-fold statistics.
 */
inline double acc(const Matrix& x_lat, const std::vector<int>& labels, uint64_t seed) {
    const size_t m = x_lat.rows;
    if (labels.size() != m) throw UsageError("acc: labels size mismatch");
    int num_classes = 0;
    for (int l : labels) num_classes = std::max(num_classes, l + 1);
    if (num_classes < 2) throw UsageError("acc: need at least 2 classes");
    if (m < 10) throw UsageError("acc: need at least 10 samples for 5-fold CV");

    const double lambda = 1e-4;
    const size_t sgd_epochs = 30;
    const int num_folds = 5;

    SeededRng fold_rng = SeededRng::stream(seed, 101);
    std::vector<size_t> perm(m);
    for (size_t i = 0; i < m; ++i) perm[i] = i;
    fold_rng.shuffle(perm);

    double total_correct = 0.0;
    for (int f = 0; f < num_folds; ++f) {
        const size_t lo = m * f / num_folds, hi = m * (f + 1) / num_folds;
        std::vector<size_t> train_idx, test_idx;
        for (size_t t = 0; t < m; ++t) {
            (t >= lo && t < hi ? test_idx : train_idx).push_back(perm[t]);
        }
        Matrix xtr = gather_rows(x_lat, train_idx);
        std::vector<int> ytr(train_idx.size());
        for (size_t t = 0; t < train_idx.size(); ++t) ytr[t] = labels[train_idx[t]];

        // Standardize with training statistics.
        std::vector<double> mean(xtr.cols, 0.0), scale(xtr.cols, 1.0);
        for (size_t i = 0; i < xtr.rows; ++i) {
            for (size_t j = 0; j < xtr.cols; ++j) mean[j] += xtr.at(i, j);
        }
        for (size_t j = 0; j < xtr.cols; ++j) mean[j] /= static_cast<double>(xtr.rows);
        std::vector<double> var(xtr.cols, 0.0);
        for (size_t i = 0; i < xtr.rows; ++i) {
            for (size_t j = 0; j < xtr.cols; ++j) {
                const double d = xtr.at(i, j) - mean[j];
                var[j] += d * d;
            }
        }
        for (size_t j = 0; j < xtr.cols; ++j) {
            const double sd = std::sqrt(var[j] / static_cast<double>(xtr.rows));
            scale[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
        }
        for (size_t i = 0; i < xtr.rows; ++i) {
            for (size_t j = 0; j < xtr.cols; ++j) {
                xtr.at(i, j) = (xtr.at(i, j) - mean[j]) * scale[j];
            }
        }

        std::vector<detail::LinearModel> models;
        for (int c = 0; c < num_classes; ++c) {
            SeededRng sgd_rng = SeededRng::stream(seed, 200 + f * 64 + c);
            models.push_back(detail::train_hinge(xtr, ytr, c, lambda, sgd_epochs, sgd_rng));
        }

        size_t correct = 0;
        for (size_t t : test_idx) {
            double best = 0.0;
            int best_c = -1;
            for (int c = 0; c < num_classes; ++c) {
                double score = models[c].w.back();
                for (size_t j = 0; j < x_lat.cols; ++j) {
                    score += models[c].w[j] * (x_lat.at(t, j) - mean[j]) * scale[j];
                }
                if (best_c < 0 || score > best) {
                    best = score;
                    best_c = c;
                }
            }
            if (best_c == labels[t]) ++correct;
        }
        total_correct += static_cast<double>(correct) / static_cast<double>(test_idx.size());
    }
    return total_correct / num_folds;
}

/// Everything in one report; label-dependent metrics stay empty without
/// labels, DPC stays empty when either distance set has no variance.
struct MetricsReport {
    double con = 0.0;
    double tru = 0.0;
    double rre = 0.0;
    std::optional<double> dpc;
    std::optional<double> srm;
    std::optional<double> acc;
    size_t k_used = 0;
};

inline size_t default_metric_k(size_t m) {
    return std::max<size_t>(1, m / 20);
}

inline MetricsReport evaluate_all(const Matrix& x_in, const Matrix& x_lat,
                                  const std::vector<int>* labels, size_t k = 0,
                                  uint64_t acc_seed = 12345) {
    const size_t m = x_in.rows;
    if (x_lat.rows != m) throw DataError("evaluate_all: row count mismatch");
    MetricsReport rep;
    rep.k_used = k > 0 ? k : default_metric_k(m);

    const RankTable rin = build_rank_table(x_in);
    const RankTable rlat = build_rank_table(x_lat);
    rep.con = detail::rank_preservation(rin, rlat, rep.k_used);
    rep.tru = detail::rank_preservation(rlat, rin, rep.k_used);
    rep.rre = rre(x_in, x_lat, rep.k_used);
    rep.dpc = dpc(x_in, x_lat);
    if (labels && !labels->empty()) {
        rep.srm = srm(x_in, x_lat, *labels);
        int num_classes = 0;
        for (int l : *labels) num_classes = std::max(num_classes, l + 1);
        if (num_classes >= 2 && m >= 10) {
            rep.acc = acc(x_lat, *labels, acc_seed);
        }
    }
    return rep;
}

}

#endif
