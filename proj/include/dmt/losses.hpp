#ifndef DMT_LOSSES_HPP
#define DMT_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "graph.hpp"
#include "matrix.hpp"
#include "network.hpp"

namespace dmt {

enum class LossMode { LGP, LIS };

inline std::string to_string(LossMode m) {
    return m == LossMode::LGP ? "lgp" : "lis";
}

inline LossMode loss_mode_from_string(const std::string& s) {
    if (s == "lgp") return LossMode::LGP;
    if (s == "lis") return LossMode::LIS;
    throw UsageError("unknown loss mode '" + s + "' (expected lgp or lis)");
}

/**
 * @brief Training-objective knobs.
 *
 * `push_b` < 0 selects the median latent pairwise distance of the current
 * batch, recomputed per step; a nonnegative value fixes the threshold.
 */
struct LossConfig {
    LossMode mode = LossMode::LGP;
    double alpha = 1.0;     // weight of the cross-layer pairwise loss
    double beta = 1.0;      // reconstruction weight (autoencoder)
    double mu0 = 1.0;       // initial push-away weight (LIS)
    double push_b = -1.0;   // push threshold; negative = per-batch median
    double nu_start = 0.001;
    double nu_end = 100.0;
    double q = 40.0;

    void validate() const {
        if (alpha < 0 || beta < 0 || mu0 < 0) {
            throw UsageError("loss config: alpha, beta and mu0 must be nonnegative");
        }
        if (!(nu_start > 0) || !(nu_end > 0)) {
            throw UsageError("loss config: nu values must be positive");
        }
        if (nu_start > nu_end) {
            throw UsageError("loss config: nu_start must not exceed nu_end");
        }
        if (!(q > 1)) throw UsageError("loss config: q must exceed 1");
    }
};

/**
 * @brief Per-epoch continuation values.
 *
 * nu moves geometrically from nu_start to nu_end; mu decays linearly from
 * mu0 to 0. Endpoints are pinned exactly.
 */
struct Schedule {
    std::vector<double> nu;
    std::vector<double> mu;

    size_t epochs() const { return nu.size(); }
};

inline Schedule make_schedule(const LossConfig& cfg, size_t epochs) {
    if (epochs < 1) throw UsageError("make_schedule: need at least one epoch");
    cfg.validate();
    Schedule s;
    s.nu.resize(epochs);
    s.mu.resize(epochs);
    for (size_t e = 0; e < epochs; ++e) {
        if (epochs == 1) {
            s.nu[e] = cfg.nu_end;
            s.mu[e] = 0.0;
        } else {
            const double frac = static_cast<double>(e) / static_cast<double>(epochs - 1);
            s.nu[e] = cfg.nu_start * std::pow(cfg.nu_end / cfg.nu_start, frac);
            s.mu[e] = cfg.mu0 * (1.0 - frac);
        }
    }
    s.nu.front() = epochs == 1 ? cfg.nu_end : cfg.nu_start;
    s.nu.back() = cfg.nu_end;
    s.mu.back() = 0.0;
    return s;
}

/**
 * Two-way divergence between fuzzy similarity sets:
 *   sum_{i != j} u log(u/u') + (1-u) log((1-u)/(1-u')).
 *
 * The i != j sum counts each unordered pair twice, exactly as written.
 * Returns the scalar plus the gradient per ordered entry,
 * d/du' = -u/u' + (1-u)/(1-u').
 */
inline double loss_lgp(const SimilaritySet& u_in, const SimilaritySet& u_lat,
                       Matrix* grad_u_lat = nullptr) {
    if (!u_in.u.same_shape(u_lat.u)) throw UsageError("loss_lgp: shape mismatch");
    const size_t m = u_in.size();
    if (grad_u_lat) *grad_u_lat = Matrix(m, m, 0.0);
    std::vector<double> row_sums(m, 0.0);
#ifdef _OPENMP
    #pragma omp parallel for schedule(static)
#endif
    for (size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            const double u = u_in.u.at(i, j);
            const double up = u_lat.u.at(i, j);
            s += u * (std::log(u) - std::log(up)) +
                 (1.0 - u) * (std::log1p(-u) - std::log1p(-up));
            if (grad_u_lat) {
                grad_u_lat->at(i, j) = -u / up + (1.0 - u) / (1.0 - up);
            }
        }
        row_sums[i] = s;
    }
    double total = 0.0;
    for (double s : row_sums) total += s;
    return total;
}

/**
 * Cross-layer distance preservation: sum over i and neighbours j of
 * |d_in(i,j) - d_lat(i,j)| on raw distances. `neighbor_mask` is row-major
 * m*m with entry [i*m+j] marking j in N_i.
 */
inline double loss_iso(const Matrix& d_in_raw, const Matrix& d_lat_raw,
                       const std::vector<char>& neighbor_mask) {
    const size_t m = d_in_raw.rows;
    if (!d_in_raw.same_shape(d_lat_raw) || neighbor_mask.size() != m * m) {
        throw UsageError("loss_iso: shape mismatch");
    }
    double total = 0.0;
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < m; ++j) {
            if (neighbor_mask[i * m + j]) {
                total += std::abs(d_in_raw.at(i, j) - d_lat_raw.at(i, j));
            }
        }
    }
    return total;
}

/**
 * Push-away loss: minus the summed latent distance of non-neighbour pairs
 * that sit closer than the threshold B. More negative means better
 * separated (up to B).
 */
inline double loss_push(const Matrix& d_lat_raw, const std::vector<char>& non_neighbor_mask,
                        double b) {
    if (!(b > 0)) throw UsageError("loss_push: threshold must be positive");
    const size_t m = d_lat_raw.rows;
    if (non_neighbor_mask.size() != m * m) throw UsageError("loss_push: mask size mismatch");
    double total = 0.0;
    for (size_t i = 0; i < m; ++i) {
        for (size_t j = 0; j < m; ++j) {
            if (i != j && non_neighbor_mask[i * m + j] && d_lat_raw.at(i, j) < b) {
                total -= d_lat_raw.at(i, j);
            }
        }
    }
    return total;
}

/// Lower median of the positive strict-upper-triangle distances; the push
/// threshold policy when no fixed B is configured.
inline double median_pairwise_distance(const Matrix& d_raw) {
    std::vector<double> vals;
    vals.reserve(d_raw.rows * (d_raw.rows - 1) / 2);
    for (size_t i = 0; i < d_raw.rows; ++i) {
        for (size_t j = i + 1; j < d_raw.cols; ++j) vals.push_back(d_raw.at(i, j));
    }
    if (vals.empty()) return 1.0;
    const size_t mid = (vals.size() - 1) / 2;
    std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
    return vals[mid];
}

/// Inputs the trainer assembles per batch; only the fields the active mode
/// needs have to be populated.
struct EncoderLossInputs {
    const SimilaritySet* input_sim = nullptr;       // LGP
    const Matrix* input_sq_dists = nullptr;         // LIS: batch x batch squared input distances
    const std::vector<char>* neighbor_mask = nullptr;  // LIS: row-major, [i*m+j] = j in N_i
};

struct EncoderLossResult {
    double loss = 0.0;
    Matrix grad_latent;                // dL/dZ, same shape as the latent batch
    uint64_t kernel_evals = 0;
    std::vector<double> latent_sigma;  // LGP: per-point solved scales
    std::vector<char> latent_converged;
    std::vector<double> latent_residual;
    double push_b_used = 0.0;          // LIS: threshold actually applied
};

/**
 * Full encoder objective for one batch at one epoch, with the analytic
 * gradient with respect to the latent coordinates.
 *
 * LGP mode: alpha * two-way divergence between the precomputed input
 * similarities and latent similarities built with nu(epoch); the solved
 * latent sigma is a constant for differentiation (no gradient through the
 * bisection). LIS mode: alpha * (iso + mu(epoch) * push) with the threshold
 * treated as a step constant.
 *
 * `fixed_latent_sigma` / `fixed_push_b` pin those step constants explicitly
 * so a finite-difference oracle can evaluate the identical objective the
 * analytic gradient differentiates.
 */
inline EncoderLossResult loss_encoder(const EncoderLossInputs& in, const ForwardTrace& trace,
                                      const LossConfig& cfg, const Schedule& sched, size_t epoch,
                                      const std::vector<double>* fixed_latent_sigma = nullptr,
                                      std::optional<double> fixed_push_b = std::nullopt) {
    if (epoch >= sched.epochs()) throw UsageError("loss_encoder: epoch out of schedule range");
    const Matrix& z = trace.latent();
    const size_t m = z.rows;

    EncoderLossResult res;
    res.grad_latent = Matrix(z.rows, z.cols, 0.0);
    if (m < 2) return res;  // degenerate batch: zero loss, zero gradient

    if (cfg.mode == LossMode::LGP) {
        if (!in.input_sim) throw UsageError("loss_encoder: LGP mode needs input similarities");
        const double nu = sched.nu[epoch];
        LatentSimilarities lat = latent_similarities(z, cfg.q, nu, fixed_latent_sigma);
        res.kernel_evals = lat.kernel_evals;
        res.latent_sigma = lat.sigma;
        res.latent_converged = lat.converged;
        res.latent_residual = lat.residual;

        Matrix g_u;
        const double raw_loss = loss_lgp(*in.input_sim, lat.set, &g_u);
        res.loss = cfg.alpha * raw_loss;

        // Chain dL/du' -> dL/d(dist^2) -> dL/dz. Each unordered pair carries
        // its two ordered divergence terms; pairs pinned at the clamp bounds
        // contribute no gradient.
        const Matrix d2 = pairwise_sq_distances(z);
        const double lo = kSimilarityClamp, hi = 1.0 - kSimilarityClamp;
#ifdef _OPENMP
        #pragma omp parallel for schedule(static)
#endif
        for (size_t i = 0; i < m; ++i) {
            double* gz = res.grad_latent.row(i);
            const double* zi = z.row(i);
            for (size_t j = 0; j < m; ++j) {
                if (j == i) continue;
                const size_t a_idx = std::min(i, j), b_idx = std::max(i, j);
                const double a = lat.v.at(a_idx, b_idx);  // u_{b|a}
                const double b = lat.v.at(b_idx, a_idx);  // u_{a|b}
                const double raw = a + b - a * b;
                if (raw <= lo || raw >= hi) continue;
                const double g_pair = 2.0 * g_u.at(a_idx, b_idx);
                const double dsq = d2.at(a_idx, b_idx);
                const double dvd_a = -(nu + 1.0) * a / (lat.sigma[a_idx] * nu + dsq);
                const double dvd_b = -(nu + 1.0) * b / (lat.sigma[b_idx] * nu + dsq);
                const double dud_d2 = (1.0 - b) * dvd_a + (1.0 - a) * dvd_b;
                const double p = cfg.alpha * g_pair * dud_d2;
                const double* zj = z.row(j);
                for (size_t t = 0; t < z.cols; ++t) {
                    gz[t] += p * 2.0 * (zi[t] - zj[t]);
                }
            }
        }
        return res;
    }

    // LIS mode.
    if (!in.input_sq_dists || !in.neighbor_mask) {
        throw UsageError("loss_encoder: LIS mode needs input distances and the neighbour mask");
    }
    const Matrix d2_lat = pairwise_sq_distances(z);
    Matrix d_lat(m, m, 0.0), d_in(m, m, 0.0);
    for (size_t t = 0; t < d_lat.data.size(); ++t) {
        d_lat.data[t] = std::sqrt(d2_lat.data[t]);
        d_in.data[t] = std::sqrt(in.input_sq_dists->data[t]);
    }
    const double mu = sched.mu[epoch];
    double b_thresh = fixed_push_b ? *fixed_push_b
                                   : (cfg.push_b >= 0.0 ? cfg.push_b : median_pairwise_distance(d_lat));
    if (!(b_thresh > 0.0)) b_thresh = 1.0;
    res.push_b_used = b_thresh;

    const std::vector<char>& mask = *in.neighbor_mask;
    std::vector<char> non_mask(m * m, 0);
    for (size_t t = 0; t < m * m; ++t) non_mask[t] = mask[t] ? 0 : 1;

    const double iso = loss_iso(d_in, d_lat, mask);
    const double push = loss_push(d_lat, non_mask, b_thresh);
    res.loss = cfg.alpha * (iso + mu * push);

    const double dist_floor = 1e-12;
#ifdef _OPENMP
    #pragma omp parallel for schedule(static)
#endif
    for (size_t i = 0; i < m; ++i) {
        double* gz = res.grad_latent.row(i);
        const double* zi = z.row(i);
        for (size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            const double d = d_lat.at(i, j);
            if (d < dist_floor) continue;
            // Ordered terms owned by i and by j both touch z_i.
            double coeff = 0.0;
            if (mask[i * m + j]) {
                coeff += (d > d_in.at(i, j)) ? 1.0 : -1.0;
            } else if (d < b_thresh) {
                coeff += -mu;
            }
            if (mask[j * m + i]) {
                coeff += (d > d_in.at(j, i)) ? 1.0 : -1.0;
            } else if (d < b_thresh) {
                coeff += -mu;
            }
            if (coeff == 0.0) continue;
            const double scale = cfg.alpha * coeff / d;
            const double* zj = z.row(j);
            for (size_t t = 0; t < z.cols; ++t) {
                gz[t] += scale * (zi[t] - zj[t]);
            }
        }
    }
    return res;
}

struct AutoencoderLossResult {
    double loss = 0.0;
    double reconstruction = 0.0;   // unweighted sum of squared errors
    EncoderLossResult encoder;
    Matrix grad_reconstruction;    // dL/d(decoder output)
};

/**
 * Joint objective: encoder loss plus beta times the summed squared
 * reconstruction error. Gradients are returned as the two seeds the trainer
 * backpropagates through the decoder and encoder.
 */
inline AutoencoderLossResult loss_autoencoder(const EncoderLossInputs& in,
                                              const ForwardTrace& enc_trace,
                                              const ForwardTrace& dec_trace,
                                              const LossConfig& cfg, const Schedule& sched,
                                              size_t epoch) {
    const Matrix& x = enc_trace.input();
    const Matrix& xhat = dec_trace.latent();
    if (!x.same_shape(xhat)) throw UsageError("loss_autoencoder: reconstruction shape mismatch");

    AutoencoderLossResult res;
    res.encoder = loss_encoder(in, enc_trace, cfg, sched, epoch);
    res.grad_reconstruction = Matrix(x.rows, x.cols, 0.0);
    double rec = 0.0;
    for (size_t t = 0; t < x.data.size(); ++t) {
        const double diff = xhat.data[t] - x.data[t];
        rec += diff * diff;
        res.grad_reconstruction.data[t] = 2.0 * cfg.beta * diff;
    }
    res.reconstruction = rec;
    res.loss = res.encoder.loss + cfg.beta * rec;
    return res;
}

}

#endif
