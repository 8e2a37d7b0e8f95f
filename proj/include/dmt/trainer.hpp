#ifndef DMT_TRAINER_HPP
#define DMT_TRAINER_HPP

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "graph.hpp"
#include "losses.hpp"
#include "matrix.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "rng.hpp"

namespace dmt {

struct TrainConfig {
    size_t epochs = 500;
    size_t batch_size = 1500;
    double lr = 0.001;
    uint64_t seed = 1;
    LossConfig loss;
    LayerSpec layers = default_layer_spec();
    size_t eval_every = 0;  // 0 = evaluate only on demand
    size_t knn_k = 0;       // 0 = min(M-1, max(15, 3Q))
    double nu_input = 100.0;
    bool autoencoder = false;

    void validate() const {
        if (epochs < 1) throw UsageError("train config: epochs must be >= 1");
        if (batch_size < 2) throw UsageError("train config: batch_size must be >= 2");
        if (!(lr > 0)) throw UsageError("train config: lr must be positive");
        if (!(nu_input > 0)) throw UsageError("train config: nu_input must be positive");
        loss.validate();
    }
};

struct RunReport {
    std::vector<double> epoch_losses;
    std::vector<uint64_t> epoch_kernel_evals;
    Matrix embedding;  // M x latent_dim, original row order
    double wall_seconds = 0.0;
    std::vector<std::pair<size_t, MetricsReport>> eval_series;
};

/// Instrumentation points; `on_epoch` fires before each epoch with the
/// continuation values actually applied, `on_batch` with the dataset rows
/// each processed batch covers.
struct TrainHooks {
    std::function<void(size_t epoch, double nu, double mu)> on_epoch;
    std::function<void(size_t epoch, const std::vector<size_t>& batch)> on_batch;
};

struct Checkpoint {
    uint64_t epochs_done = 0;
    std::array<uint64_t, 4> shuffle_rng_state{};
    EncoderNetwork encoder;
    AdamState adam_encoder;
    bool has_decoder = false;
    EncoderNetwork decoder;
    AdamState adam_decoder;
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open checkpoint '" + path + "' for writing");
    out.write("DMTK", 4);
    detail::put_u64(out, 1);  // format version
    detail::put_u64(out, ckpt.epochs_done);
    for (uint64_t w : ckpt.shuffle_rng_state) detail::put_u64(out, w);
    detail::put_u64(out, ckpt.has_decoder ? 1 : 0);
    write_network(out, ckpt.encoder);
    write_adam(out, ckpt.adam_encoder);
    if (ckpt.has_decoder) {
        write_network(out, ckpt.decoder);
        write_adam(out, ckpt.adam_decoder);
    }
    if (!out) throw DataError("short write to checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "DMTK") throw DataError("'" + path + "' is not a checkpoint");
    const uint64_t version = detail::get_u64(in);
    if (version != 1) throw DataError("unsupported checkpoint version");
    Checkpoint ckpt;
    ckpt.epochs_done = detail::get_u64(in);
    for (auto& w : ckpt.shuffle_rng_state) w = detail::get_u64(in);
    ckpt.has_decoder = detail::get_u64(in) != 0;
    ckpt.encoder = read_network(in);
    ckpt.adam_encoder = AdamState::for_network(ckpt.encoder);
    read_adam(in, ckpt.adam_encoder);
    if (ckpt.has_decoder) {
        ckpt.decoder = read_network(in);
        ckpt.adam_decoder = AdamState::for_network(ckpt.decoder);
        read_adam(in, ckpt.adam_decoder);
    }
    return ckpt;
}

/**
 * @brief One training run, advanced an epoch at a time.
 *
 * Input-space similarities are solved once at construction (sigma and rho
 * stay fixed per point); latent similarities are rebuilt every step. All
 * randomness comes from streams derived from the run seed, so a (dataset,
 * config, seed) triple fully determines every emitted number, and a
 * checkpoint restores the exact mid-run state.
 */
class TrainingSession {
public:
    TrainingSession(const Dataset& ds, const TrainConfig& cfg)
        : ds_(ds), cfg_(cfg), shuffle_rng_(SeededRng::stream(cfg.seed, 2)) {
        cfg_.validate();
        cfg_.batch_size = std::min(cfg_.batch_size, ds.size());
        if (cfg_.batch_size < 2) throw UsageError("train: dataset too small for a batch");
        const LayerSpec spec = cfg_.layers.resolved(ds.dim());
        if (spec.dims.front() != static_cast<int>(ds.dim())) {
            throw DataError("train: network input width does not match the dataset");
        }

        SeededRng enc_rng = SeededRng::stream(cfg_.seed, 0);
        encoder_ = init_he(spec, enc_rng);
        adam_enc_ = AdamState::for_network(encoder_);
        if (cfg_.autoencoder) {
            SeededRng dec_rng = SeededRng::stream(cfg_.seed, 1);
            decoder_ = init_he(spec.reversed(), dec_rng);
            adam_dec_ = AdamState::for_network(decoder_);
        }

        schedule_ = make_schedule(cfg_.loss, cfg_.epochs);

        InputSimilarityConfig sim_cfg;
        sim_cfg.q = cfg_.loss.q;
        sim_cfg.nu_input = cfg_.nu_input;
        sim_cfg.knn_k = cfg_.knn_k;
        if (cfg_.loss.mode == LossMode::LGP) {
            input_sims_ = input_similarities(ds_, sim_cfg);
        } else {
            // LIS only needs the binary neighbourhood system.
            const size_t k = sim_cfg.knn_k > 0 ? std::min(sim_cfg.knn_k, ds.size() - 1)
                                               : auto_knn_k(ds.size(), sim_cfg.q);
            input_sims_.graph = build_knn(ds_.features, k);
        }
        neighbor_sorted_.resize(ds.size());
        for (size_t i = 0; i < ds.size(); ++i) {
            neighbor_sorted_[i] = input_sims_.graph.knn_indices[i];
            std::sort(neighbor_sorted_[i].begin(), neighbor_sorted_[i].end());
        }
    }

    size_t epoch() const { return epochs_done_; }
    bool done() const { return epochs_done_ >= cfg_.epochs; }
    const TrainConfig& config() const { return cfg_; }
    const Schedule& schedule() const { return schedule_; }
    const EncoderNetwork& encoder() const { return encoder_; }
    const EncoderNetwork& decoder() const {
        if (!cfg_.autoencoder) throw UsageError("session has no decoder");
        return decoder_;
    }
    const InputSimilarities& input_sims() const { return input_sims_; }
    double last_epoch_loss() const { return last_epoch_loss_; }
    uint64_t last_epoch_kernel_evals() const { return last_epoch_kernel_evals_; }
    double last_epoch_reconstruction() const { return last_epoch_reconstruction_; }
    uint64_t optimizer_steps() const { return adam_enc_.step; }
    /// Worst perplexity-equation residual seen over converged points.
    double max_converged_residual() const { return max_converged_residual_; }

    void run_epoch(const TrainHooks* hooks = nullptr) {
        if (done()) throw UsageError("run_epoch: all epochs already completed");
        const size_t e = epochs_done_;
        const double nu = schedule_.nu[e];
        const double mu = schedule_.mu[e];
        if (hooks && hooks->on_epoch) hooks->on_epoch(e, nu, mu);

        const size_t m = ds_.size();
        std::vector<size_t> order(m);
        for (size_t i = 0; i < m; ++i) order[i] = i;
        shuffle_rng_.shuffle(order);

        double epoch_loss = 0.0;
        double epoch_rec = 0.0;
        uint64_t epoch_evals = 0;
        size_t batch_index = 0;
        for (size_t start = 0; start < m; start += cfg_.batch_size, ++batch_index) {
            const size_t stop = std::min(m, start + cfg_.batch_size);
            if (stop - start < 2) continue;  // a 1-point tail batch has no pairs
            std::vector<size_t> batch(order.begin() + start, order.begin() + stop);
            if (hooks && hooks->on_batch) hooks->on_batch(e, batch);

            Matrix xb = gather_rows(ds_.features, batch);
            ForwardTrace trace = forward(encoder_, xb);

            SimilaritySet u_in;
            Matrix d2_in;
            std::vector<char> mask;
            EncoderLossInputs inputs;
            if (cfg_.loss.mode == LossMode::LGP) {
                u_in = input_sims_.restrict_to(batch);
                inputs.input_sim = &u_in;
            } else {
                d2_in = pairwise_sq_distances(xb);
                mask = batch_neighbor_mask(batch);
                inputs.input_sq_dists = &d2_in;
                inputs.neighbor_mask = &mask;
            }

            double batch_loss = 0.0;
            if (cfg_.autoencoder) {
                ForwardTrace dec_trace = forward(decoder_, trace.latent());
                AutoencoderLossResult res =
                    loss_autoencoder(inputs, trace, dec_trace, cfg_.loss, schedule_, e);
                check_finite(res.loss, e, batch_index);
                Matrix grad_z_rec;
                ParamGrads dec_grads =
                    backward(decoder_, dec_trace, res.grad_reconstruction, &grad_z_rec);
                Matrix grad_latent = res.encoder.grad_latent;
                for (size_t t = 0; t < grad_latent.data.size(); ++t) {
                    grad_latent.data[t] += grad_z_rec.data[t];
                }
                ParamGrads enc_grads = backward(encoder_, trace, grad_latent);
                adam_step(encoder_, enc_grads, adam_enc_, cfg_.lr);
                adam_step(decoder_, dec_grads, adam_dec_, cfg_.lr);
                batch_loss = res.loss;
                epoch_rec += res.reconstruction;
                epoch_evals += res.encoder.kernel_evals;
                note_residuals(res.encoder);
            } else {
                EncoderLossResult res = loss_encoder(inputs, trace, cfg_.loss, schedule_, e);
                check_finite(res.loss, e, batch_index);
                ParamGrads grads = backward(encoder_, trace, res.grad_latent);
                adam_step(encoder_, grads, adam_enc_, cfg_.lr);
                batch_loss = res.loss;
                epoch_evals += res.kernel_evals;
                note_residuals(res);
            }
            epoch_loss += batch_loss;
        }
        last_epoch_loss_ = epoch_loss;
        last_epoch_reconstruction_ = epoch_rec;
        last_epoch_kernel_evals_ = epoch_evals;
        ++epochs_done_;
    }

    /// Latent coordinates for the whole dataset in original row order.
    Matrix full_embedding() const {
        return forward(encoder_, ds_.features).latent();
    }

    Checkpoint to_checkpoint() const {
        Checkpoint ckpt;
        ckpt.epochs_done = epochs_done_;
        ckpt.shuffle_rng_state = shuffle_rng_.state();
        ckpt.encoder = encoder_;
        ckpt.adam_encoder = adam_enc_;
        ckpt.has_decoder = cfg_.autoencoder;
        if (cfg_.autoencoder) {
            ckpt.decoder = decoder_;
            ckpt.adam_decoder = adam_dec_;
        }
        return ckpt;
    }

    void restore(const Checkpoint& ckpt) {
        if (ckpt.encoder.spec.dims != encoder_.spec.dims) {
            throw DataError("checkpoint: encoder layout does not match the configuration");
        }
        if (ckpt.has_decoder != cfg_.autoencoder) {
            throw DataError("checkpoint: decoder presence does not match the configuration");
        }
        epochs_done_ = ckpt.epochs_done;
        shuffle_rng_.set_state(ckpt.shuffle_rng_state);
        encoder_ = ckpt.encoder;
        adam_enc_ = ckpt.adam_encoder;
        if (cfg_.autoencoder) {
            decoder_ = ckpt.decoder;
            adam_dec_ = ckpt.adam_decoder;
        }
    }

private:
    std::vector<char> batch_neighbor_mask(const std::vector<size_t>& batch) const {
        const size_t mb = batch.size();
        std::vector<char> mask(mb * mb, 0);
        for (size_t a = 0; a < mb; ++a) {
            const auto& nb = neighbor_sorted_[batch[a]];
            for (size_t b = 0; b < mb; ++b) {
                if (a != b && std::binary_search(nb.begin(), nb.end(), batch[b])) {
                    mask[a * mb + b] = 1;
                }
            }
        }
        return mask;
    }

    void check_finite(double loss, size_t e, size_t b) const {
        if (!std::isfinite(loss)) {
            throw NumericError("non-finite loss at epoch " + std::to_string(e) + ", batch " +
                               std::to_string(b));
        }
    }

    void note_residuals(const EncoderLossResult& res) {
        for (size_t i = 0; i < res.latent_sigma.size(); ++i) {
            if (res.latent_converged[i]) {
                max_converged_residual_ =
                    std::max(max_converged_residual_, std::abs(res.latent_residual[i]));
            }
        }
    }

    Dataset ds_;
    TrainConfig cfg_;
    SeededRng shuffle_rng_;
    Schedule schedule_;
    EncoderNetwork encoder_, decoder_;
    AdamState adam_enc_, adam_dec_;
    InputSimilarities input_sims_;
    std::vector<std::vector<size_t>> neighbor_sorted_;
    size_t epochs_done_ = 0;
    double last_epoch_loss_ = 0.0;
    double last_epoch_reconstruction_ = 0.0;
    uint64_t last_epoch_kernel_evals_ = 0;
    double max_converged_residual_ = 0.0;
};

namespace detail {

inline RunReport run_session(TrainingSession& session, const Dataset& ds, const TrainHooks* hooks) {
    const auto t0 = std::chrono::steady_clock::now();
    RunReport report;
    while (!session.done()) {
        session.run_epoch(hooks);
        report.epoch_losses.push_back(session.last_epoch_loss());
        report.epoch_kernel_evals.push_back(session.last_epoch_kernel_evals());
        const size_t ev = session.config().eval_every;
        if (ev > 0 && (session.epoch() % ev == 0 || session.done())) {
            const Matrix z = session.full_embedding();
            const std::vector<int>* labels = ds.labels ? &*ds.labels : nullptr;
            report.eval_series.emplace_back(session.epoch(),
                                            evaluate_all(ds.features, z, labels));
        }
    }
    report.embedding = session.full_embedding();
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace detail

/// Runs the full training loop and returns the trained encoder.
inline std::pair<EncoderNetwork, RunReport> train_encoder(const Dataset& ds, TrainConfig cfg,
                                                          const TrainHooks* hooks = nullptr) {
    cfg.autoencoder = false;
    TrainingSession session(ds, cfg);
    RunReport report = detail::run_session(session, ds, hooks);
    return {session.encoder(), std::move(report)};
}

struct AutoencoderResult {
    EncoderNetwork encoder;
    EncoderNetwork decoder;
    RunReport report;
};

inline AutoencoderResult train_autoencoder(const Dataset& ds, TrainConfig cfg,
                                           const TrainHooks* hooks = nullptr) {
    cfg.autoencoder = true;
    TrainingSession session(ds, cfg);
    RunReport report = detail::run_session(session, ds, hooks);
    return {session.encoder(), session.decoder(), std::move(report)};
}

/// X^(0)..X^(L) over the full dataset, one matrix per layer.
inline std::vector<Matrix> export_layer_activations(const EncoderNetwork& net, const Dataset& ds) {
    return forward(net, ds.features).activations;
}

/**
 * Decodes `steps` points linearly spaced from `z_a` to `z_b` inclusive.
 */
inline Matrix interpolate_latent(const EncoderNetwork& decoder, const std::vector<double>& z_a,
                                 const std::vector<double>& z_b, size_t steps) {
    if (decoder.num_layers() == 0) throw UsageError("interpolate_latent: no trained decoder");
    if (steps < 2) throw UsageError("interpolate_latent: need at least 2 steps");
    if (z_a.size() != decoder.input_dim() || z_b.size() != decoder.input_dim()) {
        throw UsageError("interpolate_latent: endpoint dimension mismatch");
    }
    Matrix z(steps, z_a.size());
    for (size_t s = 0; s < steps; ++s) {
        const double frac = static_cast<double>(s) / static_cast<double>(steps - 1);
        for (size_t j = 0; j < z_a.size(); ++j) {
            // Endpoints are copied bitwise so their decodes match a direct
            // forward pass exactly.
            if (s == 0) {
                z.at(s, j) = z_a[j];
            } else if (s == steps - 1) {
                z.at(s, j) = z_b[j];
            } else {
                z.at(s, j) = z_a[j] + frac * (z_b[j] - z_a[j]);
            }
        }
    }
    return forward(decoder, z).latent();
}

}

#endif
