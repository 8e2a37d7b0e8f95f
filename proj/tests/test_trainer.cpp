#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "dmt/dataset.hpp"
#include "dmt/trainer.hpp"
#include "oracles.hpp"

using namespace dmt;

namespace {

TrainConfig tiny_config(size_t epochs = 4) {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = 64;
    cfg.seed = 5;
    cfg.layers = LayerSpec{{-1, 12, 2}, 0.1};
    cfg.loss.q = 8.0;
    cfg.loss.nu_start = 0.01;
    cfg.loss.nu_end = 10.0;
    return cfg;
}

Dataset blob_dataset(size_t m, size_t dim, uint64_t seed) {
    SeededRng rng(seed);
    Dataset ds;
    ds.features = oracle::random_matrix(m, dim, rng, 2.0);
    std::vector<int> labels(m);
    for (size_t i = 0; i < m; ++i) labels[i] = static_cast<int>(i % 3);
    ds.labels = labels;
    return ds;
}

}  // namespace

TEST_CASE("one epoch with a full-size batch takes exactly one optimizer step") {
    Dataset ds = blob_dataset(32, 3, 1);
    TrainConfig cfg = tiny_config(1);
    cfg.batch_size = 32;
    TrainingSession session(ds, cfg);
    session.run_epoch();
    CHECK(session.optimizer_steps() == 1);
    CHECK(session.done());
}

TEST_CASE("training is deterministic given the seed") {
    Dataset ds = blob_dataset(60, 3, 2);
    const TrainConfig cfg = tiny_config(3);
    auto [net_a, rep_a] = train_encoder(ds, cfg);
    auto [net_b, rep_b] = train_encoder(ds, cfg);
    CHECK(rep_a.embedding.data == rep_b.embedding.data);
    CHECK(rep_a.epoch_losses == rep_b.epoch_losses);
    for (size_t l = 0; l < net_a.num_layers(); ++l) {
        CHECK(net_a.weights[l].data == net_b.weights[l].data);
    }

    TrainConfig other = cfg;
    other.seed = 6;
    auto [net_c, rep_c] = train_encoder(ds, other);
    CHECK(rep_c.embedding.data != rep_a.embedding.data);
}

TEST_CASE("the applied continuation values follow the schedule") {
    Dataset ds = blob_dataset(30, 3, 3);
    TrainConfig cfg = tiny_config(5);
    const Schedule expect = make_schedule(cfg.loss, cfg.epochs);
    std::vector<double> seen_nu, seen_mu;
    TrainHooks hooks;
    hooks.on_epoch = [&](size_t epoch, double nu, double mu) {
        REQUIRE(epoch == seen_nu.size());
        seen_nu.push_back(nu);
        seen_mu.push_back(mu);
    };
    train_encoder(ds, cfg, &hooks);
    CHECK(seen_nu == expect.nu);
    CHECK(seen_mu == expect.mu);
}

TEST_CASE("epoch batches partition the index set") {
    Dataset ds = blob_dataset(10, 3, 4);
    TrainConfig cfg = tiny_config(1);
    cfg.batch_size = 4;
    std::vector<std::vector<size_t>> batches;
    TrainHooks hooks;
    hooks.on_batch = [&](size_t, const std::vector<size_t>& b) { batches.push_back(b); };
    train_encoder(ds, cfg, &hooks);
    REQUIRE(batches.size() == 3);
    CHECK(batches[0].size() == 4);
    CHECK(batches[1].size() == 4);
    CHECK(batches[2].size() == 2);
    std::vector<size_t> all;
    for (const auto& b : batches) all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    std::vector<size_t> expect(10);
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(all == expect);

    // A final 1-point batch is dropped for that epoch.
    Dataset ds9 = blob_dataset(9, 3, 4);
    batches.clear();
    train_encoder(ds9, cfg, &hooks);
    REQUIRE(batches.size() == 2);
    CHECK(batches[0].size() == 4);
    CHECK(batches[1].size() == 4);
}

TEST_CASE("checkpoint round-trip resumes bit-identically") {
    Dataset ds = blob_dataset(40, 3, 5);
    const TrainConfig cfg = tiny_config(6);

    TrainingSession straight(ds, cfg);
    while (!straight.done()) straight.run_epoch();
    const Matrix want = straight.full_embedding();

    TrainingSession first(ds, cfg);
    for (int i = 0; i < 3; ++i) first.run_epoch();
    const std::string path =
        (std::filesystem::temp_directory_path() / "dmt_test_ckpt").string();
    save_checkpoint(path, first.to_checkpoint());

    TrainingSession resumed(ds, cfg);
    resumed.restore(load_checkpoint(path));
    CHECK(resumed.epoch() == 3);
    while (!resumed.done()) resumed.run_epoch();
    CHECK(resumed.full_embedding().data == want.data);
    std::filesystem::remove(path);
}

TEST_CASE("autoencoder with beta zero evolves the encoder identically") {
    Dataset ds = blob_dataset(36, 3, 6);
    TrainConfig cfg = tiny_config(3);
    cfg.loss.beta = 0.0;
    auto [enc_only, rep_enc] = train_encoder(ds, cfg);
    const AutoencoderResult ae = train_autoencoder(ds, cfg);
    for (size_t l = 0; l < enc_only.num_layers(); ++l) {
        CHECK(ae.encoder.weights[l].data == enc_only.weights[l].data);
        CHECK(ae.encoder.biases[l] == enc_only.biases[l]);
    }
}

TEST_CASE("autoencoder training shrinks the reconstruction error") {
    Dataset ds = gen_smile_face(80, SeededRng(7));
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.batch_size = 80;
    cfg.seed = 7;
    cfg.layers = LayerSpec{{-1, 16, 2}, 0.1};
    cfg.loss.q = 8.0;
    cfg.loss.nu_start = 0.01;
    cfg.loss.nu_end = 10.0;
    cfg.autoencoder = true;

    // Reconstruction error of the untrained pair.
    TrainingSession init_session(ds, cfg);
    const Matrix z0 = init_session.full_embedding();
    const Matrix x0 = forward(init_session.decoder(), z0).latent();
    double init_err = 0.0;
    for (size_t t = 0; t < x0.data.size(); ++t) {
        const double d = x0.data[t] - ds.features.data[t];
        init_err += d * d;
    }

    const AutoencoderResult ae = train_autoencoder(ds, cfg);
    const Matrix z1 = forward(ae.encoder, ds.features).latent();
    const Matrix x1 = forward(ae.decoder, z1).latent();
    double final_err = 0.0;
    for (size_t t = 0; t < x1.data.size(); ++t) {
        const double d = x1.data[t] - ds.features.data[t];
        final_err += d * d;
    }
    CHECK(final_err < init_err / 2.0);
}

TEST_CASE("layer activation export matches the forward pass") {
    Dataset ds = blob_dataset(20, 3, 8);
    TrainConfig cfg = tiny_config(1);
    auto [net, rep] = train_encoder(ds, cfg);
    const auto acts = export_layer_activations(net, ds);
    REQUIRE(acts.size() == net.num_layers() + 1);
    CHECK(acts.front().data == ds.features.data);
    CHECK(acts.back().data == rep.embedding.data);
    for (size_t l = 0; l < acts.size(); ++l) {
        CHECK(acts[l].cols == static_cast<size_t>(net.spec.dims[l]));
        CHECK(acts[l].rows == ds.size());
    }
}

TEST_CASE("latent interpolation endpoints and spacing") {
    // Identity decoder: decodes equal latents, so spacing is observable.
    LayerSpec spec{{2, 2}, 0.1};
    SeededRng rng(9);
    EncoderNetwork dec = init_he(spec, rng);
    dec.weights[0].data = {1.0, 0.0, 0.0, 1.0};
    dec.biases[0] = {0.0, 0.0};

    const std::vector<double> za{0.5, 1.0}, zb{2.5, -1.0};
    const Matrix two = interpolate_latent(dec, za, zb, 2);
    CHECK(two.at(0, 0) == 0.5);
    CHECK(two.at(0, 1) == 1.0);
    CHECK(two.at(1, 0) == 2.5);
    CHECK(two.at(1, 1) == -1.0);

    const Matrix ten = interpolate_latent(dec, za, zb, 10);
    const double step = std::sqrt(4.0 + 4.0) / 9.0;
    for (size_t s = 1; s < 10; ++s) {
        const double dx = ten.at(s, 0) - ten.at(s - 1, 0);
        const double dy = ten.at(s, 1) - ten.at(s - 1, 1);
        CHECK(std::abs(std::sqrt(dx * dx + dy * dy) - step) < 1e-12);
    }

    const Matrix same = interpolate_latent(dec, za, za, 5);
    for (size_t s = 0; s < 5; ++s) {
        CHECK(same.at(s, 0) == za[0]);
        CHECK(same.at(s, 1) == za[1]);
    }

    CHECK_THROWS_AS(interpolate_latent(dec, za, zb, 1), UsageError);
    CHECK_THROWS_AS(interpolate_latent(EncoderNetwork{}, za, zb, 2), UsageError);
}

TEST_CASE("non-finite losses abort with the epoch and batch index") {
    Dataset ds = blob_dataset(20, 3, 10);
    TrainConfig cfg = tiny_config(2);
    cfg.loss.alpha = 1e308;  // overflows the weighted loss immediately
    TrainingSession session(ds, cfg);
    CHECK_THROWS_WITH(session.run_epoch(), Catch::Matchers::ContainsSubstring("epoch 0"));
}

TEST_CASE("lis mode trains end to end") {
    Dataset ds = blob_dataset(30, 3, 11);
    TrainConfig cfg = tiny_config(3);
    cfg.loss.mode = LossMode::LIS;
    cfg.loss.mu0 = 0.5;
    auto [net, rep] = train_encoder(ds, cfg);
    CHECK(rep.epoch_losses.size() == 3);
    for (double v : rep.epoch_losses) CHECK(std::isfinite(v));
    // Distance losses use no similarity kernels.
    for (uint64_t e : rep.epoch_kernel_evals) CHECK(e == 0);
}

TEST_CASE("eval series is recorded at the configured cadence") {
    Dataset ds = blob_dataset(30, 3, 12);
    TrainConfig cfg = tiny_config(4);
    cfg.eval_every = 2;
    auto [net, rep] = train_encoder(ds, cfg);
    REQUIRE(rep.eval_series.size() == 2);
    CHECK(rep.eval_series[0].first == 2);
    CHECK(rep.eval_series[1].first == 4);
}
