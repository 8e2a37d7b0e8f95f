#ifndef DMT_CLI_HPP
#define DMT_CLI_HPP

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "common.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "metrics.hpp"
#include "pca.hpp"
#include "svg.hpp"
#include "trainer.hpp"

namespace dmt::cli {

constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// File formats shared by the commands.
// ---------------------------------------------------------------------------

/// Embedding CSV: `id,label,z1,z2` (label column omitted for unlabeled
/// data); ids are 0-based original row indices.
inline std::string embedding_to_csv(const Matrix& emb, const std::vector<int>* labels) {
    std::string out = "id";
    if (labels) out += ",label";
    for (size_t j = 0; j < emb.cols; ++j) out += ",z" + std::to_string(j + 1);
    out += '\n';
    for (size_t i = 0; i < emb.rows; ++i) {
        out += std::to_string(i);
        if (labels) out += ',' + std::to_string((*labels)[i]);
        for (size_t j = 0; j < emb.cols; ++j) out += ',' + format_double(emb.at(i, j));
        out += '\n';
    }
    return out;
}

struct EmbeddingFile {
    std::vector<size_t> ids;
    std::optional<std::vector<int>> labels;
    Matrix coords;
};

inline EmbeddingFile read_embedding_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open embedding '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line)) throw DataError("embedding '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_fields(line);
    if (header.empty() || header[0] != "id") {
        throw DataError("embedding '" + path + "' must start with an 'id' header column");
    }
    const bool has_label = header.size() > 1 && header[1] == "label";
    const size_t dim = header.size() - 1 - (has_label ? 1 : 0);
    if (dim < 1) throw DataError("embedding '" + path + "' has no coordinate columns");

    EmbeddingFile emb;
    if (has_label) emb.labels.emplace();
    std::vector<double> coords;
    size_t lineno = 1;
    while (std::getline(ss, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_fields(line);
        if (fields.size() != header.size()) {
            throw DataError("embedding row " + std::to_string(lineno) + " has " +
                            std::to_string(fields.size()) + " columns, expected " +
                            std::to_string(header.size()));
        }
        bool ok = false;
        const double idv = parse_double(fields[0], ok);
        if (!ok || idv < 0 || idv != std::floor(idv)) {
            throw DataError("embedding row " + std::to_string(lineno) + ": bad id");
        }
        emb.ids.push_back(static_cast<size_t>(idv));
        size_t f = 1;
        if (has_label) {
            const double lv = parse_double(fields[f++], ok);
            if (!ok || lv != std::floor(lv)) {
                throw DataError("embedding row " + std::to_string(lineno) + ": bad label");
            }
            emb.labels->push_back(static_cast<int>(lv));
        }
        for (; f < fields.size(); ++f) {
            const double v = parse_double(fields[f], ok);
            if (!ok) throw DataError("embedding row " + std::to_string(lineno) + ": bad value");
            coords.push_back(v);
        }
    }
    emb.coords = Matrix(emb.ids.size(), dim);
    emb.coords.data = std::move(coords);
    return emb;
}

inline std::string matrix_to_csv(const Matrix& m) {
    std::string out;
    for (size_t i = 0; i < m.rows; ++i) {
        for (size_t j = 0; j < m.cols; ++j) {
            if (j > 0) out += ',';
            out += format_double(m.at(i, j));
        }
        out += '\n';
    }
    return out;
}

inline std::string kv_to_text(const KeyValues& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

inline std::string hex64(uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void append_metrics_kv(KeyValues& kv, const MetricsReport& rep, const std::string& prefix) {
    kv.emplace_back(prefix + "k_used", std::to_string(rep.k_used));
    kv.emplace_back(prefix + "con", format_double(rep.con));
    kv.emplace_back(prefix + "tru", format_double(rep.tru));
    kv.emplace_back(prefix + "rre", format_double(rep.rre));
    kv.emplace_back(prefix + "dpc", rep.dpc ? format_double(*rep.dpc)
                                            : "skipped: zero distance variance");
    kv.emplace_back(prefix + "srm", rep.srm ? format_double(*rep.srm) : "skipped: no labels");
    kv.emplace_back(prefix + "acc", rep.acc ? format_double(*rep.acc) : "skipped: no labels");
}

// ---------------------------------------------------------------------------
// Command implementations. Each is callable in-process; `run` maps errors to
// exit codes (0 ok, 1 usage, 2 data, 3 numerical).
// ---------------------------------------------------------------------------

struct GenerateArgs {
    std::string dataset;
    size_t size = 1500;
    double noise = 0.0;
    size_t copies = 300;
    size_t dim = 100;
    uint64_t seed = 7;
    std::string out;
};

inline void cmd_generate(const GenerateArgs& args) {
    SeededRng rng(args.seed);
    Dataset ds;
    if (args.dataset == "swissroll") {
        ds = gen_swiss_roll(args.size, args.noise, rng);
    } else if (args.dataset == "smileface") {
        ds = gen_smile_face(args.size, rng);
    } else if (args.dataset == "threegauss") {
        ds = gen_three_gauss(args.size, args.dim, rng);
    } else if (args.dataset == "repeatpoints") {
        ds = gen_repeat_points(args.copies, args.dim, rng);
    } else {
        throw UsageError("unknown dataset '" + args.dataset +
                         "' (known: swissroll, smileface, threegauss, repeatpoints)");
    }
    write_file(args.out, dataset_to_csv(ds));
}

struct TrainArgs {
    std::string data;
    std::optional<size_t> label_col;
    std::optional<size_t> max_rows;
    std::string preset;
    std::string config_path;
    KeyValues overrides;
    std::string out_dir;
    size_t ckpt_every = 0;
};

struct TrainOutcome {
    TrainConfig cfg;
    MetricsReport metrics;
    double final_loss = 0.0;
    bool has_labels = false;
};

inline TrainOutcome cmd_train(const TrainArgs& args) {
    TrainConfig cfg = resolve_config(args.preset, args.config_path, args.overrides);
    Dataset ds = load_csv(args.data, args.label_col, args.max_rows, SeededRng::stream(cfg.seed, 3));

    namespace fs = std::filesystem;
    fs::create_directories(args.out_dir);

    const auto t0 = std::chrono::steady_clock::now();
    TrainingSession session(ds, cfg);
    std::vector<double> losses;
    std::vector<uint64_t> evals;
    while (!session.done()) {
        session.run_epoch();
        losses.push_back(session.last_epoch_loss());
        evals.push_back(session.last_epoch_kernel_evals());
        if (args.ckpt_every > 0 && session.epoch() % args.ckpt_every == 0 && !session.done()) {
            save_checkpoint(args.out_dir + "/ckpt-" + std::to_string(session.epoch()),
                            session.to_checkpoint());
        }
    }
    const Matrix emb = session.full_embedding();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::vector<int>* labels = ds.labels ? &*ds.labels : nullptr;
    write_file(args.out_dir + "/embedding.csv", embedding_to_csv(emb, labels));
    save_checkpoint(args.out_dir + "/ckpt-final", session.to_checkpoint());

    const MetricsReport metrics = evaluate_all(ds.features, emb, labels);

    KeyValues manifest;
    manifest.emplace_back("tool_version", kToolVersion);
    manifest.emplace_back("command", "train");
    manifest.emplace_back("data_path", args.data);
    manifest.emplace_back("label_col",
                          args.label_col ? std::to_string(*args.label_col) : "none");
    manifest.emplace_back("max_rows", args.max_rows ? std::to_string(*args.max_rows) : "none");
    manifest.emplace_back("data_rows", std::to_string(ds.size()));
    manifest.emplace_back("data_cols", std::to_string(ds.dim()));
    manifest.emplace_back("data_labels", ds.labels ? "present" : "absent");
    manifest.emplace_back("data_fingerprint", hex64(fingerprint(ds)));
    const auto resolved = config_to_kv(session.config());
    manifest.insert(manifest.end(), resolved.begin(), resolved.end());
    manifest.emplace_back("final_loss", format_double(losses.back()));
    {
        std::string series;
        for (size_t i = 0; i < losses.size(); ++i) {
            if (i > 0) series += ',';
            series += format_double(losses[i]);
        }
        manifest.emplace_back("loss_series", series);
        std::string eseries;
        for (size_t i = 0; i < evals.size(); ++i) {
            if (i > 0) eseries += ',';
            eseries += std::to_string(evals[i]);
        }
        manifest.emplace_back("kernel_evals_series", eseries);
    }
    manifest.emplace_back("max_converged_sigma_residual",
                          format_double(session.max_converged_residual()));
    append_metrics_kv(manifest, metrics, "final_");
    // Wall time is the one nondeterministic line; it stays last so tooling
    // can compare manifests without it.
    manifest.emplace_back("wall_seconds", format_double(wall));
    write_file(args.out_dir + "/manifest.txt", kv_to_text(manifest));

    return TrainOutcome{session.config(), metrics, losses.back(), ds.labels.has_value()};
}

struct EvalArgs {
    std::string input;
    std::optional<size_t> label_col;
    std::string embedding;
    size_t k = 0;
    std::string out;
};

inline MetricsReport cmd_eval(const EvalArgs& args) {
    Dataset ds = load_csv(args.input, args.label_col, std::nullopt, SeededRng(0));
    EmbeddingFile emb = read_embedding_csv(args.embedding);
    const size_t m = ds.size();
    if (emb.ids.size() != m) {
        throw DataError("eval: embedding has " + std::to_string(emb.ids.size()) +
                        " rows but the input has " + std::to_string(m));
    }
    std::vector<char> seen(m, 0);
    for (size_t id : emb.ids) {
        if (id >= m) throw DataError("eval: embedding id " + std::to_string(id) + " out of range");
        if (seen[id]) throw DataError("eval: duplicate embedding id " + std::to_string(id));
        seen[id] = 1;
    }
    // Align embedding rows to input order.
    Matrix coords(m, emb.coords.cols);
    std::vector<int> labels_aligned;
    if (emb.labels) labels_aligned.resize(m);
    for (size_t r = 0; r < m; ++r) {
        const size_t id = emb.ids[r];
        for (size_t j = 0; j < coords.cols; ++j) coords.at(id, j) = emb.coords.at(r, j);
        if (emb.labels) labels_aligned[id] = (*emb.labels)[r];
    }
    const std::vector<int>* labels = nullptr;
    if (emb.labels) {
        labels = &labels_aligned;
    } else if (ds.labels) {
        labels = &*ds.labels;
    }

    const MetricsReport rep = evaluate_all(ds.features, coords, labels, args.k);
    KeyValues kv;
    kv.emplace_back("rows", std::to_string(m));
    append_metrics_kv(kv, rep, "");
    write_file(args.out, kv_to_text(kv));
    return rep;
}

struct PlotArgs {
    std::string embedding;
    std::string out;
};

inline void cmd_plot(const PlotArgs& args) {
    EmbeddingFile emb = read_embedding_csv(args.embedding);
    const std::vector<int>* labels = emb.labels ? &*emb.labels : nullptr;
    write_file(args.out, scatter_svg(emb.coords, labels));
}

struct LayersArgs {
    std::string ckpt;
    std::string data;
    std::optional<size_t> label_col;
    std::string out_dir;
};

inline void cmd_layers(const LayersArgs& args) {
    const Checkpoint ckpt = load_checkpoint(args.ckpt);
    Dataset ds = load_csv(args.data, args.label_col, std::nullopt, SeededRng(0));
    if (ckpt.encoder.input_dim() != ds.dim()) {
        throw DataError("layers: checkpoint expects " + std::to_string(ckpt.encoder.input_dim()) +
                        " input columns, data has " + std::to_string(ds.dim()));
    }
    namespace fs = std::filesystem;
    fs::create_directories(args.out_dir);
    const std::vector<Matrix> acts = export_layer_activations(ckpt.encoder, ds);
    const std::vector<int>* labels = ds.labels ? &*ds.labels : nullptr;
    for (size_t l = 0; l < acts.size(); ++l) {
        const std::string base = args.out_dir + "/layer" + std::to_string(l);
        write_file(base + ".csv", matrix_to_csv(acts[l]));
        if (acts[l].cols == 2) {
            write_file(base + ".svg", scatter_svg(acts[l], labels));
        } else if (acts[l].cols > 2) {
            const PcaResult pca = pca_top2(acts[l]);
            write_file(base + "_pca.csv", matrix_to_csv(pca.projected));
            write_file(base + ".svg", scatter_svg(pca.projected, labels));
        }
    }
}

struct SweepArgs {
    TrainArgs base;
    std::string key;                   // q | nu_end
    std::vector<std::string> values;   // verbatim tokens
};

inline int cmd_sweep(const SweepArgs& args) {
    if (args.key != "q" && args.key != "nu_end") {
        throw UsageError("sweep: key must be 'q' or 'nu_end'");
    }
    if (args.values.empty()) throw UsageError("sweep: no values given");
    namespace fs = std::filesystem;
    fs::create_directories(args.base.out_dir);

    std::string summary = "value,final_loss,con,tru,rre,dpc,srm,acc\n";
    int worst = 0;
    for (const std::string& token : args.values) {
        TrainArgs run = args.base;
        run.overrides.emplace_back(args.key, token);
        run.out_dir = args.base.out_dir + "/" + args.key + "=" + token;
        try {
            const TrainOutcome outcome = cmd_train(run);
            summary += token + ',' + format_double(outcome.final_loss);
            summary += ',' + format_double(outcome.metrics.con);
            summary += ',' + format_double(outcome.metrics.tru);
            summary += ',' + format_double(outcome.metrics.rre);
            summary += ',' + (outcome.metrics.dpc ? format_double(*outcome.metrics.dpc) : std::string());
            summary += ',' + (outcome.metrics.srm ? format_double(*outcome.metrics.srm) : std::string());
            summary += ',' + (outcome.metrics.acc ? format_double(*outcome.metrics.acc) : std::string());
            summary += '\n';
        } catch (const UsageError& e) {
            std::cerr << "sweep " << args.key << "=" << token << ": " << e.what() << "\n";
            summary += token + ",error,,,,,,\n";
            worst = std::max(worst, 1);
        } catch (const DataError& e) {
            std::cerr << "sweep " << args.key << "=" << token << ": " << e.what() << "\n";
            summary += token + ",error,,,,,,\n";
            worst = std::max(worst, 2);
        } catch (const NumericError& e) {
            std::cerr << "sweep " << args.key << "=" << token << ": " << e.what() << "\n";
            summary += token + ",error,,,,,,\n";
            worst = std::max(worst, 3);
        }
    }
    write_file(args.base.out_dir + "/summary.csv", summary);
    return worst;
}

// ---------------------------------------------------------------------------
// Argument parsing and dispatch.
// ---------------------------------------------------------------------------

namespace detail_cli {

/// Registers the flags shared by `train` and `sweep`; `capture` receives
/// (key, raw value) for every override the user actually passed.
struct TrainFlagSet {
    std::string data, preset, config_path, out_dir;
    long long label_col = -1;
    long long max_rows = -1;
    size_t ckpt_every = 0;

    std::string epochs, batch_size, lr, seed, eval_every, knn_k, nu_input, autoencoder,
        layers, mode, alpha, beta, mu0, push_b, nu_start, nu_end, q;

    void register_on(CLI::App* cmd, bool out_required = true) {
        cmd->add_option("--data", data, "input CSV path")->required();
        cmd->add_option("--label-col", label_col, "0-based label column in the input CSV");
        cmd->add_option("--max-rows", max_rows, "seeded subsample size");
        cmd->add_option("--preset", preset, "dataset preset name");
        cmd->add_option("--config", config_path, "key=value config file");
        auto* o = cmd->add_option("--out", out_dir, "output directory");
        if (out_required) o->required();
        cmd->add_option("--ckpt-every", ckpt_every, "write a checkpoint every N epochs");
        cmd->add_option("--epochs", epochs, "");
        cmd->add_option("--batch-size", batch_size, "");
        cmd->add_option("--lr", lr, "");
        cmd->add_option("--seed", seed, "");
        cmd->add_option("--eval-every", eval_every, "");
        cmd->add_option("--knn-k", knn_k, "");
        cmd->add_option("--nu-input", nu_input, "");
        cmd->add_option("--autoencoder", autoencoder, "true/false");
        cmd->add_option("--layers", layers, "comma-separated widths, -1 = data dim");
        cmd->add_option("--mode", mode, "lgp or lis");
        cmd->add_option("--alpha", alpha, "");
        cmd->add_option("--beta", beta, "");
        cmd->add_option("--mu0", mu0, "");
        cmd->add_option("--push-b", push_b, "number or 'median'");
        cmd->add_option("--nu-start", nu_start, "");
        cmd->add_option("--nu-end", nu_end, "");
        cmd->add_option("--q", q, "");
    }

    TrainArgs to_args(const CLI::App* cmd) const {
        TrainArgs args;
        args.data = data;
        if (label_col >= 0) args.label_col = static_cast<size_t>(label_col);
        if (max_rows >= 0) args.max_rows = static_cast<size_t>(max_rows);
        args.preset = preset;
        args.config_path = config_path;
        args.out_dir = out_dir;
        args.ckpt_every = ckpt_every;
        auto add = [&](const char* flag, const char* key, const std::string& value) {
            if (cmd->count(flag) > 0) args.overrides.emplace_back(key, value);
        };
        add("--epochs", "epochs", epochs);
        add("--batch-size", "batch_size", batch_size);
        add("--lr", "lr", lr);
        add("--seed", "seed", seed);
        add("--eval-every", "eval_every", eval_every);
        add("--knn-k", "knn_k", knn_k);
        add("--nu-input", "nu_input", nu_input);
        add("--autoencoder", "autoencoder", autoencoder);
        add("--layers", "layers", layers);
        add("--mode", "mode", mode);
        add("--alpha", "alpha", alpha);
        add("--beta", "beta", beta);
        add("--mu0", "mu0", mu0);
        add("--push-b", "push_b", push_b);
        add("--nu-start", "nu_start", nu_start);
        add("--nu-end", "nu_end", nu_end);
        add("--q", "q", q);
        return args;
    }
};

}  // namespace detail_cli

inline int run(const std::vector<std::string>& args) {
    CLI::App app{"deep manifold transformation: train, evaluate and plot 2-D embeddings"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* c_gen = app.add_subcommand("generate", "emit a labeled toy dataset CSV");
    c_gen->add_option("dataset", gen.dataset,
                      "swissroll | smileface | threegauss | repeatpoints")->required();
    c_gen->add_option("--size", gen.size, "number of points");
    c_gen->add_option("--noise", gen.noise, "Gaussian noise stddev (swissroll)");
    c_gen->add_option("--copies", gen.copies, "copies per location (repeatpoints)");
    c_gen->add_option("--dim", gen.dim, "ambient dimension (threegauss, repeatpoints)");
    c_gen->add_option("--seed", gen.seed, "generator seed");
    c_gen->add_option("-o,--out", gen.out, "output CSV path")->required();

    detail_cli::TrainFlagSet train_flags;
    auto* c_train = app.add_subcommand("train", "train an embedding and write run artifacts");
    train_flags.register_on(c_train);

    EvalArgs eval_args;
    long long eval_label_col = -1;
    auto* c_eval = app.add_subcommand("eval", "score an embedding against its input space");
    c_eval->add_option("--input", eval_args.input, "input CSV path")->required();
    c_eval->add_option("--label-col", eval_label_col, "0-based label column in the input CSV");
    c_eval->add_option("--embedding", eval_args.embedding, "embedding CSV path")->required();
    c_eval->add_option("--k", eval_args.k, "neighbourhood size (default M/20)");
    c_eval->add_option("-o,--out", eval_args.out, "report path")->required();

    PlotArgs plot_args;
    auto* c_plot = app.add_subcommand("plot", "render an embedding CSV as an SVG scatter");
    c_plot->add_option("--embedding", plot_args.embedding, "embedding CSV path")->required();
    c_plot->add_option("-o,--out", plot_args.out, "output SVG path")->required();

    LayersArgs layers_args;
    long long layers_label_col = -1;
    auto* c_layers = app.add_subcommand("layers", "export per-layer activations of a checkpoint");
    c_layers->add_option("--ckpt", layers_args.ckpt, "checkpoint path")->required();
    c_layers->add_option("--data", layers_args.data, "input CSV path")->required();
    c_layers->add_option("--label-col", layers_label_col, "0-based label column");
    c_layers->add_option("--out", layers_args.out_dir, "output directory")->required();

    detail_cli::TrainFlagSet sweep_flags;
    std::string sweep_key, sweep_values;
    auto* c_sweep = app.add_subcommand("sweep", "train once per value of q or nu_end");
    sweep_flags.register_on(c_sweep);
    c_sweep->add_option("--key", sweep_key, "q or nu_end")->required();
    c_sweep->add_option("--values", sweep_values, "comma-separated values")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (c_gen->parsed()) {
            cmd_generate(gen);
        } else if (c_train->parsed()) {
            cmd_train(train_flags.to_args(c_train));
        } else if (c_eval->parsed()) {
            if (eval_label_col >= 0) eval_args.label_col = static_cast<size_t>(eval_label_col);
            cmd_eval(eval_args);
        } else if (c_plot->parsed()) {
            cmd_plot(plot_args);
        } else if (c_layers->parsed()) {
            if (layers_label_col >= 0) layers_args.label_col = static_cast<size_t>(layers_label_col);
            cmd_layers(layers_args);
        } else if (c_sweep->parsed()) {
            SweepArgs sargs;
            sargs.base = sweep_flags.to_args(c_sweep);
            sargs.key = sweep_key;
            std::stringstream ss(sweep_values);
            std::string tok;
            while (std::getline(ss, tok, ',')) {
                if (!tok.empty()) sargs.values.push_back(tok);
            }
            return cmd_sweep(sargs);
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

inline int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}

#endif
