#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "dmt/cli.hpp"
#include "dmt/metrics.hpp"
#include "oracles.hpp"

using namespace dmt;
namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

size_t count_lines(const std::string& text) {
    size_t n = 0;
    for (char c : text) {
        if (c == '\n') ++n;
    }
    return n;
}

size_t count_occurrences(const std::string& text, const std::string& needle) {
    size_t n = 0, pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        ++n;
        pos += needle.size();
    }
    return n;
}

std::string manifest_value(const std::string& manifest, const std::string& key) {
    for (const auto& [k, v] : parse_config_text(manifest)) {
        if (k == key) return v;
    }
    return "<missing>";
}

struct Scratch {
    fs::path dir;
    explicit Scratch(const std::string& name) : dir(fs::temp_directory_path() / name) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string operator/(const std::string& p) const { return (dir / p).string(); }
};

std::vector<std::string> tiny_train_args(const std::string& data, const std::string& out) {
    return {"train",      "--data", data,   "--label-col", "0",    "--out",      out,
            "--epochs",   "3",      "--batch-size", "60",  "--layers", "-1,8,2",
            "--q",        "8",      "--nu-start", "0.01",  "--nu-end", "10",
            "--seed",     "5"};
}

}  // namespace

TEST_CASE("generate emits deterministic labeled csv") {
    Scratch scratch("dmt_cli_gen");
    const std::string out = scratch / "sr.csv";
    REQUIRE(cli::run({"generate", "swissroll", "--size", "1500", "--seed", "7", "-o", out}) == 0);
    const std::string first = read_file(out);
    CHECK(count_lines(first) == 1500);
    CHECK(count_occurrences(first.substr(0, first.find('\n')), ",") == 3);  // label + 3 coords

    REQUIRE(cli::run({"generate", "swissroll", "--size", "1500", "--seed", "7", "-o", out}) == 0);
    CHECK(read_file(out) == first);

    const std::string rp = scratch / "rp.csv";
    REQUIRE(cli::run({"generate", "repeatpoints", "--copies", "300", "--dim", "100", "-o", rp}) == 0);
    const std::string rp_text = read_file(rp);
    CHECK(count_lines(rp_text) == 900);
    CHECK(count_occurrences(rp_text.substr(0, rp_text.find('\n')), ",") == 100);

    CHECK(cli::run({"generate", "mysterydata", "-o", scratch / "x.csv"}) == 1);
    CHECK(cli::run({"generate", "swissroll", "-o", "/nonexistent-dir/x.csv"}) == 2);
}

TEST_CASE("train writes embedding, checkpoints and a complete manifest") {
    Scratch scratch("dmt_cli_train");
    const std::string data = scratch / "face.csv";
    REQUIRE(cli::run({"generate", "smileface", "--size", "60", "--seed", "3", "-o", data}) == 0);

    const std::string out = scratch / "run";
    REQUIRE(cli::run(tiny_train_args(data, out)) == 0);
    CHECK(fs::exists(out + "/embedding.csv"));
    CHECK(fs::exists(out + "/ckpt-final"));

    const std::string manifest = read_file(out + "/manifest.txt");
    for (const char* key :
         {"tool_version", "data_fingerprint", "data_rows", "seed", "epochs", "layers", "mode",
          "loss_series", "final_con", "final_tru", "final_rre", "wall_seconds"}) {
        INFO(key);
        CHECK(manifest.find(key) != std::string::npos);
    }
    CHECK(manifest_value(manifest, "epochs") == "3");
    CHECK(manifest_value(manifest, "data_rows") == "60");
    CHECK(manifest_value(manifest, "mode") == "lgp");

    const std::string emb = read_file(out + "/embedding.csv");
    CHECK(emb.substr(0, emb.find('\n')) == "id,label,z1,z2");
    CHECK(count_lines(emb) == 61);  // header + 60 rows
}

TEST_CASE("presets resolve the dataset-specific hyperparameters") {
    CHECK(resolve_config("swissroll", "", {}).loss.nu_end == 100.0);
    CHECK(resolve_config("swissroll", "", {}).loss.q == 40.0);
    CHECK(resolve_config("mnist", "", {}).loss.nu_end == 0.001);
    CHECK(resolve_config("mnist", "", {}).loss.q == 20.0);
    CHECK(resolve_config("cifar3", "", {}).loss.q == 10.0);
    CHECK_THROWS_AS(resolve_config("nope", "", {}), UsageError);

    Scratch scratch("dmt_cli_preset");
    const std::string data = scratch / "face.csv";
    REQUIRE(cli::run({"generate", "smileface", "--size", "60", "--seed", "3", "-o", data}) == 0);
    // No --q here: the preset's q must survive while the explicit --nu-end
    // flag overrides the preset.
    REQUIRE(cli::run({"train", "--data", data, "--label-col", "0", "--out", scratch / "run",
                      "--epochs", "2", "--batch-size", "60", "--layers", "-1,8,2",
                      "--nu-start", "0.01", "--nu-end", "10", "--seed", "5",
                      "--preset", "swissroll"}) == 0);
    const std::string manifest = read_file(scratch / "run/manifest.txt");
    CHECK(manifest_value(manifest, "nu_end") == "10");  // explicit flag beats the preset
    CHECK(manifest_value(manifest, "q") == "40");       // preset value survives

    // Shipped preset files stay in sync with the built-in table.
    for (const auto& [name, values] : preset_table()) {
        const std::string path = std::string(DMT_SOURCE_DIR) + "/presets/" + name + ".cfg";
        INFO(path);
        REQUIRE(fs::exists(path));
        TrainConfig cfg;
        apply_config(cfg, parse_config_file(path));
        CHECK(cfg.loss.nu_end == values.first);
        CHECK(cfg.loss.q == values.second);
    }
}

TEST_CASE("loss mode is recorded in the manifest") {
    Scratch scratch("dmt_cli_mode");
    const std::string data = scratch / "face.csv";
    REQUIRE(cli::run({"generate", "smileface", "--size", "60", "--seed", "3", "-o", data}) == 0);
    auto args = tiny_train_args(data, scratch / "run");
    args.insert(args.end(), {"--mode", "lis"});
    REQUIRE(cli::run(args) == 0);
    CHECK(manifest_value(read_file(scratch / "run/manifest.txt"), "mode") == "lis");
}

TEST_CASE("config files reject unknown keys and report every bad line") {
    Scratch scratch("dmt_cli_cfg");
    const std::string data = scratch / "face.csv";
    REQUIRE(cli::run({"generate", "smileface", "--size", "60", "--seed", "3", "-o", data}) == 0);

    const std::string cfg_path = scratch / "bad.cfg";
    write_file(cfg_path, "epochs = 3\nturbo = on\nwarp_factor = 9\n");
    CHECK(cli::run({"train", "--data", data, "--label-col", "0", "--config", cfg_path, "--out",
                    scratch / "run"}) == 1);

    write_file(cfg_path, "epochs 3\nno equals here\nlr = 0.001\n");
    try {
        parse_config_file(cfg_path);
        FAIL("expected UsageError");
    } catch (const UsageError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 1") != std::string::npos);
        CHECK(msg.find("line 2") != std::string::npos);
    }

    // Flags override file values.
    write_file(cfg_path, "epochs = 7\nq = 8\nnu_start = 0.01\nnu_end = 10\n");
    auto args = tiny_train_args(data, scratch / "run2");
    args.insert(args.end(), {"--config", cfg_path});
    REQUIRE(cli::run(args) == 0);
    CHECK(manifest_value(read_file(scratch / "run2/manifest.txt"), "epochs") == "3");
}

TEST_CASE("eval scores an identity embedding perfectly") {
    Scratch scratch("dmt_cli_eval");
    SeededRng rng(3);
    const Matrix pts = oracle::random_matrix(40, 2, rng);
    const std::string input = scratch / "input.csv";
    write_file(input, cli::matrix_to_csv(pts));
    const std::string emb = scratch / "emb.csv";
    write_file(emb, cli::embedding_to_csv(pts, nullptr));

    const std::string report_path = scratch / "report.txt";
    REQUIRE(cli::run({"eval", "--input", input, "--embedding", emb, "-o", report_path}) == 0);
    const std::string report = read_file(report_path);
    CHECK(manifest_value(report, "con") == "1");
    CHECK(manifest_value(report, "tru") == "1");
    CHECK(manifest_value(report, "rre") == "0");
    CHECK(manifest_value(report, "srm") == "skipped: no labels");
    CHECK(manifest_value(report, "acc") == "skipped: no labels");

    // Row mismatch and duplicate ids are data errors.
    Matrix fewer(39, 2);
    for (size_t t = 0; t < fewer.data.size(); ++t) fewer.data[t] = pts.data[t];
    write_file(emb, cli::embedding_to_csv(fewer, nullptr));
    CHECK(cli::run({"eval", "--input", input, "--embedding", emb, "-o", report_path}) == 2);

    std::string dup = cli::embedding_to_csv(pts, nullptr);
    const size_t second_row = dup.find('\n', dup.find('\n') + 1) + 1;
    dup.replace(second_row, 1, "0");  // id 1 -> 0
    write_file(emb, dup);
    CHECK(cli::run({"eval", "--input", input, "--embedding", emb, "-o", report_path}) == 2);
}

TEST_CASE("plot renders one circle per point with a stable palette") {
    Scratch scratch("dmt_cli_plot");
    Matrix pts(3, 2);
    pts.data = {0.0, 0.0, 1.0, 0.5, -1.0, 2.0};
    const std::string emb = scratch / "emb.csv";
    write_file(emb, cli::embedding_to_csv(pts, nullptr));
    const std::string svg_path = scratch / "plot.svg";
    REQUIRE(cli::run({"plot", "--embedding", emb, "-o", svg_path}) == 0);
    const std::string svg = read_file(svg_path);
    CHECK(count_occurrences(svg, "<circle") == 3);

    REQUIRE(cli::run({"plot", "--embedding", emb, "-o", scratch / "again.svg"}) == 0);
    CHECK(read_file(scratch / "again.svg") == svg);

    Matrix many(10, 2);
    std::vector<int> labels(10);
    for (size_t i = 0; i < 10; ++i) {
        many.at(i, 0) = static_cast<double>(i);
        many.at(i, 1) = static_cast<double>(i % 3);
        labels[i] = static_cast<int>(i);
    }
    write_file(emb, cli::embedding_to_csv(many, &labels));
    REQUIRE(cli::run({"plot", "--embedding", emb, "-o", svg_path}) == 0);
    const std::string svg10 = read_file(svg_path);
    size_t distinct = 0;
    for (int l = 0; l < 10; ++l) {
        if (svg10.find(scatter_color(l)) != std::string::npos) ++distinct;
    }
    CHECK(distinct == 10);
    CHECK(count_occurrences(svg10, "label ") == 10);
}

TEST_CASE("layers exports per-layer csv and pca projections") {
    Scratch scratch("dmt_cli_layers");
    const std::string data = scratch / "face.csv";
    REQUIRE(cli::run({"generate", "smileface", "--size", "60", "--seed", "3", "-o", data}) == 0);
    const std::string run = scratch / "run";
    REQUIRE(cli::run(tiny_train_args(data, run)) == 0);

    const std::string layer_dir = scratch / "layers";
    REQUIRE(cli::run({"layers", "--ckpt", run + "/ckpt-final", "--data", data, "--label-col", "0",
                      "--out", layer_dir}) == 0);
    // Spec layers -1,8,2 resolve to [2, 8, 2]: three activation matrices.
    CHECK(fs::exists(layer_dir + "/layer0.csv"));
    CHECK(fs::exists(layer_dir + "/layer1.csv"));
    CHECK(fs::exists(layer_dir + "/layer2.csv"));
    CHECK_FALSE(fs::exists(layer_dir + "/layer3.csv"));
    CHECK(fs::exists(layer_dir + "/layer1_pca.csv"));  // width 8 projected
    CHECK(fs::exists(layer_dir + "/layer0.svg"));
    CHECK(fs::exists(layer_dir + "/layer2.svg"));

    // Mismatched data is a data error.
    const std::string wide = scratch / "wide.csv";
    REQUIRE(cli::run({"generate", "threegauss", "--size", "60", "--dim", "5", "-o", wide}) == 0);
    CHECK(cli::run({"layers", "--ckpt", run + "/ckpt-final", "--data", wide, "--label-col", "0",
                    "--out", layer_dir}) == 2);
}

TEST_CASE("pca agrees with an explicit 3x3 eigendecomposition") {
    SeededRng rng(5);
    Matrix x(200, 3);
    for (size_t i = 0; i < 200; ++i) {
        const double a = rng.normal(0.0, 3.0), b = rng.normal(0.0, 1.0), c = rng.normal(0.0, 0.2);
        x.at(i, 0) = a + 0.3 * b;
        x.at(i, 1) = b - 0.1 * c;
        x.at(i, 2) = c + 0.5 * a;
    }
    const PcaResult pca = pca_top2(x);

    std::vector<double> mean(3, 0.0);
    for (size_t i = 0; i < 200; ++i) {
        for (size_t j = 0; j < 3; ++j) mean[j] += x.at(i, j);
    }
    for (double& v : mean) v /= 200.0;
    Matrix cov(3, 3, 0.0);
    for (size_t i = 0; i < 200; ++i) {
        for (size_t a = 0; a < 3; ++a) {
            for (size_t b = 0; b < 3; ++b) {
                cov.at(a, b) += (x.at(i, a) - mean[a]) * (x.at(i, b) - mean[b]);
            }
        }
    }
    for (double& v : cov.data) v /= 199.0;
    const oracle::Eigen3 eig = oracle::eigen3_oracle(cov);

    CHECK(std::abs(pca.lambda1 - eig.values[0]) / eig.values[0] < 1e-8);
    CHECK(std::abs(pca.lambda2 - eig.values[1]) / eig.values[1] < 1e-8);
    double dot1 = 0.0, dot2 = 0.0;
    for (size_t j = 0; j < 3; ++j) {
        dot1 += pca.v1[j] * eig.vectors[0][j];
        dot2 += pca.v2[j] * eig.vectors[1][j];
    }
    CHECK(std::abs(std::abs(dot1) - 1.0) < 1e-8);
    CHECK(std::abs(std::abs(dot2) - 1.0) < 1e-8);
}

TEST_CASE("pca of 2-d data is distance preserving") {
    SeededRng rng(7);
    const Matrix x = oracle::random_matrix(50, 2, rng);
    const PcaResult pca = pca_top2(x);
    const auto d = dpc(x, pca.projected);
    REQUIRE(d.has_value());
    CHECK(std::abs(*d - 1.0) < 1e-9);
}

TEST_CASE("sweep runs every value and writes a summary") {
    Scratch scratch("dmt_cli_sweep");
    const std::string data = scratch / "face.csv";
    REQUIRE(cli::run({"generate", "smileface", "--size", "60", "--seed", "3", "-o", data}) == 0);

    const std::string out = scratch / "sweep";
    std::vector<std::string> args = {
        "sweep", "--data", data, "--label-col", "0", "--out", out,
        "--epochs", "2", "--batch-size", "60", "--layers", "-1,8,2",
        "--nu-start", "0.01", "--nu-end", "10", "--seed", "5",
        "--key", "q", "--values", "4,8"};
    REQUIRE(cli::run(args) == 0);
    CHECK(fs::exists(out + "/q=4/embedding.csv"));
    CHECK(fs::exists(out + "/q=8/embedding.csv"));
    const std::string summary = read_file(out + "/summary.csv");
    CHECK(count_lines(summary) == 3);  // header + 2 rows
    CHECK(summary.find("value,final_loss,con,tru,rre,dpc,srm,acc") == 0);

    // Determinism: rerunning reproduces the summary bytes.
    const std::string out2 = scratch / "sweep2";
    auto args2 = args;
    args2[6] = out2;
    REQUIRE(cli::run(args2) == 0);
    CHECK(read_file(out2 + "/summary.csv") == summary);

    // A single-value sweep matches a direct train run.
    const std::string out3 = scratch / "sweep3";
    auto args3 = args;
    args3[6] = out3;
    args3.back() = "8";
    REQUIRE(cli::run(args3) == 0);
    auto train_args = tiny_train_args(data, scratch / "direct");
    train_args[8] = "2";  // epochs = 2 to match the sweep
    REQUIRE(cli::run(train_args) == 0);
    CHECK(read_file(out3 + "/q=8/embedding.csv") == read_file(scratch / "direct/embedding.csv"));
}

TEST_CASE("a manifest replays to the identical embedding") {
    Scratch scratch("dmt_cli_replay");
    const std::string data = scratch / "face.csv";
    REQUIRE(cli::run({"generate", "smileface", "--size", "60", "--seed", "3", "-o", data}) == 0);
    const std::string out = scratch / "run";
    REQUIRE(cli::run(tiny_train_args(data, out)) == 0);

    const KeyValues manifest = parse_config_text(read_file(out + "/manifest.txt"));
    cli::TrainArgs replay;
    replay.out_dir = scratch / "replayed";
    const std::vector<std::string> config_keys = {
        "epochs", "batch_size", "lr", "seed", "eval_every", "knn_k", "nu_input", "autoencoder",
        "layers", "mode", "alpha", "beta", "mu0", "push_b", "nu_start", "nu_end", "q"};
    for (const auto& [k, v] : manifest) {
        if (k == "data_path") replay.data = v;
        else if (k == "label_col" && v != "none") replay.label_col = std::stoul(v);
        else if (k == "max_rows" && v != "none") replay.max_rows = std::stoul(v);
        else if (std::find(config_keys.begin(), config_keys.end(), k) != config_keys.end()) {
            replay.overrides.emplace_back(k, v);
        }
    }
    cli::cmd_train(replay);
    CHECK(read_file(scratch / "replayed/embedding.csv") == read_file(out + "/embedding.csv"));
}

TEST_CASE("exit codes distinguish usage, data and numerical failures") {
    Scratch scratch("dmt_cli_codes");
    CHECK(cli::run({"no-such-command"}) == 1);
    CHECK(cli::run({"train", "--data", scratch / "missing.csv", "--out", scratch / "o"}) == 2);

    const std::string data = scratch / "face.csv";
    REQUIRE(cli::run({"generate", "smileface", "--size", "60", "--seed", "3", "-o", data}) == 0);
    auto args = tiny_train_args(data, scratch / "run");
    args.insert(args.end(), {"--alpha", "1e308"});
    CHECK(cli::run(args) == 3);
}
