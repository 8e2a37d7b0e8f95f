#ifndef DMT_CONFIG_HPP
#define DMT_CONFIG_HPP

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "losses.hpp"
#include "trainer.hpp"

namespace dmt {

/// Ordered key=value pairs from a config file or CLI overrides.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

inline double parse_double_strict(const std::string& key, const std::string& value) {
    bool ok = false;
    const double v = parse_double(value, ok);
    if (!ok) throw UsageError("config: key '" + key + "' has non-numeric value '" + value + "'");
    return v;
}

inline uint64_t parse_u64_strict(const std::string& key, const std::string& value) {
    const double v = parse_double_strict(key, value);
    if (v < 0 || v != std::floor(v)) {
        throw UsageError("config: key '" + key + "' must be a nonnegative integer");
    }
    return static_cast<uint64_t>(v);
}

inline bool parse_bool_strict(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw UsageError("config: key '" + key + "' must be true or false");
}

inline std::vector<int> parse_layers(const std::string& value) {
    std::vector<int> dims;
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        bool ok = false;
        const double v = parse_double(tok, ok);
        if (!ok || v != std::floor(v)) {
            throw UsageError("config: layers entry '" + tok + "' is not an integer");
        }
        dims.push_back(static_cast<int>(v));
    }
    if (dims.size() < 2) throw UsageError("config: layers needs at least 2 widths");
    return dims;
}

}  // namespace detail

/**
 * Parses flat `key = value` text: one pair per line, `#` starts a comment.
 * All malformed lines are reported together.
 */
inline KeyValues parse_config_text(const std::string& text) {
    KeyValues kv;
    std::vector<std::string> problems;
    size_t lineno = 0;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            problems.push_back("line " + std::to_string(lineno) + ": missing '='");
            continue;
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty()) {
            problems.push_back("line " + std::to_string(lineno) + ": empty key");
            continue;
        }
        kv.emplace_back(key, value);
    }
    if (!problems.empty()) {
        std::string msg = "config parse errors:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw UsageError(msg);
    }
    return kv;
}

inline KeyValues parse_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

/**
 * Applies key=value pairs onto a training configuration. Unknown keys are a
 * hard error; every offender is listed.
 */
inline void apply_config(TrainConfig& cfg, const KeyValues& kv) {
    std::vector<std::string> unknown;
    for (const auto& [key, value] : kv) {
        if (key == "epochs") cfg.epochs = detail::parse_u64_strict(key, value);
        else if (key == "batch_size") cfg.batch_size = detail::parse_u64_strict(key, value);
        else if (key == "lr") cfg.lr = detail::parse_double_strict(key, value);
        else if (key == "seed") cfg.seed = detail::parse_u64_strict(key, value);
        else if (key == "eval_every") cfg.eval_every = detail::parse_u64_strict(key, value);
        else if (key == "knn_k") cfg.knn_k = detail::parse_u64_strict(key, value);
        else if (key == "nu_input") cfg.nu_input = detail::parse_double_strict(key, value);
        else if (key == "autoencoder") cfg.autoencoder = detail::parse_bool_strict(key, value);
        else if (key == "layers") cfg.layers.dims = detail::parse_layers(value);
        else if (key == "mode") cfg.loss.mode = loss_mode_from_string(value);
        else if (key == "alpha") cfg.loss.alpha = detail::parse_double_strict(key, value);
        else if (key == "beta") cfg.loss.beta = detail::parse_double_strict(key, value);
        else if (key == "mu0") cfg.loss.mu0 = detail::parse_double_strict(key, value);
        else if (key == "push_b") {
            cfg.loss.push_b = (value == "median") ? -1.0 : detail::parse_double_strict(key, value);
        }
        else if (key == "nu_start") cfg.loss.nu_start = detail::parse_double_strict(key, value);
        else if (key == "nu_end") cfg.loss.nu_end = detail::parse_double_strict(key, value);
        else if (key == "q") cfg.loss.q = detail::parse_double_strict(key, value);
        else unknown.push_back(key);
    }
    if (!unknown.empty()) {
        std::string msg = "config: unknown keys:";
        for (const auto& k : unknown) msg += " '" + k + "'";
        throw UsageError(msg);
    }
}

/// Canonical echo of a resolved configuration, one pair per field.
inline KeyValues config_to_kv(const TrainConfig& cfg) {
    KeyValues kv;
    kv.emplace_back("epochs", std::to_string(cfg.epochs));
    kv.emplace_back("batch_size", std::to_string(cfg.batch_size));
    kv.emplace_back("lr", format_double(cfg.lr));
    kv.emplace_back("seed", std::to_string(cfg.seed));
    kv.emplace_back("eval_every", std::to_string(cfg.eval_every));
    kv.emplace_back("knn_k", std::to_string(cfg.knn_k));
    kv.emplace_back("nu_input", format_double(cfg.nu_input));
    kv.emplace_back("autoencoder", cfg.autoencoder ? "true" : "false");
    std::string layers;
    for (size_t i = 0; i < cfg.layers.dims.size(); ++i) {
        if (i > 0) layers += ',';
        layers += std::to_string(cfg.layers.dims[i]);
    }
    kv.emplace_back("layers", layers);
    kv.emplace_back("mode", to_string(cfg.loss.mode));
    kv.emplace_back("alpha", format_double(cfg.loss.alpha));
    kv.emplace_back("beta", format_double(cfg.loss.beta));
    kv.emplace_back("mu0", format_double(cfg.loss.mu0));
    kv.emplace_back("push_b", cfg.loss.push_b < 0 ? "median" : format_double(cfg.loss.push_b));
    kv.emplace_back("nu_start", format_double(cfg.loss.nu_start));
    kv.emplace_back("nu_end", format_double(cfg.loss.nu_end));
    kv.emplace_back("q", format_double(cfg.loss.q));
    return kv;
}

/// Dataset-specific hyperparameter presets: (nu_end, q) per known dataset;
/// every other knob keeps its default.
inline const std::map<std::string, std::pair<double, double>>& preset_table() {
    static const std::map<std::string, std::pair<double, double>> table = {
        {"smileface", {100.0, 40.0}},
        {"threegauss", {100.0, 40.0}},
        {"repeatpoints", {100.0, 40.0}},
        {"swissroll", {100.0, 40.0}},
        {"coil20", {100.0, 10.0}},
        {"coil100", {100.0, 10.0}},
        {"mnist", {0.001, 20.0}},
        {"fmnist", {0.001, 20.0}},
        {"cifar3", {0.001, 10.0}},
    };
    return table;
}

inline KeyValues preset_config(const std::string& name) {
    const auto& table = preset_table();
    auto it = table.find(name);
    if (it == table.end()) {
        std::string names;
        for (const auto& [n, _] : table) names += (names.empty() ? "" : ", ") + n;
        throw UsageError("unknown preset '" + name + "' (known: " + names + ")");
    }
    KeyValues kv;
    kv.emplace_back("nu_end", format_double(it->second.first));
    kv.emplace_back("q", format_double(it->second.second));
    return kv;
}

/// Contents of the shipped preset file for one dataset row.
inline std::string preset_file_text(const std::string& name) {
    const auto kv = preset_config(name);
    std::string text = "# preset: " + name + "\n";
    for (const auto& [k, v] : kv) text += k + " = " + v + "\n";
    return text;
}

/**
 * Resolution order: defaults, then preset, then config file, then explicit
 * CLI overrides.
 */
inline TrainConfig resolve_config(const std::string& preset_name, const std::string& config_path,
                                  const KeyValues& overrides) {
    TrainConfig cfg;
    if (!preset_name.empty()) apply_config(cfg, preset_config(preset_name));
    if (!config_path.empty()) apply_config(cfg, parse_config_file(config_path));
    apply_config(cfg, overrides);
    cfg.validate();
    return cfg;
}

}

#endif
