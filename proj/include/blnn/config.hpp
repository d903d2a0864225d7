#pragma once

// Flat "key = value" training configuration files.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>

#include "blnn/errors.hpp"
#include "blnn/graph.hpp"
#include "blnn/trainer.hpp"

namespace blnn {

using ConfigMap = std::map<std::string, std::string>;

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// ignored; a repeated key keeps its last value.
inline ConfigMap parse_config(std::istream& in, const std::string& source = "config") {
    ConfigMap out;
    std::string line;
    auto trim = [](std::string_view s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string_view::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return std::string(s.substr(b, e - b + 1));
    };
    for (std::size_t ln = 1; std::getline(in, line); ++ln) {
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError(source + ":" + std::to_string(ln) + ": expected key = value");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string val = trim(std::string_view(t).substr(eq + 1));
        if (key.empty()) throw ParseError(source + ":" + std::to_string(ln) + ": empty key");
        out[key] = val;
    }
    return out;
}

inline ConfigMap load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config " + path.string());
    return parse_config(in, path.filename().string());
}

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    if (!parse_number(v, out)) throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    return out;
}

inline std::size_t to_count(const std::string& key, const std::string& v) {
    unsigned long long out = 0;
    if (!parse_number(v, out)) throw ConfigError("config key '" + key + "': expected a nonnegative integer, got '" + v + "'");
    return static_cast<std::size_t>(out);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace detail

/// Applies every entry to cfg. Unknown keys are rejected.
inline void apply_config(const ConfigMap& m, TrainConfig& cfg) {
    using namespace detail;
    for (const auto& [k, v] : m) {
        if (k == "epochs") cfg.epochs = to_count(k, v);
        else if (k == "lr") cfg.lr = to_double(k, v);
        else if (k == "warmup_epochs") cfg.warmup_epochs = to_count(k, v);
        else if (k == "weight_decay") cfg.weight_decay = to_double(k, v);
        else if (k == "seed") cfg.seed = to_count(k, v);
        else if (k == "p_m1") cfg.augment.p_m1 = to_double(k, v);
        else if (k == "p_d1") cfg.augment.p_d1 = to_double(k, v);
        else if (k == "p_m2") cfg.augment.p_m2 = to_double(k, v);
        else if (k == "p_d2") cfg.augment.p_d2 = to_double(k, v);
        else if (k == "variant") cfg.loss.variant = parse_variant(v);
        else if (k == "tau") cfg.loss.tau = to_double(k, v);
        else if (k == "symmetric") cfg.loss.symmetric = to_bool(k, v);
        else if (k == "grad_through_scores") cfg.loss.grad_through_scores = to_bool(k, v);
        else if (k == "neighbor_term_weight") cfg.loss.neighbor_term_weight = to_double(k, v);
        else if (k == "ema_t_base") cfg.ema_t_base = to_double(k, v);
        else if (k == "eval_every") cfg.eval_every = to_count(k, v);
        else if (k == "eval_splits") cfg.eval_splits = to_count(k, v);
        else if (k == "n_layers") cfg.n_layers = to_count(k, v);
        else if (k == "hidden_dim") cfg.hidden_dim = to_count(k, v);
        else if (k == "embed_dim") cfg.embed_dim = to_count(k, v);
        else if (k == "predictor_hidden") cfg.predictor_hidden = to_count(k, v);
        else if (k == "batchnorm") cfg.batchnorm = to_bool(k, v);
        else if (k == "bn_momentum") cfg.bn_momentum = to_double(k, v);
        else throw ConfigError("unknown config key '" + k + "'");
    }
    cfg.validate();
}

}  // namespace blnn
