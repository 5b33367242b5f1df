#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hmtl/checkpoint.hpp"
#include "hmtl/error.hpp"
#include "hmtl/training.hpp"

namespace hmtl {

struct PreprocessConfig {
    std::string emoji_table;     // empty: the bundled table
    std::string unigram_table;   // empty: the bundled table
    SubstitutionMap substitutions = default_substitutions();
};

struct DataConfig {
    std::size_t max_len = 64;    // tokens per sequence, [CLS] included
    std::size_t min_freq = 1;
    std::size_t max_vocab = 0;   // 0: unlimited
    double threshold = 0.3;      // score binarization
    double val_fraction = 0.1;   // used when no validation file is given
};

/// Everything a CLI run needs, in one JSON document. Missing keys keep their defaults.
struct RunConfig {
    std::uint64_t seed = 13;
    ModelKind model = ModelKind::Mtl;
    PreprocessConfig preprocess;
    DataConfig data;
    EncoderConfig encoder;
    HeadConfig heads;
    TrainConfig train;
    std::size_t ensemble_size = 5;

    void validate() const {
        encoder.validate();
        train.validate();
        if (heads.hidden < 1) throw ConfigError("heads.hidden must be at least 1");
        if (data.max_len < 2) throw ConfigError("data.max_len must be at least 2");
        if (data.max_len > encoder.max_len) throw ConfigError("data.max_len exceeds encoder.max_len");
        if (data.min_freq < 1) throw ConfigError("data.min_freq must be at least 1");
        if (!(data.threshold > 0.0 && data.threshold < 1.0)) throw ConfigError("data.threshold must lie in (0, 1)");
        if (!(data.val_fraction > 0.0 && data.val_fraction < 1.0)) {
            throw ConfigError("data.val_fraction must lie in (0, 1)");
        }
        if (ensemble_size < 1) throw ConfigError("ensemble.size must be at least 1");
    }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, std::initializer_list<std::string_view> known,
                           const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (auto k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("unknown config key " + where + "." + key);
    }
}

template <class T>
void read_key(const nlohmann::json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key " + where + "." + key + " has the wrong type");
    }
}

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    using detail::read_key;
    using detail::reject_unknown;
    RunConfig c;
    reject_unknown(j, {"seed", "model", "preprocess", "data", "encoder", "heads", "train", "ensemble"}, "config");
    read_key(j, "seed", c.seed, "config");
    if (j.contains("model")) {
        std::string kind;
        read_key(j, "model", kind, "config");
        c.model = parse_model_kind(kind);
    }
    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        reject_unknown(p, {"emoji_table", "unigram_table", "substitutions"}, "preprocess");
        read_key(p, "emoji_table", c.preprocess.emoji_table, "preprocess");
        read_key(p, "unigram_table", c.preprocess.unigram_table, "preprocess");
        read_key(p, "substitutions", c.preprocess.substitutions, "preprocess");
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        reject_unknown(d, {"max_len", "min_freq", "max_vocab", "threshold", "val_fraction"}, "data");
        read_key(d, "max_len", c.data.max_len, "data");
        read_key(d, "min_freq", c.data.min_freq, "data");
        read_key(d, "max_vocab", c.data.max_vocab, "data");
        read_key(d, "threshold", c.data.threshold, "data");
        read_key(d, "val_fraction", c.data.val_fraction, "data");
    }
    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        reject_unknown(e, {"d_model", "n_layers", "n_heads", "d_ffn", "max_len", "vocab_size", "dropout"}, "encoder");
        read_key(e, "d_model", c.encoder.d_model, "encoder");
        read_key(e, "n_layers", c.encoder.n_layers, "encoder");
        read_key(e, "n_heads", c.encoder.n_heads, "encoder");
        read_key(e, "d_ffn", c.encoder.d_ffn, "encoder");
        read_key(e, "max_len", c.encoder.max_len, "encoder");
        read_key(e, "vocab_size", c.encoder.vocab_size, "encoder");
        read_key(e, "dropout", c.encoder.dropout, "encoder");
    }
    if (j.contains("heads")) {
        reject_unknown(j.at("heads"), {"hidden"}, "heads");
        read_key(j.at("heads"), "hidden", c.heads.hidden, "heads");
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        reject_unknown(t, {"learning_rate", "batch_size", "max_epochs", "patience", "loss_weights"}, "train");
        read_key(t, "learning_rate", c.train.learning_rate, "train");
        read_key(t, "batch_size", c.train.batch_size, "train");
        read_key(t, "max_epochs", c.train.max_epochs, "train");
        read_key(t, "patience", c.train.patience, "train");
        if (t.contains("loss_weights")) {
            std::vector<double> w;
            read_key(t, "loss_weights", w, "train");
            if (w.size() != 3) throw ConfigError("train.loss_weights needs three values");
            c.train.loss_weights = {w[0], w[1], w[2]};
        }
    }
    if (j.contains("ensemble")) {
        reject_unknown(j.at("ensemble"), {"size"}, "ensemble");
        read_key(j.at("ensemble"), "size", c.ensemble_size, "ensemble");
    }
    c.train.seed = c.seed;
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path + " is not valid JSON: " + e.what());
    }
    return run_config_from_json(j);
}

/// The fully resolved configuration; parsing it back gives the same RunConfig.
inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["seed"] = c.seed;
    j["model"] = to_string(c.model);
    j["preprocess"] = {{"emoji_table", c.preprocess.emoji_table},
                       {"unigram_table", c.preprocess.unigram_table},
                       {"substitutions", c.preprocess.substitutions}};
    j["data"] = {{"max_len", c.data.max_len},
                 {"min_freq", c.data.min_freq},
                 {"max_vocab", c.data.max_vocab},
                 {"threshold", c.data.threshold},
                 {"val_fraction", c.data.val_fraction}};
    j["encoder"] = encoder_config_json(c.encoder);
    j["heads"] = {{"hidden", c.heads.hidden}};
    j["train"] = {{"learning_rate", c.train.learning_rate},
                  {"batch_size", c.train.batch_size},
                  {"max_epochs", c.train.max_epochs},
                  {"patience", c.train.patience},
                  {"loss_weights", {c.train.loss_weights.a, c.train.loss_weights.b, c.train.loss_weights.c}}};
    j["ensemble"] = {{"size", c.ensemble_size}};
    return j;
}

}  // namespace hmtl
