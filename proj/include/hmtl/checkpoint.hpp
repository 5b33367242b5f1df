#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hmtl/error.hpp"
#include "hmtl/mtl.hpp"
#include "hmtl/tokenizer.hpp"

namespace hmtl {

inline constexpr std::string_view kCheckpointFormat = "hmtl-checkpoint";
inline constexpr int kCheckpointVersion = 1;

/// What a checkpoint holds: the model and the vocabulary it was trained with.
struct Checkpoint {
    MtlModel model;
    Vocabulary vocab;
};

inline nlohmann::json encoder_config_json(const EncoderConfig& c) {
    return {{"d_model", c.d_model}, {"n_layers", c.n_layers}, {"n_heads", c.n_heads}, {"d_ffn", c.d_ffn},
            {"max_len", c.max_len}, {"vocab_size", c.vocab_size}, {"dropout", c.dropout}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
    EncoderConfig c;
    c.d_model = j.at("d_model").get<std::size_t>();
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.d_ffn = j.at("d_ffn").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    return c;
}

/// Doubles are written in shortest round-trip form, so save/load is bit-exact.
inline std::string checkpoint_to_string(const MtlModel& model, const Vocabulary& vocab) {
    if (model.encoder.config.vocab_size != vocab.size()) throw Error("checkpoint: vocabulary does not match the model");
    nlohmann::json j;
    j["format"] = kCheckpointFormat;
    j["version"] = kCheckpointVersion;
    j["kind"] = to_string(model.kind);
    j["encoder"] = encoder_config_json(model.encoder.config);
    j["head_hidden"] = model.head_config.hidden;
    j["loss_weights"] = {model.loss_weights.a, model.loss_weights.b, model.loss_weights.c};
    nlohmann::json tokens = nlohmann::json::array();
    for (TokenId i = 0; i < vocab.size(); ++i) tokens.push_back(vocab.token(i) + "\t" + std::to_string(i));
    j["vocabulary"] = std::move(tokens);
    nlohmann::json params = nlohmann::json::array();
    model.visit([&](const std::string& name, const Matrix& m) {
        if (!m.all_finite()) throw NumericError("checkpoint: parameter " + name + " is not finite");
        params.push_back({{"name", name}, {"shape", {m.rows, m.cols}}, {"values", m.data}});
    });
    j["parameters"] = std::move(params);
    return j.dump();
}

inline Checkpoint checkpoint_from_string(const std::string& text, const std::string& source = "<memory>") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(source + ": not a checkpoint (" + e.what() + ")");
    }
    try {
        if (j.value("format", std::string()) != kCheckpointFormat) throw Error(source + ": not a checkpoint");
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw Error(source + ": unsupported checkpoint version " + std::to_string(version));
        }
        std::vector<std::string> tokens;
        for (const auto& line : j.at("vocabulary")) {
            const auto s = line.get<std::string>();
            const auto tab = s.rfind('\t');
            if (tab == std::string::npos || s.substr(tab + 1) != std::to_string(tokens.size())) {
                throw Error(source + ": malformed vocabulary entry '" + s + "'");
            }
            tokens.push_back(s.substr(0, tab));
        }
        Checkpoint ck{{}, Vocabulary::from_tokens(tokens)};
        const auto w = j.at("loss_weights");
        const LossWeights weights{w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>()};
        const EncoderConfig enc = encoder_config_from_json(j.at("encoder"));
        if (enc.vocab_size != ck.vocab.size()) throw Error(source + ": vocabulary size does not match encoder");
        // Build the parameter layout, then overwrite every array from the file.
        ck.model = init_model(enc, HeadConfig{j.at("head_hidden").get<std::size_t>()},
                              parse_model_kind(j.at("kind").get<std::string>()), weights, 0);
        const auto& params = j.at("parameters");
        std::size_t k = 0;
        ck.model.visit([&](const std::string& name, Matrix& m) {
            if (k >= params.size()) throw Error(source + ": missing parameter " + name);
            const auto& p = params[k++];
            if (p.at("name").get<std::string>() != name) {
                throw Error(source + ": expected parameter " + name + ", found " + p.at("name").get<std::string>());
            }
            const auto shape = p.at("shape");
            if (shape.at(0).get<std::size_t>() != m.rows || shape.at(1).get<std::size_t>() != m.cols) {
                throw Error(source + ": parameter " + name + " has the wrong shape");
            }
            auto values = p.at("values").get<std::vector<double>>();
            if (values.size() != m.size()) throw Error(source + ": parameter " + name + " has the wrong size");
            m.data = std::move(values);
        });
        if (k != params.size()) throw Error(source + ": unexpected extra parameters");
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw Error(source + ": malformed checkpoint (" + e.what() + ")");
    }
}

inline void save_checkpoint(const std::string& path, const MtlModel& model, const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << checkpoint_to_string(model, vocab) << '\n';
    if (!out) throw Error("failed writing " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return checkpoint_from_string(buf.str(), path);
}

}  // namespace hmtl
