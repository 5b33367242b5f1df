#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hmtl/autodiff.hpp"
#include "hmtl/error.hpp"
#include "hmtl/matrix.hpp"
#include "hmtl/random.hpp"
#include "hmtl/tokenizer.hpp"

namespace hmtl {

struct EncoderConfig {
    std::size_t d_model = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 2;
    std::size_t d_ffn = 128;
    std::size_t max_len = 64;
    std::size_t vocab_size = 0;
    double dropout = 0.1;

    void validate() const {
        if (d_model < 1 || n_layers < 1 || n_heads < 1 || d_ffn < 1 || vocab_size < 1) {
            throw ConfigError("encoder dimensions must all be at least 1");
        }
        if (d_model % n_heads != 0) {
            throw ConfigError("d_model (" + std::to_string(d_model) + ") is not divisible by n_heads (" +
                              std::to_string(n_heads) + ")");
        }
        if (max_len < 2) throw ConfigError("max_len must be at least 2");
        if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    }

    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Affine map x * weight + bias with weight [in x out] and bias [1 x out].
struct Linear {
    Matrix weight;
    Matrix bias;

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".weight", weight);
        f(prefix + ".bias", bias);
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) const {
        f(prefix + ".weight", weight);
        f(prefix + ".bias", bias);
    }

    Var apply(Graph& g, Var x) const { return g.linear(x, g.param(weight), g.param(bias)); }
};

struct LayerNorm {
    Matrix gain;
    Matrix shift;

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".gain", gain);
        f(prefix + ".shift", shift);
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) const {
        f(prefix + ".gain", gain);
        f(prefix + ".shift", shift);
    }

    Var apply(Graph& g, Var x) const { return g.layer_norm(x, g.param(gain), g.param(shift)); }
};

/// Fan-in scaled uniform initialization: U(-1/sqrt(in), 1/sqrt(in)), zero bias.
inline Linear make_linear(std::size_t in, std::size_t out, Rng& rng) {
    Linear l{Matrix(in, out), Matrix(1, out)};
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& w : l.weight.data) w = rng.uniform(-bound, bound);
    return l;
}

inline LayerNorm make_layer_norm(std::size_t width) { return {Matrix(1, width, 1.0), Matrix(1, width, 0.0)}; }

struct EncoderLayer {
    Linear query, key, value, output;
    LayerNorm attention_norm;
    Linear ffn_in, ffn_out;
    LayerNorm ffn_norm;

    template <class Self, class F>
    static void visit_all(Self& self, const std::string& prefix, F&& f) {
        self.query.visit(prefix + ".query", f);
        self.key.visit(prefix + ".key", f);
        self.value.visit(prefix + ".value", f);
        self.output.visit(prefix + ".attention_output", f);
        self.attention_norm.visit(prefix + ".attention_norm", f);
        self.ffn_in.visit(prefix + ".ffn_in", f);
        self.ffn_out.visit(prefix + ".ffn_out", f);
        self.ffn_norm.visit(prefix + ".ffn_norm", f);
    }
};

struct EncoderParams {
    EncoderConfig config;
    Matrix token_embedding;     // [vocab_size x d_model]
    Matrix position_embedding;  // [max_len x d_model]
    LayerNorm embedding_norm;
    std::vector<EncoderLayer> layers;

    template <class F>
    void visit(F&& f) {
        visit_all(*this, f);
    }
    template <class F>
    void visit(F&& f) const {
        visit_all(*this, f);
    }

private:
    template <class Self, class F>
    static void visit_all(Self& self, F& f) {
        f(std::string("encoder.token_embedding"), self.token_embedding);
        f(std::string("encoder.position_embedding"), self.position_embedding);
        self.embedding_norm.visit("encoder.embedding_norm", f);
        for (std::size_t i = 0; i < self.layers.size(); ++i) {
            EncoderLayer::visit_all(self.layers[i], "encoder.layer" + std::to_string(i), f);
        }
    }
};

/// Random initialization; identical (config, seed) pairs give identical parameters.
inline EncoderParams init_encoder(const EncoderConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    EncoderParams p;
    p.config = config;
    p.token_embedding = Matrix(config.vocab_size, config.d_model);
    for (double& w : p.token_embedding.data) w = rng.uniform(-0.05, 0.05);
    p.position_embedding = Matrix(config.max_len, config.d_model);
    for (double& w : p.position_embedding.data) w = rng.uniform(-0.05, 0.05);
    p.embedding_norm = make_layer_norm(config.d_model);
    for (std::size_t i = 0; i < config.n_layers; ++i) {
        EncoderLayer layer;
        layer.query = make_linear(config.d_model, config.d_model, rng);
        layer.key = make_linear(config.d_model, config.d_model, rng);
        layer.value = make_linear(config.d_model, config.d_model, rng);
        layer.output = make_linear(config.d_model, config.d_model, rng);
        layer.attention_norm = make_layer_norm(config.d_model);
        layer.ffn_in = make_linear(config.d_model, config.d_ffn, rng);
        layer.ffn_out = make_linear(config.d_ffn, config.d_model, rng);
        layer.ffn_norm = make_layer_norm(config.d_model);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

/// A padded batch flattened for the graph: row b * seq_len + i is token i of sequence b.
struct Batch {
    std::size_t size = 0;
    std::size_t seq_len = 0;
    std::vector<TokenId> ids;
    std::vector<std::size_t> lengths;

    SequenceLayout layout() const { return {size, seq_len, lengths}; }
};

inline Batch make_batch(std::span<const TokenSequence* const> sequences) {
    if (sequences.empty()) throw Error("empty batch");
    Batch b;
    b.size = sequences.size();
    b.seq_len = sequences.front()->ids.size();
    for (const auto* seq : sequences) {
        if (seq->ids.size() != b.seq_len || seq->mask.size() != b.seq_len) {
            throw Error("sequences in a batch must share one length");
        }
        std::size_t len = 0;
        while (len < seq->mask.size() && seq->mask[len] != 0) ++len;
        for (std::size_t i = len; i < seq->mask.size(); ++i) {
            if (seq->mask[i] != 0) throw Error("attention mask must be a prefix of ones");
        }
        if (len == 0) throw Error("sequence has no real tokens");
        b.ids.insert(b.ids.end(), seq->ids.begin(), seq->ids.end());
        b.lengths.push_back(len);
    }
    return b;
}

inline Batch make_batch(const std::vector<TokenSequence>& sequences) {
    std::vector<const TokenSequence*> ptrs;
    for (const auto& s : sequences) ptrs.push_back(&s);
    return make_batch(std::span<const TokenSequence* const>(ptrs));
}

/// Builds the encoder computation; returns [batch * seq_len x d_model].
/// Dropout is active only when `dropout_rng` is non-null.
inline Var encoder_forward(Graph& g, const EncoderParams& p, const Batch& batch, Rng* dropout_rng = nullptr) {
    const auto& cfg = p.config;
    if (batch.seq_len > cfg.max_len) throw Error("sequence longer than the encoder's max_len");
    std::vector<std::size_t> token_rows(batch.ids.size());
    std::vector<std::size_t> position_rows(batch.ids.size());
    for (std::size_t i = 0; i < batch.ids.size(); ++i) {
        if (batch.ids[i] >= cfg.vocab_size) {
            throw Error("token id " + std::to_string(batch.ids[i]) + " outside vocabulary of size " +
                        std::to_string(cfg.vocab_size));
        }
        token_rows[i] = batch.ids[i];
        position_rows[i] = i % batch.seq_len;
    }
    const auto layout = batch.layout();
    Var x = g.add(g.gather_rows(g.param(p.token_embedding), std::move(token_rows)),
                  g.gather_rows(g.param(p.position_embedding), std::move(position_rows)));
    x = g.dropout(p.embedding_norm.apply(g, x), cfg.dropout, dropout_rng);
    for (const auto& layer : p.layers) {
        Var q = layer.query.apply(g, x);
        Var k = layer.key.apply(g, x);
        Var v = layer.value.apply(g, x);
        Var attended = g.attention(q, k, v, layout, cfg.n_heads);
        attended = g.dropout(layer.output.apply(g, attended), cfg.dropout, dropout_rng);
        x = layer.attention_norm.apply(g, g.add(x, attended));
        Var hidden = g.gelu(layer.ffn_in.apply(g, x));
        Var ffn = g.dropout(layer.ffn_out.apply(g, hidden), cfg.dropout, dropout_rng);
        x = layer.ffn_norm.apply(g, g.add(x, ffn));
    }
    return x;
}

/// Encoder output for a batch, evaluated without dropout.
struct ContextualEmbeddings {
    std::size_t batch = 0;
    std::size_t seq_len = 0;
    std::size_t width = 0;
    Matrix values;  // [batch * seq_len x width]
    std::vector<std::size_t> lengths;

    double at(std::size_t b, std::size_t pos, std::size_t j) const { return values(b * seq_len + pos, j); }
};

inline ContextualEmbeddings encode_batch(const EncoderParams& p, const Batch& batch) {
    Graph g(false);
    Var out = encoder_forward(g, p, batch);
    return {batch.size, batch.seq_len, p.config.d_model, g.value(out), batch.lengths};
}

}  // namespace hmtl
