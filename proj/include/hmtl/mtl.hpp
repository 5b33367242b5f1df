#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hmtl/autodiff.hpp"
#include "hmtl/corpus.hpp"
#include "hmtl/encoder.hpp"
#include "hmtl/labels.hpp"
#include "hmtl/textnorm.hpp"
#include "hmtl/tokenizer.hpp"

namespace hmtl {

enum class ModelKind : std::uint8_t {
    Mtl,       // shared encoder + one recurrent head per task
    Baseline,  // shared encoder + linear layer on the [CLS] position, task A only
};

inline std::string_view to_string(ModelKind k) { return k == ModelKind::Mtl ? "mtl" : "baseline"; }

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "mtl") return ModelKind::Mtl;
    if (s == "baseline") return ModelKind::Baseline;
    throw ConfigError("unknown model kind '" + std::string(s) + "' (expected mtl or baseline)");
}

struct LossWeights {
    double a = 0.4;
    double b = 0.3;
    double c = 0.3;

    void validate() const {
        if (!(a >= 0.0 && b >= 0.0 && c >= 0.0)) throw ConfigError("loss weights must be non-negative");
        if (std::abs(a + b + c - 1.0) > 1e-9) throw ConfigError("loss weights must sum to 1");
    }

    double operator[](Task t) const { return t == Task::A ? a : (t == Task::B ? b : c); }

    friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// L = w_A * L_A + w_B * L_B + w_C * L_C.
inline double combine_losses(const std::array<double, 3>& task_losses, const LossWeights& w) {
    w.validate();
    return w.a * task_losses[0] + w.b * task_losses[1] + w.c * task_losses[2];
}

struct HeadConfig {
    std::size_t hidden = 64;

    friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

/// Single-layer unidirectional LSTM over the encoder output followed by a
/// projection of its final hidden state. Gate blocks are ordered i, f, g, o.
struct TaskHead {
    Task task = Task::A;
    Matrix input_weight;      // [d_model x 4h]
    Matrix recurrent_weight;  // [h x 4h]
    Matrix bias;              // [1 x 4h]
    Linear projection;        // [h x n_classes]

    std::size_t hidden() const { return recurrent_weight.rows; }
    std::size_t classes() const { return projection.weight.cols; }

    template <class Self, class F>
    static void visit_all(Self& self, F& f) {
        const std::string prefix = "head_" + std::string(task_name(self.task));
        f(prefix + ".lstm.input_weight", self.input_weight);
        f(prefix + ".lstm.recurrent_weight", self.recurrent_weight);
        f(prefix + ".lstm.bias", self.bias);
        self.projection.visit(prefix + ".projection", f);
    }
};

inline TaskHead make_head(Task task, std::size_t input, std::size_t hidden, Rng& rng) {
    TaskHead h;
    h.task = task;
    h.input_weight = Matrix(input, 4 * hidden);
    h.recurrent_weight = Matrix(hidden, 4 * hidden);
    h.bias = Matrix(1, 4 * hidden);
    const double in_bound = 1.0 / std::sqrt(static_cast<double>(input));
    const double rec_bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (double& w : h.input_weight.data) w = rng.uniform(-in_bound, in_bound);
    for (double& w : h.recurrent_weight.data) w = rng.uniform(-rec_bound, rec_bound);
    h.projection = make_linear(hidden, class_count(task), rng);
    return h;
}

struct MtlModel {
    ModelKind kind = ModelKind::Mtl;
    EncoderParams encoder;
    HeadConfig head_config;
    std::array<TaskHead, 3> heads;
    Linear baseline;  // [d_model x 2], used by ModelKind::Baseline
    LossWeights loss_weights;

    const TaskHead& head(Task t) const { return heads[static_cast<std::size_t>(t)]; }

    template <class F>
    void visit(F&& f) {
        visit_all(*this, f);
    }
    template <class F>
    void visit(F&& f) const {
        visit_all(*this, f);
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        visit([&](const std::string&, const Matrix& m) { n += m.size(); });
        return n;
    }

private:
    template <class Self, class F>
    static void visit_all(Self& self, F& f) {
        self.encoder.visit(f);
        for (auto& h : self.heads) TaskHead::visit_all(h, f);
        self.baseline.visit("baseline", f);
    }
};

inline MtlModel init_model(const EncoderConfig& encoder, const HeadConfig& heads, ModelKind kind,
                           const LossWeights& weights, std::uint64_t seed) {
    weights.validate();
    if (heads.hidden < 1) throw ConfigError("head hidden width must be at least 1");
    Rng rng(seed);
    MtlModel m;
    m.kind = kind;
    m.encoder = init_encoder(encoder, rng.fork());
    m.head_config = heads;
    Rng head_rng(rng.fork());
    for (Task t : kTasks) m.heads[static_cast<std::size_t>(t)] = make_head(t, encoder.d_model, heads.hidden, head_rng);
    m.baseline = make_linear(encoder.d_model, class_count(Task::A), head_rng);
    m.loss_weights = weights;
    return m;
}

/// Runs the head's LSTM over each sequence's real positions and returns
/// logits [batch x classes] from the final hidden state.
inline Var head_logits(Graph& g, const TaskHead& head, Var embeddings, const Batch& batch) {
    const std::size_t h = head.hidden();
    Var projected = g.linear(embeddings, g.param(head.input_weight), g.param(head.bias));
    Var recurrent = g.param(head.recurrent_weight);
    Var hidden = g.constant(Matrix(batch.size, h));
    Var cell = g.constant(Matrix(batch.size, h));
    std::size_t steps = 0;
    for (auto len : batch.lengths) steps = std::max(steps, len);
    std::vector<std::size_t> rows(batch.size);
    std::vector<bool> active(batch.size);
    for (std::size_t t = 0; t < steps; ++t) {
        bool all_active = true;
        for (std::size_t b = 0; b < batch.size; ++b) {
            rows[b] = b * batch.seq_len + t;
            active[b] = t < batch.lengths[b];
            all_active = all_active && active[b];
        }
        Var gates = g.add(g.gather_rows(projected, rows), g.matmul(hidden, recurrent));
        Var in_gate = g.sigmoid(g.slice_cols(gates, 0, h));
        Var forget_gate = g.sigmoid(g.slice_cols(gates, h, h));
        Var candidate = g.tanh(g.slice_cols(gates, 2 * h, h));
        Var out_gate = g.sigmoid(g.slice_cols(gates, 3 * h, h));
        Var next_cell = g.add(g.mul(forget_gate, cell), g.mul(in_gate, candidate));
        Var next_hidden = g.mul(out_gate, g.tanh(next_cell));
        if (all_active) {
            cell = next_cell;
            hidden = next_hidden;
        } else {
            cell = g.select_where(active, next_cell, cell);
            hidden = g.select_where(active, next_hidden, hidden);
        }
    }
    return head.projection.apply(g, hidden);
}

/// Logits [batch x 2] from the [CLS] position through the baseline linear layer.
inline Var baseline_logits(Graph& g, const MtlModel& model, Var embeddings, const Batch& batch) {
    std::vector<std::size_t> cls_rows(batch.size);
    for (std::size_t b = 0; b < batch.size; ++b) cls_rows[b] = b * batch.seq_len;
    return model.baseline.apply(g, g.gather_rows(embeddings, std::move(cls_rows)));
}

/// Logits of every task the model predicts: three for MTL, A only for the baseline.
struct TaskLogits {
    std::array<Var, 3> logits{};
    std::size_t tasks = 3;
};

inline TaskLogits model_logits(Graph& g, const MtlModel& model, const Batch& batch, Rng* dropout_rng = nullptr) {
    if (batch.size == 0) throw Error("empty batch");
    Var emb = encoder_forward(g, model.encoder, batch, dropout_rng);
    TaskLogits out;
    if (model.kind == ModelKind::Baseline) {
        out.logits[0] = baseline_logits(g, model, emb, batch);
        out.tasks = 1;
        return out;
    }
    for (Task t : kTasks) out.logits[static_cast<std::size_t>(t)] = head_logits(g, model.head(t), emb, batch);
    return out;
}

inline std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.begin(), logits.end());
    const double mx = *std::max_element(p.begin(), p.end());
    double z = 0.0;
    for (double& v : p) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : p) v /= z;
    return p;
}

/// First index of the largest value.
inline std::size_t argmax(std::span<const double> values) {
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

/// Per-task class distributions for one input. A baseline model only fills task A.
struct PredictionTriple {
    std::array<std::vector<double>, 3> probs;

    bool has(Task t) const { return !probs[static_cast<std::size_t>(t)].empty(); }
    const std::vector<double>& probabilities(Task t) const { return probs[static_cast<std::size_t>(t)]; }

    std::size_t label_index(Task t) const {
        if (!has(t)) throw Error("no prediction for task " + std::string(task_name(t)));
        return argmax(probabilities(t));
    }

    LabelA a() const { return label_from_index<LabelA>(label_index(Task::A)); }
    LabelB b() const { return label_from_index<LabelB>(label_index(Task::B)); }
    LabelC c() const { return label_from_index<LabelC>(label_index(Task::C)); }

    friend bool operator==(const PredictionTriple&, const PredictionTriple&) = default;
};

inline std::vector<PredictionTriple> predictions_from_logits(const Graph& g, const TaskLogits& logits,
                                                             std::size_t batch_size) {
    std::vector<PredictionTriple> out(batch_size);
    for (std::size_t t = 0; t < logits.tasks; ++t) {
        const Matrix& l = g.value(logits.logits[t]);
        for (std::size_t b = 0; b < batch_size; ++b) out[b].probs[t] = softmax(l.row(b));
    }
    return out;
}

/// Evaluation-mode forward pass of whichever head(s) the model kind uses.
inline std::vector<PredictionTriple> predict_batch(const MtlModel& model, const Batch& batch) {
    Graph g(false);
    const auto logits = model_logits(g, model, batch);
    return predictions_from_logits(g, logits, batch.size);
}

inline std::vector<PredictionTriple> forward_mtl(const MtlModel& model, const Batch& batch) {
    if (model.kind != ModelKind::Mtl) throw Error("forward_mtl needs an MTL model");
    return predict_batch(model, batch);
}

/// Task-A distributions from the [CLS] linear layer, regardless of model kind.
inline std::vector<std::vector<double>> forward_baseline(const MtlModel& model, const Batch& batch) {
    if (batch.size == 0) throw Error("empty batch");
    Graph g(false);
    Var emb = encoder_forward(g, model.encoder, batch);
    const Matrix& l = g.value(baseline_logits(g, model, emb, batch));
    std::vector<std::vector<double>> out;
    for (std::size_t b = 0; b < batch.size; ++b) out.push_back(softmax(l.row(b)));
    return out;
}

/// Gold labels of one batch. Synthetic examples only supervise task A.
struct BatchTargets {
    std::vector<LabelTriple> labels;
    std::vector<bool> synthetic;
};

struct LossTerms {
    Var total;
    std::array<double, 3> task_loss{};
    std::array<bool, 3> no_contributors{};  // L_i forced to 0 because nothing contributed
};

/// Builds the weighted multi-task loss (or plain task-A cross-entropy for the baseline).
/// Each L_i is the mean cross-entropy over the examples that contribute to task i.
inline LossTerms model_loss(Graph& g, const MtlModel& model, const TaskLogits& logits, const BatchTargets& targets) {
    const std::size_t n = targets.labels.size();
    if (targets.synthetic.size() != n) throw Error("targets: size mismatch");
    LossTerms out;
    std::array<Var, 3> terms{};
    std::array<double, 3> coefficients{1.0, 0.0, 0.0};
    if (model.kind == ModelKind::Mtl) coefficients = {model.loss_weights.a, model.loss_weights.b, model.loss_weights.c};
    for (std::size_t t = 0; t < logits.tasks; ++t) {
        const Task task = kTasks[t];
        std::vector<std::size_t> idx(n);
        std::vector<double> weight(n, 1.0);
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            idx[i] = targets.labels[i].index(task);
            if (task != Task::A && targets.synthetic[i]) weight[i] = 0.0;
            any = any || weight[i] != 0.0;
        }
        terms[t] = g.softmax_cross_entropy(logits.logits[t], std::move(idx), std::move(weight));
        out.task_loss[t] = g.scalar(terms[t]);
        out.no_contributors[t] = !any;
    }
    out.total = g.weighted_sum(std::span<const Var>(terms.data(), logits.tasks),
                               std::span<const double>(coefficients.data(), logits.tasks));
    return out;
}

struct MtlLossValue {
    double total = 0.0;
    std::array<double, 3> task_loss{};
    std::array<bool, 3> no_contributors{};
};

/// The weighted loss computed from already-made predictions.
inline MtlLossValue mtl_loss(const std::vector<PredictionTriple>& predictions, const std::vector<LabelTriple>& gold,
                             const std::vector<bool>& synthetic, const LossWeights& weights) {
    weights.validate();
    if (predictions.size() != gold.size() || synthetic.size() != gold.size()) throw Error("mtl_loss: size mismatch");
    MtlLossValue out;
    for (Task t : kTasks) {
        const auto ti = static_cast<std::size_t>(t);
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < gold.size(); ++i) {
            if (t != Task::A && synthetic[i]) continue;
            sum += -std::log(predictions[i].probabilities(t).at(gold[i].index(t)));
            ++count;
        }
        out.task_loss[ti] = count > 0 ? sum / static_cast<double>(count) : 0.0;
        out.no_contributors[ti] = count == 0;
    }
    out.total = combine_losses(out.task_loss, weights);
    return out;
}

/// Everything needed to go from raw text to predictions.
struct Pipeline {
    TextNormalizer normalizer;
    Vocabulary vocab;
    MtlModel model;

    PredictionTriple predict(const std::string& text) const {
        const NormalizedTweet tweet = normalizer(RawTweet{"input", text});
        const TokenSequence seq = encode(tweet.text, vocab, model.encoder.config.max_len);
        const std::vector<TokenSequence> one{seq};
        return predict_batch(model, make_batch(one)).front();
    }
};

/// Optional post-processor forcing the argmax labels to respect the hierarchy,
/// trusting task A first, then B. Not applied by default.
inline LabelTriple enforce_hierarchy(const PredictionTriple& p) {
    const LabelA a = p.a();
    if (a == LabelA::Not) return {LabelA::Not, LabelB::Null, LabelC::Null};
    const auto& pb = p.probabilities(Task::B);
    const LabelB b = pb[index_of(LabelB::Tin)] >= pb[index_of(LabelB::Unt)] ? LabelB::Tin : LabelB::Unt;
    if (b == LabelB::Unt) return {LabelA::Off, LabelB::Unt, LabelC::Null};
    const auto& pc = p.probabilities(Task::C);
    std::size_t best = 0;
    for (std::size_t i = 1; i < 3; ++i) {
        if (pc[i] > pc[best]) best = i;
    }
    return {LabelA::Off, LabelB::Tin, label_from_index<LabelC>(best)};
}

}  // namespace hmtl
