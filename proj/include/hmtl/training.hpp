#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "hmtl/autodiff.hpp"
#include "hmtl/evaluation.hpp"
#include "hmtl/mtl.hpp"
#include "hmtl/random.hpp"

namespace hmtl {

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 20;
    std::size_t patience = 3;
    LossWeights loss_weights;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
        if (batch_size < 1 || max_epochs < 1 || patience < 1) {
            throw ConfigError("batch_size, max_epochs and patience must be positive");
        }
        loss_weights.validate();
    }
};

/// Adam with bias correction. Parameters that received no gradient in a step
/// are left untouched, moments included.
class Adam {
public:
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Matrix*>& params, const Graph& g) {
        if (first_.empty()) {
            for (const auto* p : params) {
                first_.emplace_back(p->rows, p->cols);
                second_.emplace_back(p->rows, p->cols);
            }
        }
        if (first_.size() != params.size()) throw Error("Adam: parameter list changed between steps");
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t k = 0; k < params.size(); ++k) {
            const Matrix* grad = g.param_grad(*params[k]);
            if (grad == nullptr) continue;
            auto& m = first_[k].data;
            auto& v = second_[k].data;
            auto& w = params[k]->data;
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double gi = grad->data[i];
                m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
                v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
                w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
            }
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<Matrix> first_, second_;
};

template <class Model>
std::vector<Matrix*> parameters_of(Model& model) {
    std::vector<Matrix*> out;
    model.visit([&](const std::string&, Matrix& m) { out.push_back(&m); });
    return out;
}

/// Tracks a validation metric; stops after `patience` consecutive epochs
/// without a strict improvement over the best value so far.
class EarlyStopping {
public:
    explicit EarlyStopping(std::size_t patience) : patience_(patience) {
        if (patience == 0) throw ConfigError("patience must be positive");
    }

    /// Records one epoch's metric; returns true when it is a new best.
    bool observe(double metric) {
        ++epoch_;
        if (epoch_ == 1 || metric > best_) {
            best_ = metric;
            best_epoch_ = epoch_;
            return true;
        }
        return false;
    }

    bool should_stop() const { return epoch_ - best_epoch_ >= patience_; }
    std::size_t best_epoch() const { return best_epoch_; }
    std::size_t epochs() const { return epoch_; }
    double best() const { return best_; }

private:
    std::size_t patience_;
    std::size_t epoch_ = 0;
    std::size_t best_epoch_ = 0;
    double best_ = -std::numeric_limits<double>::infinity();
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::array<double, 3> val_f1{};
    std::array<bool, 3> has_f1{};
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    std::size_t stopped_epoch = 0;
    bool stopped_early = false;

    double best_f1_a() const { return epochs.at(best_epoch - 1).val_f1[0]; }

    /// One line per epoch: epoch, train loss, validation macro-F1 of A, B, C ("-" when absent).
    std::string to_text() const {
        std::string out = "epoch\ttrain_loss\tval_f1_a\tval_f1_b\tval_f1_c\n";
        char buf[64];
        for (const auto& e : epochs) {
            std::snprintf(buf, sizeof buf, "%zu\t%.10f", e.epoch, e.train_loss);
            out += buf;
            for (std::size_t t = 0; t < 3; ++t) {
                if (e.has_f1[t]) {
                    std::snprintf(buf, sizeof buf, "\t%.10f", e.val_f1[t]);
                    out += buf;
                } else {
                    out += "\t-";
                }
            }
            out += '\n';
        }
        std::snprintf(buf, sizeof buf, "best_epoch\t%zu\nstopped_epoch\t%zu\n", best_epoch, stopped_epoch);
        out += buf;
        return out;
    }
};

struct TrainResult {
    MtlModel model;  // parameters from the best epoch
    TrainHistory history;
};

/// Called after every epoch; useful for progress output.
using EpochObserver = std::function<void(const EpochRecord&)>;

inline void require_finite(double loss, const char* what) {
    if (!std::isfinite(loss)) throw NumericError(std::string(what) + " became non-finite");
}

/// Mini-batch training with per-epoch validation on task-A macro-F1 and early stopping.
inline TrainResult train(MtlModel model, const std::vector<EncodedExample>& train_set,
                         const std::vector<EncodedExample>& val_set, const TrainConfig& config,
                         const EpochObserver& observer = {}) {
    config.validate();
    if (train_set.empty() || val_set.empty()) throw Error("training and validation sets must be non-empty");
    model.loss_weights = config.loss_weights;
    Rng rng(config.seed);
    Rng dropout_rng(rng.fork());
    Adam adam(config.learning_rate);
    const auto params = parameters_of(model);
    EarlyStopping stopper(config.patience);
    TrainResult result{model, {}};

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (const auto& chunk : chunk_indices(order, config.batch_size)) {
            Graph g;
            const Batch batch = batch_of(train_set, chunk);
            const auto logits = model_logits(g, model, batch, &dropout_rng);
            const auto loss = model_loss(g, model, logits, targets_of(train_set, chunk));
            require_finite(g.scalar(loss.total), "training loss");
            g.backward(loss.total);
            adam.step(params, g);
            loss_sum += g.scalar(loss.total) * static_cast<double>(chunk.size());
            seen += chunk.size();
        }
        const EvalReport report = evaluate(model, val_set);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        for (const auto& r : report.tasks) {
            rec.val_f1[static_cast<std::size_t>(r.task)] = r.macro_f1;
            rec.has_f1[static_cast<std::size_t>(r.task)] = true;
        }
        result.history.epochs.push_back(rec);
        if (observer) observer(rec);
        if (stopper.observe(rec.val_f1[0])) result.model = model;
        result.history.stopped_epoch = epoch;
        if (stopper.should_stop()) {
            result.history.stopped_early = epoch < config.max_epochs;
            break;
        }
    }
    result.history.best_epoch = stopper.best_epoch();
    return result;
}

// ---- regression pre-training ----------------------------------------------------

/// A scored example after tokenization; `target` is the mean confidence score.
struct EncodedScored {
    std::string id;
    TokenSequence tokens;
    double target = 0.0;
};

inline std::vector<EncodedScored> encode_scored(const std::vector<ScoredExample>& corpus, const Vocabulary& vocab,
                                                std::size_t max_len) {
    std::vector<EncodedScored> out;
    out.reserve(corpus.size());
    for (const auto& ex : corpus) out.push_back({ex.tweet.id, encode(ex.tweet.text, vocab, max_len), ex.avg_conf});
    return out;
}

/// sigmoid(w . h_CLS + b); lives only for the duration of pre-training.
struct RegressionHead {
    Linear layer;

    template <class F>
    void visit(F&& f) {
        layer.visit("regression", f);
    }
};

inline Var regression_predictions(Graph& g, const EncoderParams& encoder, const RegressionHead& head,
                                  const Batch& batch, Rng* dropout_rng = nullptr) {
    Var emb = encoder_forward(g, encoder, batch, dropout_rng);
    std::vector<std::size_t> cls_rows(batch.size);
    for (std::size_t b = 0; b < batch.size; ++b) cls_rows[b] = b * batch.seq_len;
    return g.sigmoid(head.layer.apply(g, g.gather_rows(emb, std::move(cls_rows))));
}

inline Batch batch_of(const std::vector<EncodedScored>& examples, std::span<const std::size_t> indices) {
    std::vector<const TokenSequence*> seqs;
    for (auto i : indices) seqs.push_back(&examples.at(i).tokens);
    return make_batch(std::span<const TokenSequence* const>(seqs));
}

inline std::vector<double> regression_targets(const std::vector<EncodedScored>& examples,
                                              std::span<const std::size_t> indices) {
    std::vector<double> t;
    for (auto i : indices) t.push_back(examples.at(i).target);
    return t;
}

/// Mean squared error of the regression head over a whole corpus, without dropout.
inline double regression_mse(const EncoderParams& encoder, const RegressionHead& head,
                             const std::vector<EncodedScored>& examples, std::size_t batch_size = 64) {
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    double sum = 0.0;
    for (const auto& chunk : chunk_indices(order, batch_size)) {
        Graph g(false);
        Var loss = g.mean_squared_error(regression_predictions(g, encoder, head, batch_of(examples, chunk)),
                                        regression_targets(examples, chunk));
        sum += g.scalar(loss) * static_cast<double>(chunk.size());
    }
    return sum / static_cast<double>(examples.size());
}

struct PretrainResult {
    MtlModel model;
    double initial_mse = 0.0;
    std::vector<double> epoch_mse;  // full-corpus MSE after each epoch
};

/// Treats task A as regression on the mean confidence score: a sigmoid head
/// on [CLS] trained with MSE. The encoder keeps its updates; the head is dropped.
inline PretrainResult pretrain_regression(MtlModel model, const std::vector<EncodedScored>& scored,
                                          const TrainConfig& config) {
    config.validate();
    if (scored.empty()) throw Error("pre-training needs a non-empty scored corpus");
    Rng rng(config.seed);
    Rng dropout_rng(rng.fork());
    Rng init_rng(rng.fork());
    RegressionHead head{make_linear(model.encoder.config.d_model, 1, init_rng)};
    std::vector<Matrix*> params;
    model.encoder.visit([&](const std::string&, Matrix& m) { params.push_back(&m); });
    head.visit([&](const std::string&, Matrix& m) { params.push_back(&m); });
    Adam adam(config.learning_rate);

    PretrainResult result;
    result.initial_mse = regression_mse(model.encoder, head, scored);
    std::vector<std::size_t> order(scored.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        rng.shuffle(order);
        for (const auto& chunk : chunk_indices(order, config.batch_size)) {
            Graph g;
            Var pred = regression_predictions(g, model.encoder, head, batch_of(scored, chunk), &dropout_rng);
            Var loss = g.mean_squared_error(pred, regression_targets(scored, chunk));
            require_finite(g.scalar(loss), "regression loss");
            g.backward(loss);
            adam.step(params, g);
        }
        result.epoch_mse.push_back(regression_mse(model.encoder, head, scored));
        require_finite(result.epoch_mse.back(), "regression loss");
    }
    result.model = std::move(model);
    return result;
}

// ---- gradient verification --------------------------------------------------------

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
};

struct NamedParam {
    std::string name;
    Matrix* value;
};

/// Compares analytic gradients of `loss_fn` against central differences for
/// every entry of every parameter. `loss_fn(Graph&)` must build the loss
/// deterministically from the current parameter values.
template <class LossFn>
GradCheckReport check_gradients(const std::vector<NamedParam>& params, LossFn&& loss_fn, double epsilon) {
    std::vector<Matrix> analytic;
    {
        Graph g;
        Var loss = loss_fn(g);
        require_finite(g.scalar(loss), "loss");
        g.backward(loss);
        for (const auto& p : params) {
            const Matrix* grad = g.param_grad(*p.value);
            analytic.push_back(grad != nullptr ? *grad : Matrix(p.value->rows, p.value->cols));
        }
    }
    auto eval = [&] {
        Graph g(false);
        const double v = g.scalar(loss_fn(g));
        require_finite(v, "perturbed loss");
        return v;
    };
    GradCheckReport report;
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& w = params[k].value->data;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double saved = w[i];
            w[i] = saved + epsilon;
            const double up = eval();
            w[i] = saved - epsilon;
            const double down = eval();
            w[i] = saved;
            const double numeric = (up - down) / (2.0 * epsilon);
            const double a = analytic[k].data[i];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            ++report.checked;
            if (report.worst_parameter.empty() || rel > report.max_relative_error) {
                report.max_relative_error = rel;
                report.worst_parameter = params[k].name;
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

inline std::vector<NamedParam> named_parameters(MtlModel& model) {
    std::vector<NamedParam> out;
    model.visit([&](const std::string& name, Matrix& m) { out.push_back({name, &m}); });
    return out;
}

/// Gradient check of the model's training loss (no dropout) on one batch.
inline GradCheckReport check_gradients(MtlModel& model, const std::vector<EncodedExample>& batch_examples,
                                       double epsilon = 1e-4) {
    if (batch_examples.empty()) throw Error("gradient check needs a non-empty batch");
    std::vector<std::size_t> all(batch_examples.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const Batch batch = batch_of(batch_examples, all);
    const BatchTargets targets = targets_of(batch_examples, all);
    return check_gradients(
        named_parameters(model),
        [&](Graph& g) {
            const auto logits = model_logits(g, model, batch);
            return model_loss(g, model, logits, targets).total;
        },
        epsilon);
}

}  // namespace hmtl
