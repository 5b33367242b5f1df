#pragma once

#include <array>
#include <cstdio>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hmtl/corpus.hpp"
#include "hmtl/labels.hpp"
#include "hmtl/metrics.hpp"
#include "hmtl/mtl.hpp"
#include "hmtl/tokenizer.hpp"

namespace hmtl {

/// A labeled example after tokenization.
struct EncodedExample {
    std::string id;
    TokenSequence tokens;
    LabelTriple labels;
    bool synthetic = false;
};

inline std::vector<EncodedExample> encode_corpus(const std::vector<LabeledExample>& corpus, const Vocabulary& vocab,
                                                 std::size_t max_len) {
    std::vector<EncodedExample> out;
    out.reserve(corpus.size());
    for (const auto& ex : corpus) {
        out.push_back({ex.tweet.id, encode(ex.tweet.text, vocab, max_len), ex.labels, ex.synthetic});
    }
    return out;
}

inline Batch batch_of(const std::vector<EncodedExample>& examples, std::span<const std::size_t> indices) {
    std::vector<const TokenSequence*> seqs;
    seqs.reserve(indices.size());
    for (auto i : indices) seqs.push_back(&examples.at(i).tokens);
    return make_batch(std::span<const TokenSequence* const>(seqs));
}

inline BatchTargets targets_of(const std::vector<EncodedExample>& examples, std::span<const std::size_t> indices) {
    BatchTargets t;
    for (auto i : indices) {
        t.labels.push_back(examples.at(i).labels);
        t.synthetic.push_back(examples.at(i).synthetic);
    }
    return t;
}

/// Consecutive index chunks of at most `batch_size`.
inline std::vector<std::vector<std::size_t>> chunk_indices(const std::vector<std::size_t>& order,
                                                           std::size_t batch_size) {
    std::vector<std::vector<std::size_t>> chunks;
    for (std::size_t i = 0; i < order.size(); i += batch_size) {
        chunks.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                            order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
    }
    return chunks;
}

inline std::vector<PredictionTriple> predict_all(const MtlModel& model, const std::vector<EncodedExample>& examples,
                                                 std::size_t batch_size = 64) {
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<PredictionTriple> out;
    out.reserve(examples.size());
    for (const auto& chunk : chunk_indices(order, batch_size)) {
        auto preds = predict_batch(model, batch_of(examples, chunk));
        for (auto& p : preds) out.push_back(std::move(p));
    }
    return out;
}

struct TaskReport {
    Task task = Task::A;
    ConfusionMatrix confusion;
    double macro_f1 = 0.0;
    std::vector<ClassScores> per_class;
};

struct EvalReport {
    std::vector<TaskReport> tasks;

    const TaskReport* find(Task t) const {
        for (const auto& r : tasks) {
            if (r.task == t) return &r;
        }
        return nullptr;
    }

    double f1(Task t) const {
        const auto* r = find(t);
        if (r == nullptr) throw Error("no report for task " + std::string(task_name(t)));
        return r->macro_f1;
    }

    std::string to_text() const {
        std::ostringstream os;
        char buf[128];
        for (const auto& r : tasks) {
            std::snprintf(buf, sizeof buf, "task %s macro_f1 %.6f n %zu\n", task_name(r.task).data(), r.macro_f1,
                          r.confusion.total());
            os << buf;
            for (std::size_t c = 0; c < r.per_class.size(); ++c) {
                const auto& s = r.per_class[c];
                std::snprintf(buf, sizeof buf, "  %-4s precision %.6f recall %.6f f1 %.6f support %zu\n",
                              class_name(r.task, c).data(), s.precision, s.recall, s.f1, s.support);
                os << buf;
            }
            os << "  confusion (rows gold, cols predicted)\n";
            for (std::size_t g = 0; g < r.confusion.classes(); ++g) {
                os << "  " << class_name(r.task, g);
                for (std::size_t p = 0; p < r.confusion.classes(); ++p) os << '\t' << r.confusion.count(g, p);
                os << '\n';
            }
        }
        return os.str();
    }
};

/// Scores predictions against gold labels. Tasks B and C skip synthetic examples.
inline EvalReport report_from_predictions(const std::vector<PredictionTriple>& preds,
                                          const std::vector<EncodedExample>& gold) {
    if (gold.empty()) throw Error("cannot evaluate on an empty corpus");
    if (preds.size() != gold.size()) throw Error("prediction count differs from corpus size");
    EvalReport report;
    for (Task t : kTasks) {
        if (!preds.front().has(t)) continue;
        TaskReport r;
        r.task = t;
        r.confusion = ConfusionMatrix(class_count(t));
        for (std::size_t i = 0; i < gold.size(); ++i) {
            if (t != Task::A && gold[i].synthetic) continue;
            r.confusion.add(gold[i].labels.index(t), preds[i].label_index(t));
        }
        if (r.confusion.total() == 0) continue;
        r.macro_f1 = r.confusion.macro_f1();
        for (std::size_t c = 0; c < class_count(t); ++c) r.per_class.push_back(r.confusion.scores(c));
        report.tasks.push_back(std::move(r));
    }
    return report;
}

inline EvalReport evaluate(const MtlModel& model, const std::vector<EncodedExample>& corpus,
                           std::size_t batch_size = 64) {
    if (corpus.empty()) throw Error("cannot evaluate on an empty corpus");
    return report_from_predictions(predict_all(model, corpus, batch_size), corpus);
}

/// Plurality vote over member distributions for one task. Ties go to the
/// label with the largest summed probability among the tied labels, then to
/// the lowest class index.
inline std::size_t vote(const std::vector<const std::vector<double>*>& member_probs) {
    if (member_probs.empty()) throw Error("vote needs at least one member");
    const std::size_t classes = member_probs.front()->size();
    std::vector<std::size_t> votes(classes, 0);
    std::vector<double> mass(classes, 0.0);
    for (const auto* p : member_probs) {
        if (p->size() != classes) throw Error("members disagree on the class set");
        ++votes[argmax(*p)];
        for (std::size_t c = 0; c < classes; ++c) mass[c] += (*p)[c];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
        if (votes[c] > votes[best] || (votes[c] == votes[best] && mass[c] > mass[best])) best = c;
    }
    return best;
}

/// Ensemble decision for one example; tasks absent from the members are left unset.
struct VotedLabels {
    std::array<std::size_t, 3> index{};
    std::array<bool, 3> present{};

    LabelA a() const { return label_from_index<LabelA>(get(Task::A)); }
    LabelB b() const { return label_from_index<LabelB>(get(Task::B)); }
    LabelC c() const { return label_from_index<LabelC>(get(Task::C)); }

    std::size_t get(Task t) const {
        const auto i = static_cast<std::size_t>(t);
        if (!present[i]) throw Error("no vote for task " + std::string(task_name(t)));
        return index[i];
    }
};

inline std::vector<VotedLabels> majority_vote(const std::vector<std::vector<PredictionTriple>>& members) {
    if (members.empty()) throw Error("majority_vote needs at least one member");
    const std::size_t n = members.front().size();
    for (const auto& m : members) {
        if (m.size() != n) throw Error("ensemble members predicted different numbers of examples");
    }
    std::vector<VotedLabels> out(n);
    std::vector<const std::vector<double>*> probs(members.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (Task t : kTasks) {
            const auto ti = static_cast<std::size_t>(t);
            const bool present = members.front()[i].has(t);
            for (std::size_t k = 0; k < members.size(); ++k) {
                if (members[k][i].has(t) != present) throw Error("ensemble members predict different tasks");
                probs[k] = &members[k][i].probabilities(t);
            }
            if (!present) continue;
            out[i].index[ti] = vote(probs);
            out[i].present[ti] = true;
        }
    }
    return out;
}

struct ThresholdResult {
    double threshold = 0.0;
    double macro_f1 = 0.0;
    // Gold labels hold a single class, or every grid point scored the same;
    // the smallest grid value is returned.
    bool degenerate = false;
};

/// Grid search for the score threshold whose binarization best matches the
/// gold task-A labels; ties go to the smallest threshold.
inline ThresholdResult threshold_search(const std::vector<std::pair<double, LabelA>>& scored,
                                        const std::vector<double>& grid) {
    if (scored.empty()) throw Error("threshold search needs data");
    if (grid.empty()) throw Error("threshold grid is empty");
    std::vector<double> sorted_grid = grid;
    std::sort(sorted_grid.begin(), sorted_grid.end());
    std::vector<std::size_t> gold(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) gold[i] = index_of(scored[i].second);
    const bool one_class = std::all_of(gold.begin(), gold.end(), [&](std::size_t g) { return g == gold.front(); });
    ThresholdResult best;
    bool first = true;
    double first_f1 = 0.0;
    bool constant = true;
    std::vector<std::size_t> pred(scored.size());
    for (double th : sorted_grid) {
        if (!(th > 0.0 && th < 1.0)) throw Error("threshold grid values must lie in (0, 1)");
        for (std::size_t i = 0; i < scored.size(); ++i) pred[i] = index_of(binarize_score(scored[i].first, th));
        const double f1 = macro_f1(gold, pred, kClassCount<LabelA>);
        if (first) {
            best = {th, f1, false};
            first_f1 = f1;
            first = false;
            if (one_class) break;
            continue;
        }
        constant = constant && f1 == first_f1;
        if (f1 > best.macro_f1) best = {th, f1, false};
    }
    best.degenerate = one_class || constant;
    return best;
}

}  // namespace hmtl
