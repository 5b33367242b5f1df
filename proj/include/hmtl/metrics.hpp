#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "hmtl/error.hpp"

namespace hmtl {

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;  // gold occurrences
};

/// Multi-class confusion matrix; rows are gold classes, columns predictions.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t classes) : n_(classes), counts_(classes * classes, 0) {}

    void add(std::size_t gold, std::size_t pred) {
        if (gold >= n_ || pred >= n_) throw Error("confusion matrix: class index out of range");
        ++counts_[gold * n_ + pred];
    }

    std::size_t classes() const { return n_; }
    std::size_t count(std::size_t gold, std::size_t pred) const { return counts_[gold * n_ + pred]; }

    std::size_t total() const {
        std::size_t t = 0;
        for (auto c : counts_) t += c;
        return t;
    }

    std::size_t true_positives(std::size_t c) const { return count(c, c); }

    std::size_t false_positives(std::size_t c) const {
        std::size_t s = 0;
        for (std::size_t g = 0; g < n_; ++g) s += g == c ? 0 : count(g, c);
        return s;
    }

    std::size_t false_negatives(std::size_t c) const {
        std::size_t s = 0;
        for (std::size_t p = 0; p < n_; ++p) s += p == c ? 0 : count(c, p);
        return s;
    }

    /// Precision, recall and F1 of one class; each is 0 when its denominator is 0.
    ClassScores scores(std::size_t c) const {
        const auto tp = static_cast<double>(true_positives(c));
        const auto fp = static_cast<double>(false_positives(c));
        const auto fn = static_cast<double>(false_negatives(c));
        ClassScores s;
        s.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
        s.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
        s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
        s.support = true_positives(c) + false_negatives(c);
        return s;
    }

    /// Unweighted mean of per-class F1 over every class, present in the gold labels or not.
    double macro_f1() const {
        if (n_ == 0) return 0.0;
        double sum = 0.0;
        for (std::size_t c = 0; c < n_; ++c) sum += scores(c).f1;
        return sum / static_cast<double>(n_);
    }

    double accuracy() const {
        const auto t = total();
        if (t == 0) return 0.0;
        std::size_t diag = 0;
        for (std::size_t c = 0; c < n_; ++c) diag += count(c, c);
        return static_cast<double>(diag) / static_cast<double>(t);
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> counts_;
};

inline ConfusionMatrix confusion(std::span<const std::size_t> golds, std::span<const std::size_t> preds,
                                 std::size_t classes) {
    if (golds.size() != preds.size()) throw Error("golds and predictions differ in length");
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < golds.size(); ++i) cm.add(golds[i], preds[i]);
    return cm;
}

inline double macro_f1(std::span<const std::size_t> golds, std::span<const std::size_t> preds, std::size_t classes) {
    if (golds.empty()) throw Error("macro_f1 needs at least one example");
    return confusion(golds, preds, classes).macro_f1();
}

/// macro-F1 over an explicit class set; labels outside it are an error.
template <class Label>
double macro_f1(const std::vector<Label>& golds, const std::vector<Label>& preds, const std::vector<Label>& class_set) {
    if (golds.size() != preds.size()) throw Error("golds and predictions differ in length");
    auto to_index = [&](const Label& l) {
        auto it = std::find(class_set.begin(), class_set.end(), l);
        if (it == class_set.end()) throw Error("label outside the class set");
        return static_cast<std::size_t>(it - class_set.begin());
    };
    std::vector<std::size_t> g, p;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        g.push_back(to_index(golds[i]));
        p.push_back(to_index(preds[i]));
    }
    return macro_f1(g, p, class_set.size());
}

}  // namespace hmtl
