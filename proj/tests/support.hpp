#pragma once

// Shared fixtures and independent reference implementations for the tests
// and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "hmtl/hmtl.hpp"

namespace hmtl::testing {

inline const TextNormalizer& bundled_normalizer() {
    static const TextNormalizer n{EmojiTable::load(std::string(HMTL_DATA_DIR) + "/emoji.tsv"),
                                  UnigramTable::load(std::string(HMTL_DATA_DIR) + "/unigrams.tsv"),
                                  default_substitutions()};
    return n;
}

/// Exhaustive segmentation: tries all 2^(n-1) split patterns. Scores are
/// folded right to left, the same association order a suffix DP uses.
inline std::vector<std::string> brute_force_segment(const std::string& s, const UnigramTable& unigrams) {
    const std::size_t n = s.size();
    if (n == 0) return {};
    std::vector<std::vector<double>> lp(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j <= n; ++j) lp[i][j] = unigrams.log_prob(s.substr(i, j - i));
    }
    bool have = false;
    double best_score = 0.0;
    std::vector<std::string> best;
    std::vector<std::size_t> cuts;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << (n - 1)); ++mask) {
        cuts.assign(1, 0);
        for (std::size_t b = 0; b + 1 < n; ++b) {
            if (mask >> b & 1) cuts.push_back(b + 1);
        }
        cuts.push_back(n);
        double score = 0.0;
        for (std::size_t k = cuts.size() - 1; k-- > 0;) score = lp[cuts[k]][cuts[k + 1]] + score;
        const std::size_t words = cuts.size() - 1;
        bool better = !have || score > best_score;
        if (have && score == best_score) {
            if (words != best.size()) {
                better = words < best.size();
            } else {
                std::vector<std::string> cand;
                for (std::size_t k = 0; k + 1 < cuts.size(); ++k) cand.push_back(s.substr(cuts[k], cuts[k + 1] - cuts[k]));
                better = cand < best;
            }
        }
        if (better) {
            best.clear();
            for (std::size_t k = 0; k + 1 < cuts.size(); ++k) best.push_back(s.substr(cuts[k], cuts[k + 1] - cuts[k]));
            best_score = score;
            have = true;
        }
    }
    return best;
}

/// Per-class precision/recall from explicit counting loops, no confusion matrix.
inline double reference_macro_f1(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred,
                                 std::size_t classes) {
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        double tp = 0, predicted = 0, actual = 0;
        for (std::size_t i = 0; i < gold.size(); ++i) {
            if (pred[i] == c) ++predicted;
            if (gold[i] == c) ++actual;
            if (pred[i] == c && gold[i] == c) ++tp;
        }
        const double p = predicted == 0 ? 0.0 : tp / predicted;
        const double r = actual == 0 ? 0.0 : tp / actual;
        sum += (p + r == 0.0) ? 0.0 : 2 * p * r / (p + r);
    }
    return sum / static_cast<double>(classes);
}

/// Count votes per label, keep the labels with the top count, pick the one
/// with the highest probability mass, then the smallest index.
inline std::size_t reference_vote(const std::vector<std::vector<double>>& members) {
    const std::size_t classes = members.front().size();
    std::map<std::size_t, std::size_t> counts;
    for (const auto& p : members) {
        std::size_t arg = 0;
        for (std::size_t c = 1; c < classes; ++c) {
            if (p[c] > p[arg]) arg = c;
        }
        ++counts[arg];
    }
    std::size_t top = 0;
    for (const auto& [label, n] : counts) top = std::max(top, n);
    std::vector<std::size_t> tied;
    for (const auto& [label, n] : counts) {
        if (n == top) tied.push_back(label);
    }
    std::size_t best = tied.front();
    double best_mass = -1.0;
    for (std::size_t label : tied) {
        double mass = 0.0;
        for (const auto& p : members) mass += p[label];
        if (mass > best_mass) {
            best_mass = mass;
            best = label;
        }
    }
    return best;
}

inline TokenSequence random_sequence(Rng& rng, std::size_t vocab_size, std::size_t seq_len, std::size_t min_len = 2) {
    TokenSequence s;
    s.ids.assign(seq_len, kPadId);
    s.mask.assign(seq_len, 0);
    const std::size_t len = min_len + rng.index(seq_len - min_len + 1);
    for (std::size_t k = 0; k < len; ++k) {
        s.ids[k] = k == 0 ? kClsId : static_cast<TokenId>(3 + rng.index(vocab_size - 3));
        s.mask[k] = 1;
    }
    return s;
}

inline EncoderConfig tiny_encoder(std::size_t vocab_size = 24, std::size_t max_len = 10) {
    EncoderConfig c;
    c.d_model = 8;
    c.n_layers = 1;
    c.n_heads = 2;
    c.d_ffn = 16;
    c.max_len = max_len;
    c.vocab_size = vocab_size;
    c.dropout = 0.0;
    return c;
}

}  // namespace hmtl::testing
