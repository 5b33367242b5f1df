#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hmtl/error.hpp"
#include "hmtl/unicode.hpp"

namespace hmtl {

using TokenId = std::uint32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;

class Vocabulary {
public:
    static constexpr std::string_view kPad = "[PAD]";
    static constexpr std::string_view kUnk = "[UNK]";
    static constexpr std::string_view kCls = "[CLS]";

    Vocabulary() : tokens_{std::string(kPad), std::string(kUnk), std::string(kCls)} {
        for (TokenId i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
    }

    /// Rebuilds a vocabulary from its id-ordered token list (checkpoint load).
    static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
        if (tokens.size() < 3 || tokens[kPadId] != kPad || tokens[kUnkId] != kUnk || tokens[kClsId] != kCls) {
            throw Error("vocabulary must start with [PAD], [UNK], [CLS]");
        }
        Vocabulary v;
        for (std::size_t i = 3; i < tokens.size(); ++i) v.add(tokens[i]);
        return v;
    }

    TokenId add(const std::string& token) {
        auto [it, inserted] = index_.try_emplace(token, static_cast<TokenId>(tokens_.size()));
        if (!inserted) throw Error("duplicate vocabulary token '" + token + "'");
        tokens_.push_back(token);
        return it->second;
    }

    TokenId id(const std::string& token) const {
        auto it = index_.find(token);
        return it == index_.end() ? kUnkId : it->second;
    }

    bool contains(const std::string& token) const { return index_.contains(token); }
    const std::string& token(TokenId id) const { return tokens_.at(id); }
    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

/// Whitespace tokens with frequency >= min_freq, most frequent first (ties in
/// byte order). max_size counts the reserved tokens; 0 means unlimited.
inline Vocabulary build_vocab(const std::vector<std::string>& corpus, std::size_t min_freq, std::size_t max_size = 0) {
    if (corpus.empty()) throw Error("cannot build a vocabulary from an empty corpus");
    if (min_freq < 1) throw Error("min_freq must be at least 1");
    std::map<std::string, std::size_t> counts;
    for (const auto& text : corpus) {
        for (auto& tok : unicode::split_ws(text)) ++counts[tok];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    Vocabulary vocab;
    for (const auto& [tok, n] : ranked) {
        if (n < min_freq) continue;
        if (max_size != 0 && vocab.size() >= max_size) break;
        if (vocab.contains(tok)) continue;  // a corpus token spelled like a reserved one
        vocab.add(tok);
    }
    return vocab;
}

/// Fixed-length id sequence starting with [CLS]; mask[i] is 1 for real tokens.
struct TokenSequence {
    std::vector<TokenId> ids;
    std::vector<std::uint8_t> mask;

    std::size_t length() const {
        std::size_t n = 0;
        for (auto m : mask) n += m;
        return n;
    }

    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

inline TokenSequence encode(std::string_view text, const Vocabulary& vocab, std::size_t max_len = 64) {
    if (max_len < 2) throw Error("max_len must be at least 2");
    TokenSequence seq;
    seq.ids.assign(max_len, kPadId);
    seq.mask.assign(max_len, 0);
    seq.ids[0] = kClsId;
    seq.mask[0] = 1;
    std::size_t pos = 1;
    for (auto& tok : unicode::split_ws(text)) {
        if (pos >= max_len) break;
        const TokenId id = vocab.id(tok);
        // "[PAD]" or "[CLS]" typed into a tweet is just an unknown word
        seq.ids[pos] = id == kPadId || id == kClsId ? kUnkId : id;
        seq.mask[pos] = 1;
        ++pos;
    }
    return seq;
}

/// Token strings of the real positions after [CLS].
inline std::vector<std::string> decode(const TokenSequence& seq, const Vocabulary& vocab) {
    std::vector<std::string> out;
    for (std::size_t i = 1; i < seq.ids.size() && seq.mask[i] != 0; ++i) out.push_back(vocab.token(seq.ids[i]));
    return out;
}

}  // namespace hmtl
