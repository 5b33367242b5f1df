#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hmtl/error.hpp"
#include "hmtl/unicode.hpp"

namespace hmtl {

struct RawTweet {
    std::string id;
    std::string text;
};

struct NormalizedTweet {
    std::string id;
    std::string text;
    std::vector<std::string> steps_applied;

    friend bool operator==(const NormalizedTweet&, const NormalizedTweet&) = default;
};

namespace detail {

inline std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return in;
}

}  // namespace detail

namespace detail {

/// Base letter of an accented Latin-1 letter ("ô" -> 'o'), or 0.
inline char fold_latin1(char32_t c) {
    static constexpr char base[] = "AAAAAAACEEEEIIIIDNOOOOO\0OUUUUY\0saaaaaaaceeeeiiiidnooooo\0ouuuuy\0y";
    return c >= 0xC0 && c <= 0xFF ? base[c - 0xC0] : '\0';
}

}  // namespace detail

/// Lowercase ASCII letters and digits separated by single spaces. Accented
/// Latin letters lose their accents; everything else in an emoji description
/// (underscores, colons, apostrophes) is dropped or turned into a separator.
inline std::string clean_emoji_name(std::string_view raw) {
    std::string out;
    bool pending_space = false;
    for (char32_t c : unicode::decode(raw)) {
        if (c == U'_' || unicode::is_space(c) || c == U'-') {
            pending_space = !out.empty();
            continue;
        }
        if (const char folded = detail::fold_latin1(c)) c = static_cast<unsigned char>(folded);
        c = unicode::to_lower(c);
        if (!unicode::is_ascii_alnum(c)) continue;
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

/// Emoji codepoint sequence -> descriptive words.
class EmojiTable {
public:
    EmojiTable() = default;

    void add(std::string_view emoji, std::string_view name) {
        const auto cps = unicode::decode(emoji);
        if (cps.empty()) throw Error("empty emoji key");
        std::string cleaned = clean_emoji_name(name);
        if (cleaned.empty()) throw Error("emoji name has no letters or digits");
        max_key_length_ = std::max(max_key_length_, cps.size());
        entries_[unicode::encode(cps)] = std::move(cleaned);
    }

    const std::string* find(std::u32string_view key) const {
        auto it = entries_.find(unicode::encode(key));
        return it == entries_.end() ? nullptr : &it->second;
    }

    std::size_t max_key_length() const { return max_key_length_; }
    std::size_t size() const { return entries_.size(); }
    const std::unordered_map<std::string, std::string>& entries() const { return entries_; }

    /// Tab-separated `emoji<TAB>name` lines; lines starting with '#' are
    /// comments unless they are a keycap emoji.
    static EmojiTable load(const std::string& path) {
        auto in = detail::open_input(path);
        EmojiTable table;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            line = detail::strip_cr(std::move(line));
            if (line.empty()) continue;
            if (line[0] == '#' && !line.starts_with("#\xEF\xB8\x8F") && !line.starts_with("#\xE2\x83\xA3")) continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos) throw ParseError(path, lineno, "expected emoji<TAB>name");
            try {
                table.add(std::string_view(line).substr(0, tab), std::string_view(line).substr(tab + 1));
            } catch (const ParseError&) {
                throw;
            } catch (const Error& e) {
                throw ParseError(path, lineno, e.what());
            }
        }
        return table;
    }

private:
    std::unordered_map<std::string, std::string> entries_;
    std::size_t max_key_length_ = 0;
};

/// Word frequencies used to score hashtag segmentations.
class UnigramTable {
public:
    UnigramTable() = default;

    void add(std::string_view word, std::uint64_t count) {
        if (word.empty()) throw Error("empty unigram word");
        if (count == 0) throw Error("unigram count must be positive");
        std::u32string cps = unicode::decode(word);
        for (char32_t& c : cps) c = unicode::to_lower(c);
        counts_[unicode::encode(cps)] += count;
        total_ += count;
        log_total_ = std::log(static_cast<double>(total_));
    }

    std::uint64_t count(std::string_view word) const {
        auto it = counts_.find(std::string(word));
        return it == counts_.end() ? 0 : it->second;
    }

    std::uint64_t total() const { return total_; }
    std::size_t size() const { return counts_.size(); }

    /// log P(word); unseen words of length L get log(1 / (total * 10^L)).
    double log_prob(std::string_view word) const {
        auto it = counts_.find(std::string(word));
        if (it != counts_.end()) return std::log(static_cast<double>(it->second)) - log_total_;
        const double length = static_cast<double>(unicode::decode(word).size());
        return -(log_total_ + length * std::log(10.0));
    }

    static UnigramTable load(const std::string& path) {
        auto in = detail::open_input(path);
        UnigramTable table;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            line = detail::strip_cr(std::move(line));
            if (line.empty()) continue;
            const auto tab = line.find('\t');
            if (tab == std::string::npos) throw ParseError(path, lineno, "expected word<TAB>count");
            std::uint64_t count = 0;
            try {
                std::size_t used = 0;
                const std::string field = line.substr(tab + 1);
                count = std::stoull(field, &used);
                if (used != field.size()) throw std::invalid_argument("trailing characters");
            } catch (const std::exception&) {
                throw ParseError(path, lineno, "bad count");
            }
            try {
                table.add(std::string_view(line).substr(0, tab), count);
            } catch (const Error& e) {
                throw ParseError(path, lineno, e.what());
            }
        }
        return table;
    }

private:
    std::unordered_map<std::string, std::uint64_t> counts_;
    std::uint64_t total_ = 0;
    double log_total_ = 0.0;
};

using SubstitutionMap = std::map<std::string, std::string>;

inline SubstitutionMap default_substitutions() { return {{"url", "http"}}; }

/// Collapses whitespace runs to one space and trims both ends.
inline std::string tidy_spaces(std::string_view text) {
    std::string out;
    bool pending = false;
    for (char32_t c : unicode::decode(text)) {
        if (unicode::is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        unicode::append_utf8(out, c);
    }
    return out;
}

inline std::string lowercase_strip(std::string_view text) {
    std::u32string cps = unicode::decode(text);
    for (char32_t& c : cps) c = unicode::to_lower(c);
    return tidy_spaces(unicode::encode(cps));
}

/// Replaces each maximal emoji sequence found in `table` with its name words.
/// Emoji codepoints that no table entry covers are deleted and counted in
/// `unknown` when it is given.
inline std::string emoji_to_words(std::string_view text, const EmojiTable& table, std::size_t* unknown = nullptr) {
    const std::u32string cps = unicode::decode(text);
    std::string out;
    bool need_space = false;  // a name was just emitted; separate it from following text
    bool joined = false;  // previous codepoint was an unknown ZWJ
    std::size_t i = 0;
    while (i < cps.size()) {
        const std::size_t longest = std::min(table.max_key_length(), cps.size() - i);
        const std::string* name = nullptr;
        std::size_t used = 0;
        for (std::size_t len = longest; len > 0 && name == nullptr; --len) {
            name = table.find(std::u32string_view(cps).substr(i, len));
            used = len;
        }
        if (name != nullptr) {
            if (!out.empty() && out.back() != ' ') out.push_back(' ');
            out += *name;
            need_space = true;
            joined = false;
            i += used;
            continue;
        }
        const char32_t c = cps[i];
        if (unicode::is_emoji_codepoint(c)) {
            // Stray modifiers (VS16, ZWJ, skin tones) do not count as separate emoji.
            const bool modifier = c == 0xFE0F || c == 0x200D || (c >= 0x1F3FB && c <= 0x1F3FF);
            if (!joined && !modifier && unknown != nullptr) ++*unknown;
            joined = c == 0x200D;
            ++i;
            continue;
        }
        joined = false;
        if (need_space && !unicode::is_space(c)) out.push_back(' ');
        need_space = false;
        unicode::append_utf8(out, c);
        ++i;
    }
    return out;
}

/// Best segmentation of a lowercase string into words under the unigram
/// model: maximum total log-probability, then fewest words, then the
/// lexicographically smallest word sequence.
inline std::vector<std::string> segment_words(std::string_view text, const UnigramTable& unigrams) {
    const std::size_t n = text.size();
    if (n == 0) return {};
    struct Best {
        double score = 0.0;
        std::size_t words = 0;
        std::size_t next = 0;  // end of the first word
    };
    // best[i] describes the optimal segmentation of text[i..n)
    std::vector<Best> best(n + 1);
    for (std::size_t i = n; i-- > 0;) {
        bool have = false;
        Best pick;
        std::string_view pick_word;
        for (std::size_t j = i + 1; j <= n; ++j) {
            const std::string_view word = text.substr(i, j - i);
            const Best cand{unigrams.log_prob(word) + best[j].score, best[j].words + 1, j};
            bool better = !have;
            if (have) {
                if (cand.score != pick.score) {
                    better = cand.score > pick.score;
                } else if (cand.words != pick.words) {
                    better = cand.words < pick.words;
                } else {
                    better = word < pick_word;
                }
            }
            if (better) {
                pick = cand;
                pick_word = word;
                have = true;
            }
        }
        best[i] = pick;
    }
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n; i = best[i].next) words.emplace_back(text.substr(i, best[i].next - i));
    return words;
}

namespace detail {

enum class CharKind { Upper, Lower, Digit, Other };

inline CharKind kind_of(char c) {
    if (c >= 'A' && c <= 'Z') return CharKind::Upper;
    if (c >= 'a' && c <= 'z') return CharKind::Lower;
    if (c >= '0' && c <= '9') return CharKind::Digit;
    return CharKind::Other;
}

/// Splits "KeithEllisonAbuse" into {"Keith", "Ellison", "Abuse"} and
/// "NASAIsGreat" into {"NASA", "Is", "Great"}.
inline std::vector<std::string> case_runs(std::string_view s) {
    std::vector<std::string> runs;
    std::size_t i = 0;
    while (i < s.size()) {
        const CharKind k = kind_of(s[i]);
        std::size_t j = i + 1;
        if (k == CharKind::Upper) {
            while (j < s.size() && kind_of(s[j]) == CharKind::Upper) ++j;
            const bool followed_by_lower = j < s.size() && kind_of(s[j]) == CharKind::Lower;
            if (followed_by_lower && j - i > 1) {
                --j;  // the last capital starts the next word
            } else if (followed_by_lower) {
                while (j < s.size() && kind_of(s[j]) == CharKind::Lower) ++j;
            }
        } else {
            while (j < s.size() && kind_of(s[j]) == k) ++j;
        }
        runs.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return runs;
}

inline bool is_titled(std::string_view run) {
    return run.size() >= 2 && kind_of(run[0]) == CharKind::Upper && kind_of(run[1]) == CharKind::Lower;
}

inline std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

inline bool is_hashtag_char(char c) { return kind_of(c) != CharKind::Other || c == '_'; }

}  // namespace detail

/// Segments a hashtag body (without '#'). Camel-case bodies with at least two
/// capitalized runs are split at the capitals; anything else, including
/// all-caps bodies, goes through unigram segmentation. Underscores separate
/// parts that are segmented independently.
inline std::string segment_hashtag(std::string_view tag, const UnigramTable& unigrams) {
    std::vector<std::string> words;
    std::size_t start = 0;
    while (start <= tag.size()) {
        std::size_t end = tag.find('_', start);
        if (end == std::string_view::npos) end = tag.size();
        const std::string_view part = tag.substr(start, end - start);
        if (!part.empty()) {
            const auto runs = detail::case_runs(part);
            const auto titled = std::count_if(runs.begin(), runs.end(), [](const std::string& r) {
                return detail::is_titled(r);
            });
            if (titled >= 2) {
                for (const auto& r : runs) words.push_back(detail::ascii_lower(r));
            } else {
                for (auto& w : segment_words(detail::ascii_lower(part), unigrams)) words.push_back(std::move(w));
            }
        }
        start = end + 1;
    }
    return unicode::join(words);
}

/// Hashtag bodies in order of appearance: '#' followed by [A-Za-z0-9_]+.
inline std::vector<std::string> hashtag_bodies(std::string_view text) {
    std::vector<std::string> bodies;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '#') continue;
        std::size_t j = i + 1;
        while (j < text.size() && detail::is_hashtag_char(text[j])) ++j;
        if (j > i + 1) bodies.emplace_back(text.substr(i + 1, j - i - 1));
        i = j - 1;
    }
    return bodies;
}

/// Replaces every hashtag in already-lowercased `text` with its segmentation.
/// `original_bodies` holds the same hashtags before lowercasing so camel case
/// can still be detected; a lowercase hashtag with no original counterpart is
/// segmented as-is.
inline std::string segment_hashtags(std::string_view text, const std::vector<std::string>& original_bodies,
                                    const UnigramTable& unigrams) {
    std::string out;
    std::size_t cursor = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '#') {
            out.push_back(text[i++]);
            continue;
        }
        std::size_t j = i + 1;
        while (j < text.size() && detail::is_hashtag_char(text[j])) ++j;
        if (j == i + 1) {
            out.push_back(text[i++]);
            continue;
        }
        const std::string body(text.substr(i + 1, j - i - 1));
        std::string source = body;
        for (std::size_t k = cursor; k < original_bodies.size(); ++k) {
            if (detail::ascii_lower(original_bodies[k]) == body) {
                source = original_bodies[k];
                cursor = k + 1;
                break;
            }
        }
        const std::string words = segment_hashtag(source, unigrams);
        if (!words.empty()) {
            if (!out.empty() && out.back() != ' ') out.push_back(' ');
            out += words;
            if (j < text.size() && text[j] != ' ') out.push_back(' ');
        }
        i = j;
    }
    return out;
}

/// Two or more `@user`/`@users` tokens collapse into a single `@users` at the
/// position of the first one. A lone mention is left alone.
inline std::string collapse_mentions(std::string_view text) {
    auto tokens = unicode::split_ws(text);
    auto is_mention = [](const std::string& t) {
        const std::string low = detail::ascii_lower(t);
        return low == "@user" || low == "@users";
    };
    const auto mentions = std::count_if(tokens.begin(), tokens.end(), is_mention);
    if (mentions < 2) return std::string(text);
    std::vector<std::string> out;
    bool placed = false;
    for (auto& t : tokens) {
        if (is_mention(t)) {
            if (!placed) out.emplace_back("@users");
            placed = true;
        } else {
            out.push_back(std::move(t));
        }
    }
    return unicode::join(out);
}

/// Whole-token substitution.
inline std::string substitute_rare(std::string_view text, const SubstitutionMap& substitutions) {
    auto tokens = unicode::split_ws(text);
    bool changed = false;
    for (auto& t : tokens) {
        auto it = substitutions.find(t);
        if (it != substitutions.end()) {
            t = it->second;
            changed = true;
        }
    }
    return changed ? unicode::join(tokens) : std::string(text);
}

struct NormalizeStats {
    std::size_t unknown_emoji = 0;  // emoji dropped because the table had no name for them
};

/// The tables and substitutions that parameterize normalization.
struct TextNormalizer {
    EmojiTable emoji;
    UnigramTable unigrams;
    SubstitutionMap substitutions = default_substitutions();

    NormalizedTweet operator()(const RawTweet& tweet, NormalizeStats* stats = nullptr) const;
};

/// Runs lowercase+strip, emoji, hashtag, mention and rare-word steps in that order.
inline NormalizedTweet normalize(const RawTweet& tweet, const EmojiTable& emoji, const UnigramTable& unigrams,
                                 const SubstitutionMap& substitutions = default_substitutions(),
                                 NormalizeStats* stats = nullptr) {
    NormalizedTweet out;
    out.id = tweet.id;
    const auto originals = hashtag_bodies(tweet.text);

    std::string s = lowercase_strip(tweet.text);
    out.steps_applied.emplace_back("lowercase_strip");

    std::size_t unknown = 0;
    s = tidy_spaces(emoji_to_words(s, emoji, &unknown));
    if (stats != nullptr) stats->unknown_emoji += unknown;
    out.steps_applied.emplace_back("emoji_to_words");

    s = tidy_spaces(segment_hashtags(s, originals, unigrams));
    out.steps_applied.emplace_back("segment_hashtags");

    s = collapse_mentions(s);
    out.steps_applied.emplace_back("collapse_mentions");

    s = substitute_rare(s, substitutions);
    out.steps_applied.emplace_back("substitute_rare");

    out.text = std::move(s);
    return out;
}

inline NormalizedTweet TextNormalizer::operator()(const RawTweet& tweet, NormalizeStats* stats) const {
    return normalize(tweet, emoji, unigrams, substitutions, stats);
}

}  // namespace hmtl
