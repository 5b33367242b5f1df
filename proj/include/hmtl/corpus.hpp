#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hmtl/error.hpp"
#include "hmtl/labels.hpp"
#include "hmtl/random.hpp"
#include "hmtl/textnorm.hpp"

namespace hmtl {

struct LabeledExample {
    NormalizedTweet tweet;
    LabelTriple labels;
    // Binarized score data: only the A label is real, B/C never enter a loss.
    bool synthetic = false;

    friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

struct ScoredExample {
    NormalizedTweet tweet;
    double avg_conf = 0.0;
    double std_conf = 0.0;

    friend bool operator==(const ScoredExample&, const ScoredExample&) = default;
};

/// Header names for labeled files; defaults follow the public OLID release.
struct LabeledColumns {
    std::string id = "id";
    std::string text = "tweet";
    std::string a = "subtask_a";
    std::string b = "subtask_b";
    std::string c = "subtask_c";
};

/// Header names for scored files; defaults follow the SOLID level-A release.
struct ScoredColumns {
    std::string id = "id";
    std::string text = "text";
    std::string average = "average";
    std::string std = "std";
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return fields;
}

inline std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                                const std::string& path) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw ParseError(path, 1, "missing column '" + name + "'");
}

inline bool parse_double(const std::string& s, double& out) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

/// Reads a header plus rows; calls `row(fields, lineno)` for each data line.
template <class RowFn>
void read_tsv(const std::string& path, RowFn&& row, std::vector<std::string>& header) {
    auto in = open_input(path);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(std::move(line));
        if (!have_header) {
            if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
            header = split_tabs(line);
            have_header = true;
            continue;
        }
        if (line.empty()) continue;
        auto fields = split_tabs(line);
        if (fields.size() != header.size()) {
            throw ParseError(path, lineno,
                             "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        }
        row(fields, lineno);
    }
    if (!have_header) throw ParseError(path, 1, "missing header");
}

inline std::string format_real(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace detail

inline std::vector<LabeledExample> load_labeled(const std::string& path, const TextNormalizer& normalizer,
                                                const LabeledColumns& columns = {},
                                                NormalizeStats* stats = nullptr) {
    std::vector<LabeledExample> examples;
    std::vector<std::string> header;
    std::size_t ci = 0, ct = 0, ca = 0, cb = 0, cc = 0;
    bool resolved = false;
    detail::read_tsv(
        path,
        [&](const std::vector<std::string>& f, std::size_t lineno) {
            if (!resolved) {
                ci = detail::column_index(header, columns.id, path);
                ct = detail::column_index(header, columns.text, path);
                ca = detail::column_index(header, columns.a, path);
                cb = detail::column_index(header, columns.b, path);
                cc = detail::column_index(header, columns.c, path);
                resolved = true;
            }
            if (f[ci].empty()) throw ParseError(path, lineno, "empty id");
            const auto a = parse_label<LabelA>(f[ca]);
            const auto b = parse_label<LabelB>(f[cb]);
            const auto c = parse_label<LabelC>(f[cc]);
            if (!a || !b || !c) throw ParseError(path, lineno, "unknown label");
            LabeledExample ex;
            try {
                ex.labels = LabelTriple(*a, *b, *c);
            } catch (const HierarchyError& e) {
                throw HierarchyError(path + ":" + std::to_string(lineno) + ": " + e.what());
            }
            ex.tweet = normalizer(RawTweet{f[ci], f[ct]}, stats);
            examples.push_back(std::move(ex));
        },
        header);
    if (!resolved) {
        for (const auto* name : {&columns.id, &columns.text, &columns.a, &columns.b, &columns.c}) {
            detail::column_index(header, *name, path);
        }
    }
    return examples;
}

inline void save_labeled(const std::string& path, const std::vector<LabeledExample>& examples,
                         const LabeledColumns& columns = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << columns.id << '\t' << columns.text << '\t' << columns.a << '\t' << columns.b << '\t' << columns.c << '\n';
    for (const auto& ex : examples) {
        out << ex.tweet.id << '\t' << ex.tweet.text << '\t' << to_string(ex.labels.a()) << '\t'
            << to_string(ex.labels.b()) << '\t' << to_string(ex.labels.c()) << '\n';
    }
}

inline std::vector<ScoredExample> load_scored(const std::string& path, const TextNormalizer& normalizer,
                                              const ScoredColumns& columns = {}, NormalizeStats* stats = nullptr) {
    std::vector<ScoredExample> examples;
    std::vector<std::string> header;
    std::size_t ci = 0, ct = 0, cavg = 0, cstd = 0;
    bool resolved = false;
    detail::read_tsv(
        path,
        [&](const std::vector<std::string>& f, std::size_t lineno) {
            if (!resolved) {
                ci = detail::column_index(header, columns.id, path);
                ct = detail::column_index(header, columns.text, path);
                cavg = detail::column_index(header, columns.average, path);
                cstd = detail::column_index(header, columns.std, path);
                resolved = true;
            }
            ScoredExample ex;
            if (!detail::parse_double(f[cavg], ex.avg_conf) || !detail::parse_double(f[cstd], ex.std_conf)) {
                throw ParseError(path, lineno, "malformed score");
            }
            if (!(ex.avg_conf >= 0.0 && ex.avg_conf <= 1.0)) {
                throw ParseError(path, lineno, "average " + f[cavg] + " outside [0, 1]");
            }
            if (!(ex.std_conf >= 0.0) || !std::isfinite(ex.std_conf)) {
                throw ParseError(path, lineno, "std " + f[cstd] + " must be a finite non-negative number");
            }
            if (f[ci].empty()) throw ParseError(path, lineno, "empty id");
            ex.tweet = normalizer(RawTweet{f[ci], f[ct]}, stats);
            examples.push_back(std::move(ex));
        },
        header);
    if (!resolved) {
        for (const auto* name : {&columns.id, &columns.text, &columns.average, &columns.std}) {
            detail::column_index(header, *name, path);
        }
    }
    return examples;
}

inline void save_scored(const std::string& path, const std::vector<ScoredExample>& examples,
                        const ScoredColumns& columns = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << columns.id << '\t' << columns.text << '\t' << columns.average << '\t' << columns.std << '\n';
    for (const auto& ex : examples) {
        out << ex.tweet.id << '\t' << ex.tweet.text << '\t' << detail::format_real(ex.avg_conf) << '\t'
            << detail::format_real(ex.std_conf) << '\n';
    }
}

/// avg_conf >= threshold becomes OFF. B/C are filled with the placeholder
/// consistent with A and the example is flagged synthetic.
inline LabelA binarize_score(double avg_conf, double threshold) {
    return avg_conf >= threshold ? LabelA::Off : LabelA::Not;
}

inline std::vector<LabeledExample> binarize(const std::vector<ScoredExample>& examples, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error("threshold must lie in (0, 1)");
    std::vector<LabeledExample> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) {
        const LabelA a = binarize_score(ex.avg_conf, threshold);
        LabeledExample labeled;
        labeled.tweet = ex.tweet;
        labeled.labels = a == LabelA::Off ? LabelTriple(LabelA::Off, LabelB::Unt, LabelC::Null)
                                          : LabelTriple(LabelA::Not, LabelB::Null, LabelC::Null);
        labeled.synthetic = true;
        out.push_back(std::move(labeled));
    }
    return out;
}

/// Seeded shuffle followed by a two-way split. The first part gets
/// round(train_fraction * N) items, clamped so both parts are non-empty.
template <class T>
std::pair<std::vector<T>, std::vector<T>> split(std::vector<T> items, std::pair<double, double> fractions,
                                                std::uint64_t seed) {
    const auto [train_fraction, val_fraction] = fractions;
    if (!(train_fraction > 0.0) || !(val_fraction > 0.0) || std::abs(train_fraction + val_fraction - 1.0) > 1e-9) {
        throw Error("split fractions must be positive and sum to 1");
    }
    if (items.size() < 2) throw Error("split needs at least 2 examples");
    Rng rng(seed);
    rng.shuffle(items);
    const auto n = items.size();
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    std::vector<T> val(std::make_move_iterator(items.begin() + static_cast<std::ptrdiff_t>(n_train)),
                       std::make_move_iterator(items.end()));
    items.resize(n_train);
    return {std::move(items), std::move(val)};
}

}  // namespace hmtl
