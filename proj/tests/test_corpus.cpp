#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "hmtl/corpus.hpp"
#include "support.hpp"

using namespace hmtl;
using hmtl::testing::bundled_normalizer;

namespace {

std::string write_temp(const std::string& name, const std::string& contents) {
    const std::string path = ::testing::TempDir() + name;
    std::ofstream out(path, std::ios::binary);
    out << contents;
    return path;
}

// The admissible rows, listed out instead of derived from the two rules.
bool table_row(LabelA a, LabelB b, LabelC c) {
    if (a == LabelA::Not) return b == LabelB::Null && c == LabelC::Null;
    if (b == LabelB::Unt) return c == LabelC::Null;
    if (b == LabelB::Tin) return c == LabelC::Ind || c == LabelC::Grp || c == LabelC::Oth;
    return false;
}

}  // namespace

TEST(Labels, NamesRoundTrip) {
    for (std::size_t i = 0; i < kClassCount<LabelC>; ++i) {
        const auto l = label_from_index<LabelC>(i);
        EXPECT_EQ(parse_label<LabelC>(to_string(l)), l);
        EXPECT_EQ(index_of(l), i);
    }
    EXPECT_EQ(to_string(LabelA::Off), "OFF");
    EXPECT_EQ(to_string(LabelB::Null), "NULL");
    EXPECT_FALSE(parse_label<LabelA>("off").has_value());
    EXPECT_FALSE(parse_label<LabelB>("IND").has_value());
    EXPECT_EQ(class_count(Task::A), 2u);
    EXPECT_EQ(class_count(Task::B), 3u);
    EXPECT_EQ(class_count(Task::C), 4u);
}

TEST(Labels, HierarchyAcceptsExactlyTheTableRows) {
    std::size_t accepted = 0;
    for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
            for (std::size_t c = 0; c < 4; ++c) {
                const auto la = label_from_index<LabelA>(a);
                const auto lb = label_from_index<LabelB>(b);
                const auto lc = label_from_index<LabelC>(c);
                const bool expected = table_row(la, lb, lc);
                EXPECT_EQ(LabelTriple::consistent(la, lb, lc), expected);
                if (expected) {
                    EXPECT_NO_THROW(LabelTriple(la, lb, lc));
                    ++accepted;
                } else {
                    EXPECT_THROW(LabelTriple(la, lb, lc), HierarchyError);
                }
            }
        }
    }
    EXPECT_EQ(accepted, 5u);
    EXPECT_EQ(LabelTriple::all_consistent().size(), 5u);
}

TEST(Labels, ViolationNamesTheTriple) {
    try {
        LabelTriple(LabelA::Not, LabelB::Tin, LabelC::Ind);
        FAIL();
    } catch (const HierarchyError& e) {
        EXPECT_NE(std::string(e.what()).find("(NOT, TIN, IND)"), std::string::npos);
    }
}

TEST(Corpus, LoadLabeledNormalizesAndValidates) {
    const auto path = write_temp("labeled.tsv",
                                 "\xEF\xBB\xBFid\ttweet\tsubtask_a\tsubtask_b\tsubtask_c\r\n"
                                 "1\t@USER @USER URL #KeithEllisonAbuse\tOFF\tTIN\tIND\r\n"
                                 "2\tHave a nice day 👍\tNOT\tNULL\tNULL\r\n"
                                 "3\tugh\tOFF\tUNT\tNULL\r\n");
    const auto rows = load_labeled(path, bundled_normalizer());
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].tweet.text, "@users http keith ellison abuse");
    EXPECT_EQ(rows[0].labels, LabelTriple(LabelA::Off, LabelB::Tin, LabelC::Ind));
    EXPECT_EQ(rows[1].tweet.text, "have a nice day thumbs up");
    EXPECT_FALSE(rows[1].synthetic);
}

TEST(Corpus, LoadLabeledErrorsCarryLineNumbers) {
    const std::string header = "id\ttweet\tsubtask_a\tsubtask_b\tsubtask_c\n";
    try {
        load_labeled(write_temp("bad1.tsv", header + "1\tok\tNOT\tNULL\tNULL\n2\tbad\tNOT\tTIN\tIND\n"),
                     bundled_normalizer());
        FAIL();
    } catch (const HierarchyError& e) {
        EXPECT_NE(std::string(e.what()).find(":3:"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("(NOT, TIN, IND)"), std::string::npos);
    }
    try {
        load_labeled(write_temp("bad2.tsv", header + "1\tok\tNOT\tNULL\n"), bundled_normalizer());
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    try {
        load_labeled(write_temp("bad3.tsv", header + "1\tok\tNOT\tNULL\tNULL\n2\tok\tMAYBE\tNULL\tNULL\n"),
                     bundled_normalizer());
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(load_labeled(write_temp("bad4.tsv", "id\ttext\n"), bundled_normalizer()), ParseError);
    EXPECT_THROW(load_labeled(::testing::TempDir() + "missing.tsv", bundled_normalizer()), Error);
}

TEST(Corpus, CustomColumnNames) {
    LabeledColumns cols;
    cols.text = "text";
    cols.a = "a";
    cols.b = "b";
    cols.c = "c";
    const auto rows = load_labeled(write_temp("cols.tsv", "c\tb\ta\ttext\tid\nNULL\tNULL\tNOT\tHi\tx\n"),
                                   bundled_normalizer(), cols);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].tweet.id, "x");
    EXPECT_EQ(rows[0].tweet.text, "hi");
}

TEST(Corpus, LabeledRoundTrip) {
    const auto path = write_temp("rt_in.tsv",
                                 "id\ttweet\tsubtask_a\tsubtask_b\tsubtask_c\n"
                                 "1\tHello #BookLover 👍\tNOT\tNULL\tNULL\n"
                                 "2\t@USER @USER idiots\tOFF\tTIN\tGRP\n"
                                 "3\tthem over there\tOFF\tTIN\tOTH\n");
    const auto first = load_labeled(path, bundled_normalizer());
    const std::string out = ::testing::TempDir() + "rt_out.tsv";
    save_labeled(out, first);
    EXPECT_EQ(load_labeled(out, bundled_normalizer()), first);
}

TEST(Corpus, LoadScored) {
    const auto rows = load_scored(write_temp("scored.tsv", "id\ttext\taverage\tstd\na\tHi\t0.5\t0.1\n"),
                                  bundled_normalizer());
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].avg_conf, 0.5);
    EXPECT_EQ(rows[0].std_conf, 0.1);
    EXPECT_TRUE(load_scored(write_temp("scored_empty.tsv", "id\ttext\taverage\tstd\n"), bundled_normalizer()).empty());
    try {
        load_scored(write_temp("scored_bad.tsv", "id\ttext\taverage\tstd\na\tx\t0.5\t0\nb\ty\t1.2\t0.1\n"),
                    bundled_normalizer());
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(load_scored(write_temp("scored_bad2.tsv", "id\ttext\taverage\tstd\na\tx\tabc\t0\n"),
                             bundled_normalizer()),
                 ParseError);
    EXPECT_THROW(load_scored(write_temp("scored_bad3.tsv", "id\ttext\taverage\tstd\na\tx\t0.4\t-1\n"),
                             bundled_normalizer()),
                 ParseError);
}

TEST(Corpus, ScoredRoundTripIsExact) {
    std::vector<ScoredExample> rows(3);
    const double values[] = {0.1, 1.0 / 3.0, 0.30000000000000004};
    for (std::size_t i = 0; i < 3; ++i) {
        rows[i].tweet = bundled_normalizer()(RawTweet{"s" + std::to_string(i), "text " + std::to_string(i)});
        rows[i].avg_conf = values[i];
        rows[i].std_conf = values[2 - i] / 7.0;
    }
    const std::string path = ::testing::TempDir() + "scored_rt.tsv";
    save_scored(path, rows);
    EXPECT_EQ(load_scored(path, bundled_normalizer()), rows);
}

TEST(Binarize, ThresholdBoundary) {
    EXPECT_EQ(binarize_score(0.31, 0.3), LabelA::Off);
    EXPECT_EQ(binarize_score(0.29, 0.3), LabelA::Not);
    EXPECT_EQ(binarize_score(0.30, 0.3), LabelA::Off);
}

TEST(Binarize, PlaceholdersAreConsistentAndSynthetic) {
    std::vector<ScoredExample> rows(2);
    rows[0].avg_conf = 0.9;
    rows[1].avg_conf = 0.1;
    const auto out = binarize(rows, 0.3);
    EXPECT_EQ(out[0].labels, LabelTriple(LabelA::Off, LabelB::Unt, LabelC::Null));
    EXPECT_EQ(out[1].labels, LabelTriple(LabelA::Not, LabelB::Null, LabelC::Null));
    EXPECT_TRUE(out[0].synthetic && out[1].synthetic);
    EXPECT_THROW(binarize(rows, 0.0), Error);
    EXPECT_THROW(binarize(rows, 1.0), Error);
}

TEST(Binarize, RaisingTheThresholdNeverCreatesOff) {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const double lo = rng.uniform(0.01, 0.98);
        const double hi = rng.uniform(lo, 0.99);
        for (int k = 0; k < 20; ++k) {
            const double s = rng.uniform();
            if (binarize_score(s, lo) == LabelA::Not) {
                EXPECT_EQ(binarize_score(s, hi), LabelA::Not);
            }
        }
    }
}

TEST(Split, SizesAndDeterminism) {
    std::vector<int> items(100);
    for (int i = 0; i < 100; ++i) items[i] = i;
    const auto [train, val] = split(items, {0.8, 0.2}, 7);
    EXPECT_EQ(train.size(), 80u);
    EXPECT_EQ(val.size(), 20u);
    const auto again = split(items, {0.8, 0.2}, 7);
    EXPECT_EQ(again.first, train);
    EXPECT_EQ(again.second, val);
    std::set<int> all(train.begin(), train.end());
    all.insert(val.begin(), val.end());
    EXPECT_EQ(all.size(), 100u);
    EXPECT_NE(split(items, {0.8, 0.2}, 8).first, train);
}

TEST(Split, Errors) {
    EXPECT_THROW(split(std::vector<int>{1, 2, 3}, {0.5, 0.6}, 1), Error);
    EXPECT_THROW(split(std::vector<int>{1}, {0.5, 0.5}, 1), Error);
    const auto [a, b] = split(std::vector<int>{1, 2}, {0.99, 0.01}, 1);
    EXPECT_EQ(a.size(), 1u);
    EXPECT_EQ(b.size(), 1u);
}
