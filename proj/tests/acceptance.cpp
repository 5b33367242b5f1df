// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "../tools/cli.hpp"
#include "support.hpp"

using namespace hmtl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int cli(std::vector<std::string> args, std::string* captured = nullptr) {
    args.insert(args.begin(), "hmtl");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (captured != nullptr) *captured = out.str() + err.str();
    return code;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::size_t> iota_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

TokenSequence sequence_of(const std::vector<TokenId>& body, std::size_t len) {
    TokenSequence s;
    s.ids.assign(len, kPadId);
    s.mask.assign(len, 0);
    s.ids[0] = kClsId;
    s.mask[0] = 1;
    for (std::size_t i = 0; i < body.size() && i + 1 < len; ++i) {
        s.ids[i + 1] = body[i];
        s.mask[i + 1] = 1;
    }
    return s;
}

// ---- 1 ----------------------------------------------------------------------------

Outcome gradient_exactness() {
    const auto t0 = std::chrono::steady_clock::now();
    std::string text;
    const int code = cli({"gradcheck", "--epsilon", "1e-4"}, &text);
    const double elapsed = seconds_since(t0);
    std::size_t params = 0;
    double err = -1.0;
    std::istringstream in(text);
    for (std::string word; in >> word;) {
        if (word == "parameters") in >> params;
        if (word == "max_relative_error") in >> err;
    }
    const bool pass = code == 0 && err >= 0.0 && err <= 1e-3 && params <= 10000 && elapsed < 60.0;
    return {pass, fmt("%zu parameters, max relative error %.3g (limit 1e-3), %.1f s (limit 60 s)", params, err, elapsed)};
}

// ---- 2 ----------------------------------------------------------------------------

Outcome memorization() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t vocab = 40, len = 10;
    Rng rng(2024);
    const auto triples = LabelTriple::all_consistent();
    std::vector<EncodedExample> data;
    for (std::size_t i = 0; i < 64; ++i) {
        std::vector<TokenId> body(3 + rng.index(len - 3));
        for (auto& id : body) id = static_cast<TokenId>(3 + rng.index(vocab - 3));
        data.push_back(EncodedExample{std::to_string(i), sequence_of(body, len), triples[i % triples.size()], false});
    }
    EncoderConfig enc{16, 1, 2, 32, len, vocab, 0.0};
    MtlModel model = init_model(enc, HeadConfig{16}, ModelKind::Mtl, LossWeights{0.4, 0.3, 0.3}, 7);
    Adam adam(3e-3);
    const auto params = parameters_of(model);
    auto order = iota_indices(data.size());
    std::size_t epoch = 0;
    std::array<double, 3> accuracy{};
    while (epoch < 300) {
        ++epoch;
        rng.shuffle(order);
        for (const auto& chunk : chunk_indices(order, 16)) {
            Graph g;
            const auto logits = model_logits(g, model, batch_of(data, chunk));
            g.backward(model_loss(g, model, logits, targets_of(data, chunk)).total);
            adam.step(params, g);
        }
        const auto preds = predict_all(model, data);
        for (Task t : kTasks) {
            std::size_t right = 0;
            for (std::size_t i = 0; i < data.size(); ++i) right += preds[i].label_index(t) == data[i].labels.index(t);
            accuracy[static_cast<std::size_t>(t)] = static_cast<double>(right) / static_cast<double>(data.size());
        }
        if (accuracy[0] == 1.0 && accuracy[1] == 1.0 && accuracy[2] == 1.0) break;
    }
    const double elapsed = seconds_since(t0);
    const bool pass = accuracy[0] == 1.0 && accuracy[1] == 1.0 && accuracy[2] == 1.0 && elapsed < 300.0;
    return {pass, fmt("train accuracy A/B/C %.3f/%.3f/%.3f after %zu epochs (limit 300), %.1f s (limit 300 s)",
                      accuracy[0], accuracy[1], accuracy[2], epoch, elapsed)};
}

// ---- 3 ----------------------------------------------------------------------------

// Each example carries three latent features: offensiveness, target presence and
// target kind. Tokens reveal all three; the gold A label flips with probability
// `noise`, and B and C then follow deterministically from A and the latents.
std::vector<EncodedExample> latent_corpus(std::size_t n, double noise, std::uint64_t seed) {
    constexpr std::size_t kLen = 14;
    constexpr TokenId kNoiseBegin = 45, kNoiseEnd = 120;
    Rng rng(seed);
    std::vector<EncodedExample> out;
    for (std::size_t i = 0; i < n; ++i) {
        const bool off = rng.bernoulli(0.5);
        const bool targeted = rng.bernoulli(0.6);
        const std::size_t kind = rng.index(3);
        std::vector<TokenId> body;
        for (std::size_t k = 0, m = 4 + rng.index(6); k < m; ++k) {
            body.push_back(static_cast<TokenId>(kNoiseBegin + rng.index(kNoiseEnd - kNoiseBegin)));
        }
        auto put = [&](TokenId base) {
            const TokenId tok = static_cast<TokenId>(base + rng.index(5));
            body.insert(body.begin() + static_cast<std::ptrdiff_t>(rng.index(body.size() + 1)), tok);
        };
        put(off ? 10 : 15);
        put(targeted ? 25 : 20);
        put(static_cast<TokenId>(30 + 5 * kind));
        const bool gold_off = rng.bernoulli(noise) ? !off : off;
        LabelTriple labels;
        if (!gold_off) {
            labels = LabelTriple(LabelA::Not, LabelB::Null, LabelC::Null);
        } else if (!targeted) {
            labels = LabelTriple(LabelA::Off, LabelB::Unt, LabelC::Null);
        } else {
            labels = LabelTriple(LabelA::Off, LabelB::Tin, label_from_index<LabelC>(kind));
        }
        out.push_back(EncodedExample{std::to_string(i), sequence_of(body, kLen), labels, false});
    }
    return out;
}

Outcome mtl_trend() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto corpus = latent_corpus(2000, 0.15, 99);
    const std::vector<EncodedExample> train_set(corpus.begin(), corpus.begin() + 1600);
    const std::vector<EncodedExample> val_set(corpus.begin() + 1600, corpus.end());
    EncoderConfig enc{16, 1, 2, 32, 14, 120, 0.1};
    double mtl_sum = 0.0, base_sum = 0.0;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TrainConfig cfg;
        cfg.learning_rate = 3e-3;
        cfg.batch_size = 32;
        cfg.max_epochs = 8;
        cfg.patience = 3;
        cfg.seed = seed;
        double f1[2];
        for (int k = 0; k < 2; ++k) {
            const ModelKind kind = k == 0 ? ModelKind::Mtl : ModelKind::Baseline;
            const auto result = train(init_model(enc, HeadConfig{16}, kind, cfg.loss_weights, 100 + seed), train_set,
                                      val_set, cfg);
            f1[k] = result.history.best_f1_a();
        }
        mtl_sum += f1[0];
        base_sum += f1[1];
        per_seed += fmt(" %.3f/%.3f", f1[0], f1[1]);
    }
    const double mtl = mtl_sum / 5.0, base = base_sum / 5.0;
    return {mtl >= base - 0.01, fmt("mean val F1(A) mtl %.4f vs baseline %.4f (need >= baseline - 0.01); per seed%s; "
                                    "%.1f s",
                                    mtl, base, per_seed.c_str(), seconds_since(t0))};
}

// ---- 4 ----------------------------------------------------------------------------

Outcome macro_f1_oracle() {
    Rng rng(4);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t classes = 2 + rng.index(3);
        const std::size_t n = 1 + rng.index(200);
        std::vector<std::size_t> g(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = rng.index(classes);
            p[i] = rng.index(classes);
        }
        worst = std::max(worst, std::abs(macro_f1(g, p, classes) - hmtl::testing::reference_macro_f1(g, p, classes)));
    }
    const std::vector<LabelA> gold{LabelA::Off, LabelA::Off, LabelA::Not, LabelA::Not};
    const std::vector<LabelA> pred{LabelA::Off, LabelA::Not, LabelA::Not, LabelA::Not};
    const double hand = macro_f1(gold, pred, {LabelA::Off, LabelA::Not});
    const double expected = (2.0 / 3.0 + 4.0 / 5.0) / 2.0;
    const bool pass = worst <= 1e-12 && std::abs(hand - expected) <= 1e-12;
    return {pass, fmt("max deviation over 1000 cases %.3g (limit 1e-12); hand case %.15f", worst, hand)};
}

// ---- 5 ----------------------------------------------------------------------------

Outcome segmentation_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::string> words{"the", "there", "here", "her", "is",  "this", "hist", "test", "at",  "ate",
                                         "tea", "team",  "me",   "meat", "an", "and",  "sand", "no",   "not", "note"};
    UnigramTable u;
    for (std::size_t i = 0; i < words.size(); ++i) u.add(words[i], 50 + 37 * ((i * 7) % 20));

    std::unordered_set<std::string> strings;
    std::vector<std::string> frontier{""};
    while (!frontier.empty()) {
        std::vector<std::string> next;
        for (const auto& s : frontier) {
            for (const auto& w : words) {
                if (s.size() + w.size() > 12) continue;
                if (strings.insert(s + w).second) next.push_back(s + w);
            }
        }
        frontier = std::move(next);
    }
    std::size_t mismatches = 0;
    std::string example;
    for (const auto& s : strings) {
        const std::string got = segment_hashtag(s, u);
        const std::string want = unicode::join(hmtl::testing::brute_force_segment(s, u));
        if (got != want) {
            if (mismatches++ == 0) example = s + ": " + got + " vs " + want;
        }
    }
    const std::string keith = segment_hashtag("KeithEllisonAbuse", hmtl::testing::bundled_normalizer().unigrams);
    const std::string tweet =
        hmtl::testing::bundled_normalizer()(RawTweet{"x", "#KeithEllisonAbuse"}).text;
    const bool pass = mismatches == 0 && keith == "keith ellison abuse" && tweet == keith;
    return {pass, fmt("%zu strings, %zu mismatches%s; #KeithEllisonAbuse -> \"%s\"; %.1f s", strings.size(), mismatches,
                      example.empty() ? "" : (" e.g. " + example).c_str(), tweet.c_str(), seconds_since(t0))};
}

// ---- 6 ----------------------------------------------------------------------------

Outcome preprocessing_golden() {
    const std::string dir = HMTL_TEST_DATA_DIR;
    const auto rows = load_labeled(dir + "/golden_input.tsv", hmtl::testing::bundled_normalizer());
    std::map<std::string, std::string> expected;
    {
        std::ifstream in(dir + "/golden_expected.tsv");
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            const auto tab = line.find('\t');
            expected[line.substr(0, tab)] = line.substr(tab + 1);
        }
    }
    std::size_t matched = 0;
    std::string first_bad;
    std::vector<std::string> texts;
    for (const auto& r : rows) {
        texts.push_back(r.tweet.text);
        if (expected.count(r.tweet.id) && expected[r.tweet.id] == r.tweet.text) {
            ++matched;
        } else if (first_bad.empty()) {
            first_bad = r.tweet.id + " -> \"" + r.tweet.text + "\"";
        }
    }
    bool saw_thumbs = false, saw_users = false, saw_http = false;
    for (const auto& t : texts) {
        const auto toks = unicode::split_ws(t);
        saw_thumbs = saw_thumbs || t.find("thumbs up") != std::string::npos;
        saw_users = saw_users || std::count(toks.begin(), toks.end(), "@users") > 0;
        saw_http = saw_http || std::count(toks.begin(), toks.end(), "http") > 0;
    }
    // The long row has 100 tokens; [CLS] plus the first 63 survive.
    const auto vocab = build_vocab(texts, 1);
    bool truncated = false;
    for (const auto& r : rows) {
        if (r.tweet.id != "long") continue;
        const auto seq = encode(r.tweet.text, vocab, 64);
        const auto back = decode(seq, vocab);
        const auto all = unicode::split_ws(r.tweet.text);
        truncated = all.size() == 100 && seq.ids.size() == 64 && seq.length() == 64 && back.size() == 63 &&
                    std::equal(back.begin(), back.end(), all.begin());
    }
    const bool pass = matched == expected.size() && rows.size() == expected.size() && saw_thumbs && saw_users &&
                      saw_http && truncated;
    return {pass, fmt("%zu/%zu golden rows exact%s; thumbs up %s, @users %s, http %s; 64-token truncation %s", matched,
                      expected.size(), first_bad.empty() ? "" : (", first mismatch " + first_bad).c_str(),
                      saw_thumbs ? "yes" : "no", saw_users ? "yes" : "no", saw_http ? "yes" : "no",
                      truncated ? "ok" : "wrong")};
}

// ---- 7 ----------------------------------------------------------------------------

// Rows of the label table written out by hand.
bool admissible(std::size_t a, std::size_t b, std::size_t c) {
    const std::string triple = std::string(to_string(label_from_index<LabelA>(a))) + "/" +
                               std::string(to_string(label_from_index<LabelB>(b))) + "/" +
                               std::string(to_string(label_from_index<LabelC>(c)));
    static const std::set<std::string> rows{"NOT/NULL/NULL", "OFF/UNT/NULL", "OFF/TIN/IND", "OFF/TIN/GRP",
                                            "OFF/TIN/OTH"};
    return rows.count(triple) > 0;
}

Outcome hierarchy_validation() {
    Rng rng(7);
    std::size_t wrong = 0, draws = 20000;
    std::set<std::size_t> accepted;
    for (std::size_t i = 0; i < draws; ++i) {
        const std::size_t a = rng.index(2), b = rng.index(3), c = rng.index(4);
        const auto la = label_from_index<LabelA>(a);
        const auto lb = label_from_index<LabelB>(b);
        const auto lc = label_from_index<LabelC>(c);
        bool constructed = true;
        try {
            LabelTriple t(la, lb, lc);
        } catch (const HierarchyError&) {
            constructed = false;
        }
        const bool expected = admissible(a, b, c);
        if (constructed != expected || LabelTriple::consistent(la, lb, lc) != expected) ++wrong;
        if (constructed) accepted.insert(a * 12 + b * 4 + c);
    }
    const bool oth_ok = LabelTriple::consistent(LabelA::Off, LabelB::Tin, LabelC::Oth);
    const bool pass = wrong == 0 && accepted.size() == 5 && oth_ok;
    return {pass, fmt("%zu random draws, %zu disagreements, %zu distinct triples accepted (expect 5), OFF/TIN/OTH %s",
                      draws, wrong, accepted.size(), oth_ok ? "accepted" : "rejected")};
}

// ---- 8 ----------------------------------------------------------------------------

std::vector<double> distribution(Rng& rng, std::size_t classes, std::size_t peak) {
    std::vector<double> p(classes);
    double z = 0.0;
    for (double& v : p) z += (v = rng.uniform(0.01, 1.0));
    p[peak] += z;  // guarantees the argmax
    z += z;
    for (double& v : p) v /= z;
    return p;
}

Outcome ensemble_oracle() {
    Rng rng(8);
    std::size_t mismatches = 0, cases = 0, ties = 0;
    auto check = [&](std::size_t k, bool force_tie) {
        std::vector<std::vector<PredictionTriple>> members(k, std::vector<PredictionTriple>(1));
        for (Task t : kTasks) {
            const std::size_t classes = class_count(t);
            const std::size_t l1 = rng.index(classes), l2 = (l1 + 1 + rng.index(classes - 1)) % classes;
            for (std::size_t m = 0; m < k; ++m) {
                const std::size_t peak = force_tie ? (m % 2 == 0 ? l1 : l2) : rng.index(classes);
                members[m][0].probs[static_cast<std::size_t>(t)] = distribution(rng, classes, peak);
            }
        }
        const auto voted = majority_vote(members).front();
        for (Task t : kTasks) {
            std::vector<std::vector<double>> probs;
            for (const auto& m : members) probs.push_back(m[0].probabilities(t));
            if (voted.get(t) != hmtl::testing::reference_vote(probs)) ++mismatches;
            ++cases;
        }
        ties += force_tie ? 3 : 0;
    };
    const std::size_t odd[] = {1, 3, 5, 7};
    for (int i = 0; i < 1000; ++i) check(odd[i % 4], false);
    const std::size_t even[] = {2, 4, 6};
    for (int i = 0; i < 300; ++i) check(even[i % 3], true);
    return {mismatches == 0, fmt("%zu task votes checked (%zu forced even-k ties), %zu mismatches", cases, ties,
                                 mismatches)};
}

// ---- 9 ----------------------------------------------------------------------------

Outcome early_stopping() {
    Rng rng(9);
    const std::size_t patience = 3, max_epochs = 20;
    std::size_t early = 0, violations = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        EarlyStopping stop(patience);
        double level = 0.5;
        const double rise = rng.uniform();  // some traces climb steadily, others stall
        std::size_t stopped = 0;
        for (std::size_t e = 1; e <= max_epochs; ++e) {
            if (rng.bernoulli(rise)) {
                level += 0.01;
            } else if (rng.bernoulli(0.5)) {
                level -= 0.01 * static_cast<double>(rng.index(2));
            }
            stop.observe(level);
            if (stop.should_stop()) {
                stopped = e;
                break;
            }
        }
        if (stopped != 0 && stopped < max_epochs) {
            ++early;
            if (stopped - stop.best_epoch() != patience) ++violations;
        }
    }
    EarlyStopping hand(patience);
    std::size_t hand_stop = 0;
    for (double v : {0.5, 0.6, 0.6, 0.6, 0.6, 0.6}) {
        hand.observe(v);
        if (hand.should_stop()) {
            hand_stop = hand.epochs();
            break;
        }
    }
    // A real run whose validation score cannot move.
    const auto data = latent_corpus(40, 0.0, 5);
    TrainConfig cfg;
    cfg.learning_rate = 1e-12;
    cfg.patience = patience;
    cfg.max_epochs = max_epochs;
    cfg.batch_size = 16;
    const auto run = train(init_model(EncoderConfig{8, 1, 2, 16, 14, 120, 0.0}, HeadConfig{4}, ModelKind::Mtl,
                                      LossWeights{}, 1),
                           data, data, cfg);
    const bool run_ok =
        run.history.stopped_early && run.history.stopped_epoch - run.history.best_epoch == patience;
    const bool pass = violations == 0 && early > 0 && hand_stop == 5 && hand.best_epoch() == 2 && run_ok;
    return {pass, fmt("%zu of 2000 traces stopped early, %zu violations; [0.5,0.6,0.6,0.6,0.6] stops at %zu best %zu; "
                      "training run stopped at %zu best %zu",
                      early, violations, hand_stop, hand.best_epoch(), run.history.stopped_epoch,
                      run.history.best_epoch)};
}

// ---- 10 ---------------------------------------------------------------------------

Outcome binarization() {
    Rng rng(10);
    std::size_t flips = 0, checked = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<ScoredExample> rows(50);
        for (auto& r : rows) r.avg_conf = rng.uniform();
        const double lo = rng.uniform(0.01, 0.98), hi = rng.uniform(lo, 0.99);
        const auto at_lo = binarize(rows, lo), at_hi = binarize(rows, hi);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            ++checked;
            if (at_lo[i].labels.a() == LabelA::Not && at_hi[i].labels.a() == LabelA::Off) ++flips;
        }
    }
    std::vector<ScoredExample> edge(1);
    edge[0].avg_conf = 0.3;
    const bool boundary = binarize(edge, 0.3)[0].labels.a() == LabelA::Off && binarize_score(0.3, 0.3) == LabelA::Off;
    return {flips == 0 && boundary,
            fmt("%zu score/threshold pairs, %zu NOT->OFF flips; 0.3 at threshold 0.3 -> %s", checked, flips,
                boundary ? "OFF" : "NOT")};
}

// ---- 11 ---------------------------------------------------------------------------

Outcome reproducibility() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::string data = HMTL_TEST_DATA_DIR;
    const fs::path work = fs::current_path() / "acceptance_repro";
    fs::remove_all(work);
    const std::vector<std::string> files{"train.norm.tsv", "model.ckpt", "model.ckpt.config.json", "metrics.txt",
                                         "report.txt", "preds.tsv"};
    for (const char* run : {"a", "b"}) {
        const fs::path d = work / run;
        fs::create_directories(d);
        const std::string p = d.string() + "/";
        if (cli({"preprocess", "--input", data + "/train.tsv", "--output", p + "train.norm.tsv"}) != 0 ||
            cli({"train", "--config", data + "/tiny.json", "--train", data + "/train.tsv", "--val", data + "/val.tsv",
                 "--out", p + "model.ckpt", "--metrics", p + "metrics.txt"}) != 0 ||
            cli({"evaluate", "--model", p + "model.ckpt", "--data", data + "/val.tsv", "--report", p + "report.txt"}) !=
                0 ||
            cli({"predict", "--model", p + "model.ckpt", "--data", data + "/val.tsv", "--out", p + "preds.tsv"}) != 0) {
            return {false, std::string("pipeline run ") + run + " failed"};
        }
    }
    std::size_t identical = 0;
    std::string differing;
    for (const auto& f : files) {
        const auto a = slurp(work / "a" / f), b = slurp(work / "b" / f);
        if (!a.empty() && a == b) {
            ++identical;
        } else {
            differing += " " + f;
        }
    }
    // Checkpoint round trip: reload, re-save, predict.
    const auto ck = load_checkpoint((work / "a" / "model.ckpt").string());
    save_checkpoint((work / "resaved.ckpt").string(), ck.model, ck.vocab);
    const auto again = load_checkpoint((work / "resaved.ckpt").string());
    const auto& norm = hmtl::testing::bundled_normalizer();
    const auto val = encode_corpus(load_labeled(data + "/val.tsv", norm), ck.vocab, ck.model.encoder.config.max_len);
    const bool same_preds = predict_all(ck.model, val) == predict_all(again.model, val);
    const bool same_bytes = slurp(work / "a" / "model.ckpt") == slurp(work / "resaved.ckpt");
    const bool pass = identical == files.size() && same_preds && same_bytes;
    return {pass, fmt("%zu/%zu output files byte-identical across runs%s; reloaded checkpoint predictions %s, re-saved "
                      "bytes %s; %.1f s",
                      identical, files.size(), differing.empty() ? "" : (" (differ:" + differing + ")").c_str(),
                      same_preds ? "identical" : "differ", same_bytes ? "identical" : "differ", seconds_since(t0))};
}

// ---- 12 ---------------------------------------------------------------------------

Outcome pretraining_smoke() {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig rc;
    rc.encoder.vocab_size = 200;
    rc.encoder.max_len = 32;
    Rng rng(12);
    std::vector<EncodedScored> scored;
    for (std::size_t i = 0; i < 500; ++i) {
        std::vector<TokenId> body(4 + rng.index(20));
        double hits = 0.0;
        for (auto& id : body) {
            id = static_cast<TokenId>(3 + rng.index(197));
            hits += id < 40 ? 1.0 : 0.0;
        }
        const double target = std::min(1.0, 2.5 * hits / static_cast<double>(body.size()));
        scored.push_back(EncodedScored{std::to_string(i), sequence_of(body, 32), target});
    }
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 32;
    cfg.max_epochs = 3;
    cfg.seed = 12;
    const auto model = init_model(rc.encoder, rc.heads, ModelKind::Mtl, LossWeights{}, 12);
    const auto result = pretrain_regression(model, scored, cfg);
    const auto& m = result.epoch_mse;
    const bool pass = m.size() == 3 && result.initial_mse > m[0] && m[0] > m[1] && m[1] > m[2];
    return {pass, fmt("MSE initial %.5f, epochs %.5f > %.5f > %.5f; %.1f s", result.initial_mse, m.at(0), m.at(1),
                      m.at(2), seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient exactness", gradient_exactness},
        {"memorization", memorization},
        {"MTL trend", mtl_trend},
        {"macro-F1 oracle", macro_f1_oracle},
        {"segmentation oracle", segmentation_oracle},
        {"preprocessing golden suite", preprocessing_golden},
        {"hierarchy validation", hierarchy_validation},
        {"ensemble oracle", ensemble_oracle},
        {"early stopping", early_stopping},
        {"binarization", binarization},
        {"reproducibility", reproducibility},
        {"pre-training smoke", pretraining_smoke},
    };
    std::set<std::size_t> only;
    for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::stoul(argv[i])));
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!only.empty() && !only.count(i + 1)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
