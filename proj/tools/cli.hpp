#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hmtl/hmtl.hpp"

#ifndef HMTL_DATA_DIR
#define HMTL_DATA_DIR "data"
#endif

namespace hmtl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Flags shared by the subcommands that read a run configuration.
struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string emoji_table;
    std::string unigram_table;
};

inline void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", f.seed, "override config seed");
    cmd->add_option("--emoji", f.emoji_table, "emoji table (emoji<TAB>name)");
    cmd->add_option("--unigrams", f.unigram_table, "unigram table (word<TAB>count)");
}

inline RunConfig resolve_config(const CommonFlags& f) {
    RunConfig cfg = f.config_path.empty() ? RunConfig{} : load_run_config(f.config_path);
    if (f.seed) cfg.seed = *f.seed;
    if (!f.emoji_table.empty()) cfg.preprocess.emoji_table = f.emoji_table;
    if (!f.unigram_table.empty()) cfg.preprocess.unigram_table = f.unigram_table;
    if (cfg.preprocess.emoji_table.empty()) cfg.preprocess.emoji_table = std::string(HMTL_DATA_DIR) + "/emoji.tsv";
    if (cfg.preprocess.unigram_table.empty()) {
        cfg.preprocess.unigram_table = std::string(HMTL_DATA_DIR) + "/unigrams.tsv";
    }
    cfg.train.seed = cfg.seed;
    return cfg;
}

inline TextNormalizer make_normalizer(const RunConfig& cfg) {
    return {EmojiTable::load(cfg.preprocess.emoji_table), UnigramTable::load(cfg.preprocess.unigram_table),
            cfg.preprocess.substitutions};
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
    if (!out) throw Error("failed writing " + path);
}

inline void write_config_echo(const std::string& path, const RunConfig& cfg) { write_text(path, to_json(cfg).dump(2) + "\n"); }

/// Ids and texts from any TSV with an `id` column and a `tweet` or `text` column.
inline std::vector<RawTweet> load_raw(const std::string& path) {
    std::vector<std::string> header;
    std::vector<RawTweet> out;
    std::size_t ci = 0, ct = 0;
    bool resolved = false;
    detail::read_tsv(
        path,
        [&](const std::vector<std::string>& f, std::size_t) {
            if (!resolved) {
                ci = detail::column_index(header, "id", path);
                bool has_tweet = false;
                for (const auto& h : header) has_tweet = has_tweet || h == "tweet";
                ct = detail::column_index(header, has_tweet ? "tweet" : "text", path);
                resolved = true;
            }
            out.push_back({f[ci], f[ct]});
        },
        header);
    return out;
}

inline std::vector<TokenSequence> encode_texts(const std::vector<RawTweet>& raw, const TextNormalizer& normalizer,
                                               const Vocabulary& vocab, std::size_t max_len) {
    std::vector<TokenSequence> out;
    for (const auto& r : raw) out.push_back(encode(normalizer(r).text, vocab, max_len));
    return out;
}

inline std::vector<PredictionTriple> predict_sequences(const MtlModel& model, const std::vector<TokenSequence>& seqs) {
    std::vector<PredictionTriple> out;
    for (std::size_t i = 0; i < seqs.size(); i += 64) {
        std::vector<const TokenSequence*> chunk;
        for (std::size_t k = i; k < std::min(seqs.size(), i + 64); ++k) chunk.push_back(&seqs[k]);
        for (auto& p : predict_batch(model, make_batch(std::span<const TokenSequence* const>(chunk)))) {
            out.push_back(std::move(p));
        }
    }
    return out;
}

/// `id label_a label_b label_c`; tasks a model does not predict are written as "-".
inline std::string prediction_tsv(const std::vector<RawTweet>& raw, const std::vector<VotedLabels>& labels) {
    std::string out = "id\tlabel_a\tlabel_b\tlabel_c\n";
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out += raw[i].id;
        for (Task t : kTasks) {
            out += '\t';
            const auto ti = static_cast<std::size_t>(t);
            out += labels[i].present[ti] ? std::string(class_name(t, labels[i].index[ti])) : std::string("-");
        }
        out += '\n';
    }
    return out;
}

inline std::vector<VotedLabels> argmax_labels(const std::vector<PredictionTriple>& preds) {
    return majority_vote({preds});
}

/// Validates a config whose vocabulary size is still to be taken from the data.
inline void validate_before_vocab(RunConfig cfg) {
    cfg.encoder.vocab_size = std::max<std::size_t>(cfg.encoder.vocab_size, 1);
    cfg.validate();
}

/// Vocabulary over the training texts, then a fresh model sized to it.
inline std::pair<Vocabulary, MtlModel> fresh_model(RunConfig& cfg, const std::vector<std::string>& texts,
                                                   std::uint64_t seed) {
    Vocabulary vocab = build_vocab(texts, cfg.data.min_freq, cfg.data.max_vocab);
    cfg.encoder.vocab_size = vocab.size();
    cfg.validate();
    MtlModel model = init_model(cfg.encoder, cfg.heads, cfg.model, cfg.train.loss_weights, seed);
    return {std::move(vocab), std::move(model)};
}

struct TrainInputs {
    std::vector<LabeledExample> train;
    std::vector<LabeledExample> val;
};

inline TrainInputs load_train_inputs(const RunConfig& cfg, const TextNormalizer& normalizer,
                                     const std::string& train_path, const std::string& val_path,
                                     const std::string& scored_path) {
    TrainInputs in;
    if (!train_path.empty()) in.train = load_labeled(train_path, normalizer);
    if (!scored_path.empty()) {
        auto extra = binarize(load_scored(scored_path, normalizer), cfg.data.threshold);
        in.train.insert(in.train.end(), extra.begin(), extra.end());
    }
    if (in.train.empty()) throw Error("no training examples");
    if (!val_path.empty()) {
        in.val = load_labeled(val_path, normalizer);
    } else {
        auto [tr, va] = split(std::move(in.train), {1.0 - cfg.data.val_fraction, cfg.data.val_fraction}, cfg.seed);
        in.train = std::move(tr);
        in.val = std::move(va);
    }
    return in;
}

inline std::vector<std::string> texts_of(const std::vector<LabeledExample>& examples) {
    std::vector<std::string> out;
    for (const auto& e : examples) out.push_back(e.tweet.text);
    return out;
}

/// Builds (or warm-starts) a model, trains it, and writes the checkpoint plus metrics.
inline TrainResult train_one(RunConfig cfg, const TrainInputs& data, const std::string& init_path, std::uint64_t seed,
                             Vocabulary& vocab_out, std::ostream& log) {
    MtlModel model;
    if (!init_path.empty()) {
        Checkpoint warm = load_checkpoint(init_path);
        cfg.encoder = warm.model.encoder.config;
        cfg.validate();
        vocab_out = warm.vocab;
        model = init_model(cfg.encoder, cfg.heads, cfg.model, cfg.train.loss_weights, seed);
        model.encoder = warm.model.encoder;
    } else {
        auto [vocab, fresh] = fresh_model(cfg, texts_of(data.train), seed);
        vocab_out = std::move(vocab);
        model = std::move(fresh);
    }
    const auto train_set = encode_corpus(data.train, vocab_out, cfg.data.max_len);
    const auto val_set = encode_corpus(data.val, vocab_out, cfg.data.max_len);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    return train(std::move(model), train_set, val_set, tc, [&](const EpochRecord& e) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "epoch %zu loss %.6f val_f1_a %.6f\n", e.epoch, e.train_loss, e.val_f1[0]);
        log << buf;
    });
}

inline std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// The small model used by `gradcheck` when no configuration is given.
inline RunConfig tiny_config() {
    RunConfig cfg;
    cfg.encoder = {16, 1, 2, 32, 12, 32, 0.0};
    cfg.heads.hidden = 16;
    cfg.data.max_len = 12;
    return cfg;
}

/// Random token sequences and consistent labels for gradient checks.
inline std::vector<EncodedExample> random_batch(const EncoderConfig& enc, std::size_t seq_len, std::size_t n,
                                                std::uint64_t seed) {
    Rng rng(seed);
    const auto triples = LabelTriple::all_consistent();
    std::vector<EncodedExample> out;
    for (std::size_t i = 0; i < n; ++i) {
        EncodedExample ex;
        ex.id = std::to_string(i);
        ex.tokens.ids.assign(seq_len, kPadId);
        ex.tokens.mask.assign(seq_len, 0);
        const std::size_t len = 2 + rng.index(seq_len - 1);
        ex.tokens.ids[0] = kClsId;
        for (std::size_t k = 0; k < len; ++k) {
            if (k > 0) {
                ex.tokens.ids[k] = enc.vocab_size > 3 ? static_cast<TokenId>(3 + rng.index(enc.vocab_size - 3)) : kUnkId;
            }
            ex.tokens.mask[k] = 1;
        }
        ex.labels = triples[rng.index(triples.size())];
        out.push_back(std::move(ex));
    }
    return out;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hierarchical multi-task offensive language classification"};
    app.name("hmtl");
    app.require_subcommand(1);

    CommonFlags common;

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "normalize the tweets of a labeled or scored TSV");
    std::string pre_in, pre_out, pre_format = "labeled";
    pre->add_option("--input", pre_in, "raw TSV")->required()->check(CLI::ExistingFile);
    pre->add_option("--output", pre_out, "normalized TSV")->required();
    pre->add_option("--format", pre_format, "labeled or scored")->check(CLI::IsMember({"labeled", "scored"}));
    add_common(pre, common);

    // train
    auto* tr = app.add_subcommand("train", "train a model with early stopping on validation F1(A)");
    std::string tr_train, tr_val, tr_scored, tr_out, tr_init, tr_metrics, tr_kind;
    std::optional<double> tr_lr;
    std::optional<std::size_t> tr_epochs, tr_batch, tr_patience;
    tr->add_option("--train", tr_train, "labeled training TSV")->check(CLI::ExistingFile);
    tr->add_option("--val", tr_val, "labeled validation TSV (default: split off the training data)")
        ->check(CLI::ExistingFile);
    tr->add_option("--scored", tr_scored, "scored TSV binarized at data.threshold and added to training")
        ->check(CLI::ExistingFile);
    tr->add_option("--out", tr_out, "checkpoint to write")->required();
    tr->add_option("--init", tr_init, "checkpoint whose encoder and vocabulary start training")
        ->check(CLI::ExistingFile);
    tr->add_option("--metrics", tr_metrics, "metrics file (default: <out>.metrics.txt)");
    tr->add_option("--model", tr_kind, "mtl or baseline")->check(CLI::IsMember({"mtl", "baseline"}));
    tr->add_option("--lr", tr_lr, "learning rate");
    tr->add_option("--epochs", tr_epochs, "maximum epochs");
    tr->add_option("--batch-size", tr_batch, "mini-batch size");
    tr->add_option("--patience", tr_patience, "early-stopping patience");
    add_common(tr, common);

    // pretrain
    auto* pt = app.add_subcommand("pretrain", "regression pre-training on mean confidence scores");
    std::string pt_scored, pt_out, pt_metrics;
    pt->add_option("--scored", pt_scored, "scored TSV")->required()->check(CLI::ExistingFile);
    pt->add_option("--out", pt_out, "checkpoint to write")->required();
    pt->add_option("--metrics", pt_metrics, "metrics file (default: <out>.metrics.txt)");
    add_common(pt, common);

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "per-task macro-F1 of a checkpoint on a labeled TSV");
    std::string ev_model, ev_data, ev_report;
    ev->add_option("--model", ev_model, "checkpoint")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", ev_data, "labeled TSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--report", ev_report, "report file");
    add_common(ev, common);

    // predict
    auto* pr = app.add_subcommand("predict", "label every tweet of a TSV");
    std::string pr_model, pr_data, pr_out;
    pr->add_option("--model", pr_model, "checkpoint")->required()->check(CLI::ExistingFile);
    pr->add_option("--data", pr_data, "TSV with id and tweet (or text) columns")->required()->check(CLI::ExistingFile);
    pr->add_option("--out", pr_out, "prediction TSV")->required();
    add_common(pr, common);

    // ensemble
    auto* en = app.add_subcommand("ensemble", "majority vote of several models");
    std::string en_models, en_data, en_out, en_train, en_val, en_dir;
    en->add_option("--models", en_models, "comma-separated member checkpoints");
    en->add_option("--train", en_train, "train ensemble.size members on this labeled TSV instead")
        ->check(CLI::ExistingFile);
    en->add_option("--val", en_val, "validation TSV for member training")->check(CLI::ExistingFile);
    en->add_option("--members-dir", en_dir, "where trained members are written");
    en->add_option("--data", en_data, "TSV with id and tweet (or text) columns")->required()->check(CLI::ExistingFile);
    en->add_option("--out", en_out, "prediction TSV")->required();
    add_common(en, common);

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
    double gc_eps = 1e-4;
    double gc_tol = 1e-3;
    std::size_t gc_batch = 4;
    gc->add_option("--epsilon", gc_eps, "finite-difference step");
    gc->add_option("--tolerance", gc_tol, "maximum accepted relative error");
    gc->add_option("--batch", gc_batch, "random batch size")->check(CLI::PositiveNumber);
    add_common(gc, common);

    // threshold-search
    auto* th = app.add_subcommand("threshold-search", "pick the score threshold that best matches gold A labels");
    std::string th_data, th_grid = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";
    th->add_option("--data", th_data, "TSV with average and subtask_a columns")->required()->check(CLI::ExistingFile);
    th->add_option("--grid", th_grid, "comma-separated thresholds in (0, 1)");

    if (argc <= 1) {
        err << app.help();
        return kExitUsage;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e, out, err);
        err << "error: " << e.what() << "\n";
        err << "run 'hmtl --help' for usage\n";
        return kExitUsage;
    }

    try {
        if (*pre) {
            const RunConfig cfg = resolve_config(common);
            validate_before_vocab(cfg);
            const TextNormalizer normalizer = make_normalizer(cfg);
            NormalizeStats stats;
            std::size_t n = 0;
            if (pre_format == "labeled") {
                auto examples = load_labeled(pre_in, normalizer, {}, &stats);
                save_labeled(pre_out, examples);
                n = examples.size();
            } else {
                auto examples = load_scored(pre_in, normalizer, {}, &stats);
                save_scored(pre_out, examples);
                n = examples.size();
            }
            out << "normalized " << n << " tweets; " << stats.unknown_emoji << " unknown emoji dropped\n";
            return kExitOk;
        }

        if (*tr) {
            RunConfig cfg = resolve_config(common);
            if (!tr_kind.empty()) cfg.model = parse_model_kind(tr_kind);
            if (tr_lr) cfg.train.learning_rate = *tr_lr;
            if (tr_epochs) cfg.train.max_epochs = *tr_epochs;
            if (tr_batch) cfg.train.batch_size = *tr_batch;
            if (tr_patience) cfg.train.patience = *tr_patience;
            if (tr_train.empty() && tr_scored.empty()) throw ConfigError("train needs --train or --scored");
            validate_before_vocab(cfg);
            const TextNormalizer normalizer = make_normalizer(cfg);
            const TrainInputs data = load_train_inputs(cfg, normalizer, tr_train, tr_val, tr_scored);
            out << "resolved config\n" << to_json(cfg).dump(2) << "\n";
            Vocabulary vocab;
            TrainResult result = train_one(cfg, data, tr_init, cfg.seed, vocab, out);
            cfg.encoder = result.model.encoder.config;
            save_checkpoint(tr_out, result.model, vocab);
            write_config_echo(tr_out + ".config.json", cfg);
            write_text(tr_metrics.empty() ? tr_out + ".metrics.txt" : tr_metrics, result.history.to_text());
            out << "best epoch " << result.history.best_epoch << " of " << result.history.stopped_epoch
                << "; validation F1(A) " << result.history.best_f1_a() << "\n";
            return kExitOk;
        }

        if (*pt) {
            RunConfig cfg = resolve_config(common);
            validate_before_vocab(cfg);
            const TextNormalizer normalizer = make_normalizer(cfg);
            const auto scored = load_scored(pt_scored, normalizer);
            std::vector<std::string> texts;
            for (const auto& s : scored) texts.push_back(s.tweet.text);
            auto [vocab, model] = fresh_model(cfg, texts, cfg.seed);
            out << "resolved config\n" << to_json(cfg).dump(2) << "\n";
            const auto result = pretrain_regression(std::move(model), encode_scored(scored, vocab, cfg.data.max_len),
                                                    cfg.train);
            save_checkpoint(pt_out, result.model, vocab);
            write_config_echo(pt_out + ".config.json", cfg);
            std::string metrics = "epoch\tmse\n0\t" + detail::format_real(result.initial_mse) + "\n";
            for (std::size_t e = 0; e < result.epoch_mse.size(); ++e) {
                metrics += std::to_string(e + 1) + "\t" + detail::format_real(result.epoch_mse[e]) + "\n";
            }
            write_text(pt_metrics.empty() ? pt_out + ".metrics.txt" : pt_metrics, metrics);
            out << "mse " << result.initial_mse << " -> " << result.epoch_mse.back() << "\n";
            return kExitOk;
        }

        if (*ev) {
            const RunConfig cfg = resolve_config(common);
            const Checkpoint ck = load_checkpoint(ev_model);
            const auto data = load_labeled(ev_data, make_normalizer(cfg));
            const auto report = evaluate(ck.model, encode_corpus(data, ck.vocab, ck.model.encoder.config.max_len));
            const std::string text = report.to_text();
            if (!ev_report.empty()) write_text(ev_report, text);
            out << text;
            return kExitOk;
        }

        if (*pr) {
            const RunConfig cfg = resolve_config(common);
            const Checkpoint ck = load_checkpoint(pr_model);
            const auto raw = load_raw(pr_data);
            if (raw.empty()) throw Error(pr_data + ": no tweets");
            const auto seqs = encode_texts(raw, make_normalizer(cfg), ck.vocab, ck.model.encoder.config.max_len);
            write_text(pr_out, prediction_tsv(raw, argmax_labels(predict_sequences(ck.model, seqs))));
            out << "wrote " << raw.size() << " predictions to " << pr_out << "\n";
            return kExitOk;
        }

        if (*en) {
            RunConfig cfg = resolve_config(common);
            const TextNormalizer normalizer = make_normalizer(cfg);
            std::vector<Checkpoint> members;
            if (!en_models.empty()) {
                for (const auto& path : split_commas(en_models)) members.push_back(load_checkpoint(path));
            } else if (!en_train.empty()) {
                validate_before_vocab(cfg);
                const TrainInputs data = load_train_inputs(cfg, normalizer, en_train, en_val, "");
                if (!en_dir.empty()) std::filesystem::create_directories(en_dir);
                for (std::size_t k = 0; k < cfg.ensemble_size; ++k) {
                    out << "member " << k + 1 << " of " << cfg.ensemble_size << "\n";
                    Vocabulary vocab;
                    TrainResult r = train_one(cfg, data, "", cfg.seed + k, vocab, out);
                    if (!en_dir.empty()) {
                        const std::string path = en_dir + "/member" + std::to_string(k + 1) + ".ckpt";
                        save_checkpoint(path, r.model, vocab);
                        write_text(path + ".metrics.txt", r.history.to_text());
                    }
                    members.push_back({std::move(r.model), std::move(vocab)});
                }
                if (!en_dir.empty()) write_config_echo(en_dir + "/config.json", cfg);
            } else {
                throw ConfigError("ensemble needs --models or --train");
            }
            if (members.empty()) throw ConfigError("ensemble needs at least one member");
            for (const auto& m : members) {
                if (!(m.vocab == members.front().vocab)) throw Error("ensemble members must share one vocabulary");
            }
            const auto raw = load_raw(en_data);
            if (raw.empty()) throw Error(en_data + ": no tweets");
            std::vector<std::vector<PredictionTriple>> preds;
            for (const auto& m : members) {
                preds.push_back(predict_sequences(
                    m.model, encode_texts(raw, normalizer, m.vocab, m.model.encoder.config.max_len)));
            }
            write_text(en_out, prediction_tsv(raw, majority_vote(preds)));
            out << "wrote " << raw.size() << " voted predictions from " << members.size() << " members to "
                << en_out << "\n";
            return kExitOk;
        }

        if (*gc) {
            RunConfig cfg = common.config_path.empty() ? tiny_config() : load_run_config(common.config_path);
            if (common.seed) cfg.seed = *common.seed;
            if (cfg.encoder.vocab_size == 0) cfg.encoder.vocab_size = 32;
            cfg.encoder.dropout = 0.0;
            cfg.validate();
            MtlModel model = init_model(cfg.encoder, cfg.heads, cfg.model, cfg.train.loss_weights, cfg.seed);
            const auto batch = random_batch(cfg.encoder, cfg.data.max_len, gc_batch, cfg.seed + 1);
            const auto report = check_gradients(model, batch, gc_eps);
            const bool pass = report.max_relative_error <= gc_tol;
            out << "parameters " << model.parameter_count() << "\n";
            out << "max_relative_error " << report.max_relative_error << " at " << report.worst_parameter << "["
                << report.worst_index << "]\n";
            out << (pass ? "PASS" : "FAIL") << " (tolerance " << gc_tol << ")\n";
            return pass ? kExitOk : kExitFailure;
        }

        if (*th) {
            std::vector<std::string> header;
            std::vector<std::pair<double, LabelA>> scored;
            std::size_t cavg = 0, ca = 0;
            bool resolved = false;
            detail::read_tsv(
                th_data,
                [&](const std::vector<std::string>& f, std::size_t lineno) {
                    if (!resolved) {
                        cavg = detail::column_index(header, "average", th_data);
                        ca = detail::column_index(header, "subtask_a", th_data);
                        resolved = true;
                    }
                    double avg = 0.0;
                    if (!detail::parse_double(f[cavg], avg)) throw ParseError(th_data, lineno, "malformed score");
                    const auto a = parse_label<LabelA>(f[ca]);
                    if (!a) throw ParseError(th_data, lineno, "unknown label '" + f[ca] + "'");
                    scored.emplace_back(avg, *a);
                },
                header);
            std::vector<double> grid;
            for (const auto& s : split_commas(th_grid)) {
                double v = 0.0;
                if (!detail::parse_double(s, v)) throw ConfigError("malformed grid value '" + s + "'");
                grid.push_back(v);
            }
            const auto r = threshold_search(scored, grid);
            out << "threshold " << r.threshold << " macro_f1 " << r.macro_f1 << (r.degenerate ? " degenerate" : "")
                << "\n";
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace hmtl::cli
