// Command-line front end: validate corpora, train, tune, evaluate, predict,
// and run cross-lingual experiments. All behavior is driven by a JSON config
// plus flags; every output directory receives a copy of the resolved config.
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 runtime
// failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fm/checkpoint.hpp"
#include "fm/classifier.hpp"
#include "fm/corpus.hpp"
#include "fm/encoder.hpp"
#include "fm/errors.hpp"
#include "fm/log.hpp"
#include "fm/metrics.hpp"
#include "fm/run_config.hpp"
#include "fm/tokenizer.hpp"
#include "fm/tpe.hpp"

namespace fs = std::filesystem;
using fm::RunConfig;
using nlohmann::json;

namespace {

struct CommonFlags {
    std::string config;
    std::string out;
    std::string preset;
    std::string mode;
    std::uint64_t seed = 0;
    bool undersample = true;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--config", f.config, "JSON config file");
    sub->add_option("--seed", f.seed, "master seed (overrides config)");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--preset", f.preset, "encoder preset name");
    sub->add_option("--undersample", f.undersample,
                    "balance binary training sets by undersampling");
    sub->add_option("--mode", f.mode, "evaluation mode: binary or fused");
}

RunConfig resolve_config(const CLI::App* sub, const CommonFlags& f) {
    fm::CliOverrides ov;
    if (sub->count("--seed"))
        ov.seed = f.seed;
    if (sub->count("--out"))
        ov.out = f.out;
    if (sub->count("--preset"))
        ov.preset = f.preset;
    if (sub->count("--mode"))
        ov.mode = f.mode;
    if (sub->count("--undersample"))
        ov.undersample = f.undersample;
    return fm::load_run_config(f.config, ov);
}

void write_provenance(const RunConfig& cfg) {
    fs::create_directories(cfg.out);
    std::ofstream out(fs::path(cfg.out) / "config.json");
    if (!out)
        throw fm::DataError("cannot write " + cfg.out + "/config.json");
    out << fm::run_config_json(cfg).dump(2) << "\n";
}

fm::Vocabulary require_vocab(const RunConfig& cfg) {
    if (cfg.vocab_path.empty())
        throw fm::UsageError("this command needs \"vocab\" in the config");
    return fm::load_vocab(cfg.vocab_path);
}

fm::Corpus require_corpus(const std::string& path, const std::string& language,
                          const char* what) {
    if (path.empty())
        throw fm::UsageError(std::string("this command needs \"") + what +
                             "\" in the config");
    return fm::load_corpus(path, language);
}

// Encoder table rows must match the vocabulary actually in use; presets
// carry the published vocab size, real runs adopt the loaded one.
fm::EncoderConfig resolve_encoder(const RunConfig& cfg, const fm::Vocabulary& vocab) {
    fm::EncoderConfig enc = fm::find_preset(cfg.preset);
    enc.vocab_size = static_cast<int>(vocab.size());
    if (cfg.tokenizer.max_len > enc.max_positions)
        throw fm::UsageError("tokenizer max_len " + std::to_string(cfg.tokenizer.max_len) +
                             " exceeds preset max_positions " +
                             std::to_string(enc.max_positions));
    return enc;
}

int percent_leq(const std::vector<std::size_t>& lengths, std::size_t limit) {
    if (lengths.empty())
        return 0;
    std::size_t n = 0;
    for (const std::size_t v : lengths)
        n += v <= limit;
    return static_cast<int>(std::floor(100.0 * static_cast<double>(n) /
                                           static_cast<double>(lengths.size()) +
                                       0.5));
}

std::size_t percentile(std::vector<std::size_t> v, double p) {
    std::sort(v.begin(), v.end());
    const std::size_t i = static_cast<std::size_t>(p * static_cast<double>(v.size() - 1));
    return v[i];
}

int cmd_validate(const RunConfig& cfg, const std::string& corpus_arg) {
    const std::string path = corpus_arg.empty() ? cfg.train_corpus : corpus_arg;
    if (path.empty())
        throw fm::UsageError("validate needs a corpus path (argument or train_corpus)");
    const fm::CorpusScan scan = fm::scan_corpus(path, cfg.language);

    for (const fm::LineDiagnostic& d : scan.diagnostics)
        std::cout << "line " << d.line << ": " << d.message << "\n";

    const fm::Corpus& c = scan.corpus;
    std::cout << "corpus: " << path << "\n";
    std::cout << "comments: " << c.comments.size() << "\n";
    if (!c.comments.empty()) {
        const auto counts = fm::class_counts(c);
        const auto dist = fm::class_distribution(c);
        for (std::size_t i = 0; i < fm::kAllLabels.size(); ++i) {
            char line[128];
            std::snprintf(line, sizeof line, "%s: %zu (%.1f%%)",
                          fm::to_string(fm::kAllLabels[i]), counts[i], 100.0 * dist[i]);
            std::cout << line << "\n";
        }

        // Content-token lengths need a vocabulary; without one, fall back to
        // word counts from the pre-tokenizer.
        std::vector<std::size_t> lengths;
        lengths.reserve(c.comments.size());
        if (!cfg.vocab_path.empty()) {
            const fm::Vocabulary vocab = fm::load_vocab(cfg.vocab_path);
            for (const fm::UserComment& uc : c.comments)
                lengths.push_back(fm::content_token_ids(uc.text, vocab, cfg.tokenizer).size());
            std::cout << "token unit: wordpiece\n";
        } else {
            for (const fm::UserComment& uc : c.comments)
                lengths.push_back(fm::pre_tokenize(fm::normalize(uc.text, cfg.tokenizer)).size());
            std::cout << "token unit: word (no vocab configured)\n";
        }
        std::cout << "token lengths: min=" << *std::min_element(lengths.begin(), lengths.end())
                  << " p50=" << percentile(lengths, 0.5) << " p90=" << percentile(lengths, 0.9)
                  << " max=" << *std::max_element(lengths.begin(), lengths.end()) << "\n";
        const std::size_t limit = static_cast<std::size_t>(cfg.tokenizer.max_len - 2);
        std::cout << "within frame: " << percent_leq(lengths, limit) << "% of comments have <= "
                  << limit << " content tokens\n";
    }

    if (!scan.diagnostics.empty())
        throw fm::DataError(std::to_string(scan.diagnostics.size()) +
                            " invalid line(s) in " + path);
    if (c.comments.empty())
        throw fm::DataError("corpus is empty: " + path);
    return 0;
}

json model_log(const fm::BinaryModel& m) {
    json evals = json::array();
    for (const fm::EvalPoint& e : m.evals)
        evals.push_back({{"step", e.step}, {"accuracy", e.accuracy}});
    return json{{"val_accuracy", m.val_accuracy},
                {"best_step", m.best_step},
                {"config_digest", m.config_digest},
                {"train_size", m.train_size},
                {"evals", evals}};
}

int cmd_train(const RunConfig& cfg) {
    write_provenance(cfg);
    const fm::Vocabulary vocab = require_vocab(cfg);
    const fm::EncoderConfig enc = resolve_encoder(cfg, vocab);

    fm::Corpus train = require_corpus(cfg.train_corpus, cfg.language, "train_corpus");
    fm::Corpus val;
    if (!cfg.val_corpus.empty()) {
        val = fm::load_corpus(cfg.val_corpus, cfg.language);
    } else {
        auto split = fm::stratified_split(train, cfg.val_fraction, cfg.seed);
        train = std::move(split.first);
        val = std::move(split.second);
    }
    fm::log_info("training on ", train.comments.size(), " comments, validating on ",
                 val.comments.size());

    fm::TriClassifier tri = fm::train_tri(train, val, cfg.train, enc, vocab, cfg.tokenizer);
    const std::string bundle_dir = (fs::path(cfg.out) / "bundle").string();
    fm::save_bundle(tri, bundle_dir);

    json log{{"train_size", train.comments.size()},
             {"val_size", val.comments.size()},
             {"undersample", cfg.train.undersample},
             {"bundle", bundle_dir}};
    for (std::size_t i = 0; i < fm::kAllLabels.size(); ++i)
        log["models"][fm::to_string(fm::kAllLabels[i])] = model_log(tri.models[i]);
    std::ofstream lf(fs::path(cfg.out) / "train_log.json");
    lf << log.dump(2) << "\n";

    for (std::size_t i = 0; i < fm::kAllLabels.size(); ++i)
        std::cout << fm::to_string(fm::kAllLabels[i])
                  << ": val_accuracy=" << tri.models[i].val_accuracy
                  << " best_step=" << tri.models[i].best_step
                  << " train_size=" << tri.models[i].train_size << "\n";
    std::cout << "bundle: " << bundle_dir << "\n";
    return 0;
}

int cmd_tune(const RunConfig& cfg, int trials_override, bool synthetic) {
    write_provenance(cfg);
    const int n_trials = trials_override > 0 ? trials_override : cfg.n_trials;
    const std::string history_path = (fs::path(cfg.out) / "history.jsonl").string();
    std::vector<fm::Trial> existing = fm::load_history(history_path);
    if (!existing.empty())
        fm::log_info("resuming from ", existing.size(), " existing trial(s)");

    fm::TuneObjective objective;
    if (synthetic) {
        objective = [](double lr, std::uint64_t seed) {
            return fm::synthetic_objective(lr, seed);
        };
    } else {
        const fm::Vocabulary vocab = require_vocab(cfg);
        const fm::EncoderConfig enc = resolve_encoder(cfg, vocab);
        const fm::Corpus corpus =
            require_corpus(cfg.train_corpus, cfg.language, "train_corpus");
        const fm::FoldAssignment folds = fm::make_folds(corpus, cfg.cv_folds, cfg.seed);
        const fm::TuneMetric metric = fm::tune_metric_from_string(cfg.tune_metric);
        objective = [&cfg, vocab, enc, corpus, folds, metric](double lr, std::uint64_t seed) {
            return fm::cv_objective(lr, corpus, folds, cfg.train, enc, vocab,
                                    cfg.tokenizer, seed, metric);
        };
    }

    const fm::TuneResult result =
        fm::tune(objective, cfg.search, cfg.tpe, n_trials, std::move(existing),
                 [&history_path](const fm::Trial& t) { fm::append_history(history_path, t); });

    json best = fm::trial_to_json(result.best);
    best["n_trials"] = result.history.size();
    std::ofstream bf(fs::path(cfg.out) / "best.json");
    bf << best.dump(2) << "\n";
    std::cout << "trials: " << result.history.size() << "\n";
    std::cout << "best lr: " << result.best.lr << " (objective " << result.best.objective
              << ")\n";
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& bundle_arg,
                 const std::string& test_arg) {
    write_provenance(cfg);
    const std::string bundle_dir =
        bundle_arg.empty() ? (fs::path(cfg.out) / "bundle").string() : bundle_arg;
    const std::string test_path = test_arg.empty() ? cfg.test_corpus : test_arg;
    fm::TriClassifier tri = fm::load_bundle(bundle_dir);
    const fm::Corpus test = require_corpus(test_path, cfg.language, "test_corpus");

    const fm::BothReports both = fm::evaluate_both(tri, test);
    const fm::EvaluationReport& chosen =
        fm::eval_mode_from_string(cfg.mode) == fm::EvalMode::per_binary ? both.per_binary
                                                                        : both.fused;
    std::cout << fm::render_report(chosen);

    json report{{"binary", fm::report_json(both.per_binary)},
                {"fused", fm::report_json(both.fused)}};
    std::ofstream jf(fs::path(cfg.out) / "report.json");
    jf << report.dump(2) << "\n";
    std::ofstream tf(fs::path(cfg.out) / "report.txt");
    tf << "mode: binary\n"
       << fm::render_report(both.per_binary) << "\nmode: fused\n"
       << fm::render_report(both.fused);
    return 0;
}

int cmd_predict(const RunConfig& cfg, const std::string& bundle_arg,
                const std::string& input_path) {
    const std::string bundle_dir =
        bundle_arg.empty() ? (fs::path(cfg.out) / "bundle").string() : bundle_arg;
    fm::TriClassifier tri = fm::load_bundle(bundle_dir);

    std::ifstream in(input_path);
    if (!in)
        throw fm::DataError("cannot open input: " + input_path);

    std::string line;
    long lineno = 0;
    long bad = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        std::string id, text;
        try {
            const json j = json::parse(line);
            id = j.at("id").get<std::string>();
            text = j.at("text").get<std::string>();
        } catch (const json::exception& e) {
            std::cerr << "line " << lineno << ": " << e.what() << "\n";
            ++bad;
            continue;
        }
        const fm::Prediction p = fm::predict(tri, text);
        json probs;
        for (std::size_t i = 0; i < fm::kAllLabels.size(); ++i)
            probs[fm::to_string(fm::kAllLabels[i])] = p.probs[i];
        const json out{{"id", id}, {"label", fm::to_string(p.fused)}, {"probs", probs}};
        std::cout << out.dump() << "\n";
    }
    if (bad > 0)
        throw fm::DataError(std::to_string(bad) + " malformed input line(s) in " +
                            input_path);
    return 0;
}

double unk_rate(const fm::Corpus& c, const fm::Vocabulary& vocab,
                const fm::TokenizerConfig& tok) {
    std::size_t unk = 0, total = 0;
    for (const fm::UserComment& uc : c.comments)
        for (const int id : fm::content_token_ids(uc.text, vocab, tok)) {
            total += 1;
            unk += id == vocab.unk_id;
        }
    return total == 0 ? 0.0 : static_cast<double>(unk) / static_cast<double>(total);
}

int cmd_experiment(const RunConfig& cfg) {
    if (cfg.experiment_train.empty())
        throw fm::UsageError("experiment needs a non-empty \"experiment.train_corpora\"");
    if (cfg.experiment_test.empty())
        throw fm::UsageError("experiment needs \"experiment.test_corpus\"");
    const std::string label =
        cfg.experiment_label.empty() ? "experiment" : cfg.experiment_label;
    write_provenance(cfg);

    const fm::Vocabulary vocab = require_vocab(cfg);
    const fm::EncoderConfig enc = resolve_encoder(cfg, vocab);

    std::vector<fm::Corpus> parts;
    for (const std::string& path : cfg.experiment_train)
        parts.push_back(fm::load_corpus(path, cfg.language));
    fm::Corpus merged = fm::merge_corpora(parts, label, cfg.seed);
    // The test corpus stays exactly as shipped; only the training side is
    // split for validation.
    const fm::Corpus test = fm::load_corpus(cfg.experiment_test, cfg.language);

    const double unk = unk_rate(test, vocab, cfg.tokenizer);
    if (unk > 0.20)
        fm::log_info("warning: test-corpus UNK rate ", unk,
                     " exceeds 0.20; the vocabulary may not cover this language");

    auto split = fm::stratified_split(merged, cfg.val_fraction, cfg.seed);
    fm::TriClassifier tri =
        fm::train_tri(split.first, split.second, cfg.train, enc, vocab, cfg.tokenizer);
    fm::save_bundle(tri, (fs::path(cfg.out) / "bundle").string());

    const fm::BothReports both = fm::evaluate_both(tri, test);
    const fm::EvaluationReport& chosen =
        fm::eval_mode_from_string(cfg.mode) == fm::EvalMode::per_binary ? both.per_binary
                                                                        : both.fused;
    std::cout << "experiment: " << label << "\n" << fm::render_report(chosen);

    json report{{"experiment", label},
                {"unk_rate", unk},
                {"binary", fm::report_json(both.per_binary)},
                {"fused", fm::report_json(both.fused)}};
    std::ofstream jf(fs::path(cfg.out) / "report.json");
    jf << report.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"feedback-miner: classify user feedback into problem reports, "
                 "feature requests, and irrelevant comments"};
    app.require_subcommand(1);

    CommonFlags common;
    std::string corpus_arg, bundle_arg, test_arg, input_arg, objective_arg;
    int trials_override = 0;
    bool synthetic = false;

    CLI::App* validate = app.add_subcommand("validate", "check a corpus file and summarize it");
    validate->add_option("corpus", corpus_arg, "corpus JSONL path");
    add_common(validate, common);

    CLI::App* train = app.add_subcommand("train", "fine-tune the three binary models");
    add_common(train, common);

    CLI::App* tune = app.add_subcommand("tune", "search the learning rate with TPE");
    tune->add_option("--trials", trials_override, "total trial budget");
    tune->add_flag("--synthetic", synthetic, "use the analytic objective (no training)");
    tune->add_option("--objective", objective_arg, "fold score: accuracy or macro-f1");
    add_common(tune, common);

    CLI::App* evaluate = app.add_subcommand("evaluate", "score a bundle on a test corpus");
    evaluate->add_option("--bundle", bundle_arg, "bundle directory");
    evaluate->add_option("--test", test_arg, "test corpus JSONL path");
    add_common(evaluate, common);

    CLI::App* predict = app.add_subcommand("predict", "label a JSONL stream of comments");
    predict->add_option("input", input_arg, "input JSONL path")->required();
    predict->add_option("--bundle", bundle_arg, "bundle directory");
    add_common(predict, common);

    CLI::App* experiment =
        app.add_subcommand("experiment", "train on merged corpora, evaluate cross-corpus");
    add_common(experiment, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(validate))
            return cmd_validate(resolve_config(validate, common), corpus_arg);
        if (app.got_subcommand(train))
            return cmd_train(resolve_config(train, common));
        if (app.got_subcommand(tune)) {
            RunConfig rc = resolve_config(tune, common);
            if (tune->count("--objective")) {
                rc.tune_metric = objective_arg;
                rc.validate();
            }
            return cmd_tune(rc, trials_override, synthetic);
        }
        if (app.got_subcommand(evaluate))
            return cmd_evaluate(resolve_config(evaluate, common), bundle_arg, test_arg);
        if (app.got_subcommand(predict))
            return cmd_predict(resolve_config(predict, common), bundle_arg, input_arg);
        if (app.got_subcommand(experiment))
            return cmd_experiment(resolve_config(experiment, common));
    } catch (const fm::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const fm::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
