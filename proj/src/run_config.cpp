#include "fm/run_config.hpp"

#include <fstream>

#include "fm/encoder.hpp"
#include "fm/errors.hpp"
#include "fm/metrics.hpp"

namespace fm {

using nlohmann::json;

void RunConfig::validate() const {
    find_preset(preset);
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw UsageError("config: val_fraction must be in (0,1)");
    if (cv_folds < 2)
        throw UsageError("config: cv_folds must be >= 2");
    if (n_trials < 1)
        throw UsageError("config: n_trials must be >= 1");
    eval_mode_from_string(mode);
    tune_metric_from_string(tune_metric);
    if (tokenizer.max_len < 3)
        throw UsageError("config: tokenizer max_len must be >= 3");
    train.validate();
    search.validate();
    tpe.validate();
}

RunConfig default_run_config() {
    RunConfig cfg;
    cfg.tokenizer.max_len = 200;
    return cfg;
}

namespace {

void apply_json(RunConfig& cfg, const json& j, bool& tokenizer_case_set,
                bool& train_seed_set, bool& tpe_seed_set) {
    if (j.contains("preset"))
        j.at("preset").get_to(cfg.preset);
    if (j.contains("vocab"))
        j.at("vocab").get_to(cfg.vocab_path);
    if (j.contains("train_corpus"))
        j.at("train_corpus").get_to(cfg.train_corpus);
    if (j.contains("val_corpus"))
        j.at("val_corpus").get_to(cfg.val_corpus);
    if (j.contains("test_corpus"))
        j.at("test_corpus").get_to(cfg.test_corpus);
    if (j.contains("language"))
        j.at("language").get_to(cfg.language);
    if (j.contains("val_fraction"))
        j.at("val_fraction").get_to(cfg.val_fraction);
    if (j.contains("cv_folds"))
        j.at("cv_folds").get_to(cfg.cv_folds);
    if (j.contains("n_trials"))
        j.at("n_trials").get_to(cfg.n_trials);
    if (j.contains("seed"))
        j.at("seed").get_to(cfg.seed);
    if (j.contains("out"))
        j.at("out").get_to(cfg.out);
    if (j.contains("mode"))
        j.at("mode").get_to(cfg.mode);

    if (j.contains("tokenizer")) {
        const json& t = j.at("tokenizer");
        if (t.contains("max_len"))
            t.at("max_len").get_to(cfg.tokenizer.max_len);
        if (t.contains("lowercase")) {
            t.at("lowercase").get_to(cfg.tokenizer.lowercase);
            tokenizer_case_set = true;
        }
        if (t.contains("continuation_prefix"))
            t.at("continuation_prefix").get_to(cfg.tokenizer.continuation_prefix);
    }
    if (j.contains("train")) {
        from_json(j.at("train"), cfg.train);
        train_seed_set = j.at("train").contains("seed");
    }
    if (j.contains("search")) {
        const json& s = j.at("search");
        if (s.contains("lower"))
            s.at("lower").get_to(cfg.search.lower);
        if (s.contains("upper"))
            s.at("upper").get_to(cfg.search.upper);
    }
    if (j.contains("tune_metric"))
        j.at("tune_metric").get_to(cfg.tune_metric);
    if (j.contains("tpe")) {
        const json& t = j.at("tpe");
        if (t.contains("gamma"))
            t.at("gamma").get_to(cfg.tpe.gamma);
        if (t.contains("n_startup"))
            t.at("n_startup").get_to(cfg.tpe.n_startup);
        if (t.contains("n_candidates"))
            t.at("n_candidates").get_to(cfg.tpe.n_candidates);
        if (t.contains("seed")) {
            t.at("seed").get_to(cfg.tpe.seed);
            tpe_seed_set = true;
        }
    }
    if (j.contains("experiment")) {
        const json& e = j.at("experiment");
        if (e.contains("label"))
            e.at("label").get_to(cfg.experiment_label);
        if (e.contains("train_corpora"))
            e.at("train_corpora").get_to(cfg.experiment_train);
        if (e.contains("test_corpus"))
            e.at("test_corpus").get_to(cfg.experiment_test);
    }
}

} // namespace

RunConfig load_run_config(const std::string& path, const CliOverrides& overrides) {
    RunConfig cfg = default_run_config();
    bool tokenizer_case_set = false;
    bool train_seed_set = false;
    bool tpe_seed_set = false;

    if (!path.empty()) {
        std::ifstream in(path);
        if (!in)
            throw UsageError("cannot open config file: " + path);
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw UsageError("malformed config " + path + ": " + e.what());
        }
        try {
            apply_json(cfg, j, tokenizer_case_set, train_seed_set, tpe_seed_set);
        } catch (const json::exception& e) {
            throw UsageError("bad field in config " + path + ": " + e.what());
        }
    }

    if (overrides.preset)
        cfg.preset = *overrides.preset;
    if (overrides.out)
        cfg.out = *overrides.out;
    if (overrides.mode)
        cfg.mode = *overrides.mode;
    if (overrides.undersample)
        cfg.train.undersample = *overrides.undersample;
    if (overrides.seed) {
        cfg.seed = *overrides.seed;
        train_seed_set = false;
        tpe_seed_set = false;
    }

    if (!train_seed_set)
        cfg.train.seed = cfg.seed;
    if (!tpe_seed_set)
        cfg.tpe.seed = cfg.seed;
    if (!tokenizer_case_set)
        cfg.tokenizer.lowercase = !find_preset(cfg.preset).cased;

    cfg.validate();
    return cfg;
}

json run_config_json(const RunConfig& cfg) {
    json train;
    to_json(train, cfg.train);
    json j{{"preset", cfg.preset},
           {"vocab", cfg.vocab_path},
           {"train_corpus", cfg.train_corpus},
           {"val_corpus", cfg.val_corpus},
           {"test_corpus", cfg.test_corpus},
           {"language", cfg.language},
           {"val_fraction", cfg.val_fraction},
           {"cv_folds", cfg.cv_folds},
           {"n_trials", cfg.n_trials},
           {"seed", cfg.seed},
           {"out", cfg.out},
           {"mode", cfg.mode},
           {"tokenizer",
            {{"max_len", cfg.tokenizer.max_len},
             {"lowercase", cfg.tokenizer.lowercase},
             {"continuation_prefix", cfg.tokenizer.continuation_prefix}}},
           {"train", train},
           {"search", {{"lower", cfg.search.lower}, {"upper", cfg.search.upper}}},
           {"tune_metric", cfg.tune_metric},
           {"tpe",
            {{"gamma", cfg.tpe.gamma},
             {"n_startup", cfg.tpe.n_startup},
             {"n_candidates", cfg.tpe.n_candidates},
             {"seed", cfg.tpe.seed}}}};
    if (!cfg.experiment_label.empty() || !cfg.experiment_train.empty() ||
        !cfg.experiment_test.empty())
        j["experiment"] = {{"label", cfg.experiment_label},
                           {"train_corpora", cfg.experiment_train},
                           {"test_corpus", cfg.experiment_test}};
    return j;
}

} // namespace fm
