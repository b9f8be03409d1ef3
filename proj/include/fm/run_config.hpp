#pragma once

// JSON run configuration shared by all CLI commands. Flags override file
// values; the fully resolved config is copied into every output directory.
//
// Schema (all fields optional unless a command needs them):
// {
//   "preset": "toy",
//   "vocab": "vocab.txt",
//   "train_corpus": "train.jsonl",
//   "val_corpus": "val.jsonl",          // else split off train_corpus
//   "test_corpus": "test.jsonl",
//   "language": "en",
//   "val_fraction": 0.2,
//   "cv_folds": 3,
//   "n_trials": 20,
//   "seed": 42,
//   "out": "run-output",
//   "mode": "fused",                    // or "binary"
//   "tokenizer": {"max_len": 200, "lowercase": true},
//   "train": {"learning_rate": 1e-5, "batch_size": 32, "epochs": 2,
//             "eval_every": 50, "undersample": true, "head_dropout": 0.3,
//             "weight_decay": 0.01, "freeze_encoder": false},
//   "search": {"lower": 1e-6, "upper": 1e-3},
//   "tune_metric": "accuracy",           // or "macro-f1"
//   "tpe": {"gamma": 0.25, "n_startup": 10, "n_candidates": 24},
//   "experiment": {"label": "en-to-it", "train_corpora": ["a.jsonl"],
//                  "test_corpus": "it.jsonl"}
// }
//
// Seeding: the top-level seed drives training, tuning, and splitting unless
// "train" or "tpe" pin their own; a --seed flag overrides all of them.
// Tokenizer casing defaults to the preset (uncased presets lower-case) unless
// "tokenizer.lowercase" is set explicitly.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fm/classifier.hpp"
#include "fm/tokenizer.hpp"
#include "fm/tpe.hpp"

namespace fm {

struct RunConfig {
    std::string preset = "toy";
    std::string vocab_path;
    std::string train_corpus;
    std::string val_corpus;
    std::string test_corpus;
    std::string language = "en";
    double val_fraction = 0.2;
    int cv_folds = 3;
    int n_trials = 20;
    std::uint64_t seed = 42;
    std::string out = "run-output";
    std::string mode = "fused";
    TokenizerConfig tokenizer;
    TrainConfig train;
    SearchSpace search;
    std::string tune_metric = "accuracy";
    TPEConfig tpe;
    std::string experiment_label;
    std::vector<std::string> experiment_train;
    std::string experiment_test;

    void validate() const;
};

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> preset;
    std::optional<std::string> mode;
    std::optional<bool> undersample;
};

RunConfig default_run_config();
RunConfig load_run_config(const std::string& path, const CliOverrides& overrides = {});

// Resolved-config snapshot written into output directories for provenance.
nlohmann::json run_config_json(const RunConfig& cfg);

} // namespace fm
