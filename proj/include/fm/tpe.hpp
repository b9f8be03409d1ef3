#pragma once

// Tree-structured Parzen Estimator search over the learning rate, plus the
// k-fold cross-validation objective it optimizes. Everything operates in
// log10(lr) space with a log-uniform prior.
//
// Suggestion rule: below n_startup history entries, sample the prior. After
// that, split history at the gamma quantile by objective (higher is better)
// into good/bad sets, fit a Parzen mixture to each (Gaussian kernel per
// point, bandwidth = max(distance to nearest neighbor, 1% of the log-range;
// the full log-range when a set has a single point), mix the uniform prior
// in as one extra pseudo-point), draw n_candidates from the good density and
// return the candidate with the highest good/bad density ratio.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fm/classifier.hpp"
#include "fm/corpus.hpp"
#include "fm/rng.hpp"

namespace fm {

struct SearchSpace {
    double lower = 1e-6;
    double upper = 1e-3;

    void validate() const;
};

struct Trial {
    double lr = 0.0;
    double objective = 0.0; // mean of fold_accuracies
    std::vector<double> fold_accuracies;
    std::uint64_t seed = 0;
};

struct TPEConfig {
    double gamma = 0.25;
    int n_startup = 10;
    int n_candidates = 24;
    std::uint64_t seed = 42;

    void validate() const;
};

// One-dimensional Parzen mixture over log10 values: one Gaussian per point
// plus a uniform prior component over [lo, hi], all equally weighted.
struct ParzenDensity {
    std::vector<double> mus;
    std::vector<double> bws;
    double lo = 0.0;
    double hi = 0.0;

    double pdf(double x) const;
};

ParzenDensity make_parzen(const std::vector<double>& log_points, double lo, double hi);

// Indices of history sorted by objective (descending, ties by insertion
// order) and cut after max(1, ceil(gamma * n)) entries.
void split_history(const std::vector<Trial>& history, double gamma,
                   std::vector<std::size_t>& good, std::vector<std::size_t>& bad);

double tpe_suggest(const std::vector<Trial>& history, const SearchSpace& space,
                   const TPEConfig& cfg, Rng& rng);

// Objective callback: evaluates one learning rate; trial_seed derives all of
// the trial's randomness.
using TuneObjective = std::function<Trial(double lr, std::uint64_t trial_seed)>;

struct TuneResult {
    Trial best;
    std::vector<Trial> history;
};

// Suggest/evaluate loop. Existing history counts toward n_trials, so a rerun
// with the same config resumes instead of repeating. Best = highest
// objective, earliest trial wins ties. on_trial (when set) fires after each
// new trial, e.g. to append it to a history file.
TuneResult tune(const TuneObjective& objective, const SearchSpace& space,
                const TPEConfig& cfg, int n_trials, std::vector<Trial> existing = {},
                const std::function<void(const Trial&)>& on_trial = nullptr);

// What cv_objective scores on each held-out fold: fraction of comments whose
// fused prediction matches gold, or the macro-averaged F1 of the fused
// one-vs-rest report.
enum class TuneMetric { accuracy, macro_f1 };

const char* to_string(TuneMetric m);
TuneMetric tune_metric_from_string(const std::string& s);

// Mean fold score over k folds: for each fold i, train on the other folds
// (fold i doubles as the validation set for checkpointing) and score fold i
// with the chosen metric.
Trial cv_objective(double lr, const Corpus& corpus, const FoldAssignment& folds,
                   const TrainConfig& base_cfg, const EncoderConfig& enc_cfg,
                   const Vocabulary& vocab, const TokenizerConfig& tok_cfg,
                   std::uint64_t trial_seed, TuneMetric metric = TuneMetric::accuracy);

// Analytic stand-in objective with its optimum at lr = 1e-5:
// exp(-(log10 lr + 5)^2) plus N(0, 0.01) noise, clamped to [0, 1].
Trial synthetic_objective(double lr, std::uint64_t trial_seed);

nlohmann::json trial_to_json(const Trial& t);
Trial trial_from_json(const nlohmann::json& j);

// JSONL history file: one trial per line. Missing file loads as empty.
std::vector<Trial> load_history(const std::string& path);
void append_history(const std::string& path, const Trial& t);

} // namespace fm
