#include "fm/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "fm/errors.hpp"
#include "fm/log.hpp"
#include "fm/metrics.hpp"

namespace fm {

using nlohmann::json;

void SearchSpace::validate() const {
    if (!(lower > 0.0) || !(upper > lower))
        throw UsageError("search space requires 0 < lower < upper");
}

void TPEConfig::validate() const {
    if (gamma <= 0.0 || gamma >= 1.0)
        throw UsageError("tpe config: gamma must be in (0,1)");
    if (n_startup < 1)
        throw UsageError("tpe config: n_startup must be >= 1");
    if (n_candidates < 1)
        throw UsageError("tpe config: n_candidates must be >= 1");
}

double ParzenDensity::pdf(double x) const {
    const double components = static_cast<double>(mus.size()) + 1.0;
    double d = x >= lo && x <= hi ? 1.0 / (hi - lo) : 0.0; // prior component
    constexpr double inv_sqrt_2pi = 0.3989422804014327;
    for (std::size_t i = 0; i < mus.size(); ++i) {
        const double z = (x - mus[i]) / bws[i];
        d += inv_sqrt_2pi / bws[i] * std::exp(-0.5 * z * z);
    }
    return d / components;
}

ParzenDensity make_parzen(const std::vector<double>& log_points, double lo, double hi) {
    if (!(hi > lo))
        throw UsageError("parzen density requires lo < hi");
    ParzenDensity d;
    d.lo = lo;
    d.hi = hi;
    d.mus = log_points;
    const double range = hi - lo;
    const double floor_bw = 0.01 * range;
    d.bws.resize(log_points.size());
    for (std::size_t i = 0; i < log_points.size(); ++i) {
        double nn = range; // lone points get the widest kernel
        for (std::size_t j = 0; j < log_points.size(); ++j)
            if (j != i)
                nn = std::min(nn, std::abs(log_points[i] - log_points[j]));
        d.bws[i] = std::max(nn, floor_bw);
    }
    return d;
}

void split_history(const std::vector<Trial>& history, double gamma,
                   std::vector<std::size_t>& good, std::vector<std::size_t>& bad) {
    const std::size_t n = history.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return history[a].objective > history[b].objective;
    });
    const std::size_t n_good = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n))));
    good.assign(order.begin(), order.begin() + std::min(n_good, n));
    bad.assign(order.begin() + std::min(n_good, n), order.end());
}

double tpe_suggest(const std::vector<Trial>& history, const SearchSpace& space,
                   const TPEConfig& cfg, Rng& rng) {
    space.validate();
    cfg.validate();
    const double lo = std::log10(space.lower);
    const double hi = std::log10(space.upper);
    const double range = hi - lo;

    if (static_cast<int>(history.size()) < cfg.n_startup)
        return std::pow(10.0, lo + rng.uniform() * range);

    std::vector<std::size_t> good_idx, bad_idx;
    split_history(history, cfg.gamma, good_idx, bad_idx);
    const auto log_lrs = [&](const std::vector<std::size_t>& idx) {
        std::vector<double> v;
        v.reserve(idx.size());
        for (const std::size_t i : idx)
            v.push_back(std::log10(history[i].lr));
        return v;
    };
    const ParzenDensity l = make_parzen(log_lrs(good_idx), lo, hi);
    const ParzenDensity g = make_parzen(log_lrs(bad_idx), lo, hi);

    double best_x = 0.0;
    double best_ratio = -1.0;
    for (int c = 0; c < cfg.n_candidates; ++c) {
        // Sample the good mixture: each point and the prior equally likely.
        const std::uint64_t comp = rng.uniform_int(l.mus.size() + 1);
        double x;
        if (comp == l.mus.size())
            x = lo + rng.uniform() * range;
        else
            x = l.mus[comp] + l.bws[comp] * rng.normal();
        x = std::clamp(x, lo, hi);
        const double ratio = l.pdf(x) / g.pdf(x);
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best_x = x;
        }
    }
    return std::pow(10.0, best_x);
}

TuneResult tune(const TuneObjective& objective, const SearchSpace& space,
                const TPEConfig& cfg, int n_trials, std::vector<Trial> existing,
                const std::function<void(const Trial&)>& on_trial) {
    space.validate();
    cfg.validate();
    if (n_trials < 1)
        throw UsageError("tune: n_trials must be >= 1");

    TuneResult result;
    result.history = std::move(existing);
    for (std::size_t t = result.history.size(); t < static_cast<std::size_t>(n_trials); ++t) {
        Rng rng(Rng::mix(cfg.seed, t));
        const double lr = tpe_suggest(result.history, space, cfg, rng);
        const std::uint64_t trial_seed = Rng::mix(cfg.seed, 0x7000 + t);
        Trial trial = objective(lr, trial_seed);
        trial.lr = lr;
        trial.seed = trial_seed;
        log_info("trial ", t, ": lr=", lr, " objective=", trial.objective);
        result.history.push_back(std::move(trial));
        if (on_trial)
            on_trial(result.history.back());
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < result.history.size(); ++i)
        if (result.history[i].objective > result.history[best].objective)
            best = i;
    result.best = result.history[best];
    return result;
}

const char* to_string(TuneMetric m) {
    return m == TuneMetric::accuracy ? "accuracy" : "macro-f1";
}

TuneMetric tune_metric_from_string(const std::string& s) {
    if (s == "accuracy")
        return TuneMetric::accuracy;
    if (s == "macro-f1")
        return TuneMetric::macro_f1;
    throw UsageError("unknown tuning objective '" + s + "' (expected accuracy or macro-f1)");
}

Trial cv_objective(double lr, const Corpus& corpus, const FoldAssignment& folds,
                   const TrainConfig& base_cfg, const EncoderConfig& enc_cfg,
                   const Vocabulary& vocab, const TokenizerConfig& tok_cfg,
                   std::uint64_t trial_seed, TuneMetric metric) {
    Trial t;
    t.lr = lr;
    t.seed = trial_seed;
    for (int fold = 0; fold < folds.k; ++fold) {
        const Corpus train = fold_subset(corpus, folds, fold, true);
        const Corpus val = fold_subset(corpus, folds, fold, false);
        TrainConfig cfg = base_cfg;
        cfg.learning_rate = lr;
        cfg.seed = Rng::mix(trial_seed, 0xF0 + static_cast<std::uint64_t>(fold));
        TriClassifier tri = train_tri(train, val, cfg, enc_cfg, vocab, tok_cfg);
        double score;
        if (metric == TuneMetric::accuracy) {
            std::size_t hit = 0;
            for (const UserComment& c : val.comments)
                hit += predict(tri, c.text).fused == c.gold;
            score = static_cast<double>(hit) / static_cast<double>(val.comments.size());
        } else {
            std::vector<Label> gold;
            gold.reserve(val.comments.size());
            for (const UserComment& c : val.comments)
                gold.push_back(c.gold);
            score = evaluate_predictions(predict_batch(tri, val.comments), gold)
                        .fused.macro.f1;
        }
        t.fold_accuracies.push_back(score);
    }
    t.objective = std::accumulate(t.fold_accuracies.begin(), t.fold_accuracies.end(), 0.0) /
                  static_cast<double>(t.fold_accuracies.size());
    return t;
}

Trial synthetic_objective(double lr, std::uint64_t trial_seed) {
    Rng rng(trial_seed);
    const double z = std::log10(lr) + 5.0;
    const double noisy = std::exp(-z * z) + 0.01 * rng.normal();
    Trial t;
    t.lr = lr;
    t.seed = trial_seed;
    t.fold_accuracies = {std::clamp(noisy, 0.0, 1.0)};
    t.objective = t.fold_accuracies[0];
    return t;
}

json trial_to_json(const Trial& t) {
    return json{{"lr", t.lr},
                {"objective", t.objective},
                {"fold_accuracies", t.fold_accuracies},
                {"seed", t.seed}};
}

Trial trial_from_json(const json& j) {
    Trial t;
    t.lr = j.at("lr").get<double>();
    t.objective = j.at("objective").get<double>();
    t.fold_accuracies = j.at("fold_accuracies").get<std::vector<double>>();
    t.seed = j.at("seed").get<std::uint64_t>();
    return t;
}

std::vector<Trial> load_history(const std::string& path) {
    std::vector<Trial> out;
    if (!std::filesystem::exists(path))
        return out;
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open tuning history: " + path);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        try {
            out.push_back(trial_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw DataError("corrupt tuning history " + path + " line " +
                            std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void append_history(const std::string& path, const Trial& t) {
    std::ofstream out(path, std::ios::app);
    if (!out)
        throw DataError("cannot write tuning history: " + path);
    out << trial_to_json(t).dump() << "\n";
}

} // namespace fm
