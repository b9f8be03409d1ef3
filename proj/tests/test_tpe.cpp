#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fm/classifier.hpp"
#include "fm/corpus.hpp"
#include "fm/encoder.hpp"
#include "fm/errors.hpp"
#include "fm/rng.hpp"
#include "fm/tpe.hpp"
#include "test_util.hpp"

using namespace fm;
using doctest::Approx;
using fmtest::TempDir;

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Trial make_trial(double lr, double objective) {
    Trial t;
    t.lr = lr;
    t.objective = objective;
    t.fold_accuracies = {objective};
    return t;
}

// History with a tight cluster of high scorers near log-lr -5 and a spread of
// low scorers near -3; with gamma 0.25 and 20 entries the good set is exactly
// the five high scorers.
std::vector<Trial> clustered_history() {
    std::vector<Trial> h;
    const double good_logs[5] = {-5.05, -5.0, -4.95, -5.1, -4.9};
    for (int i = 0; i < 5; ++i)
        h.push_back(make_trial(std::pow(10.0, good_logs[i]), 0.85 + 0.01 * i));
    for (int i = 0; i < 15; ++i)
        h.push_back(make_trial(std::pow(10.0, -3.4 + 0.025 * i), 0.10 + 0.01 * i));
    return h;
}

} // namespace

TEST_CASE("search space and tpe config validate their bounds") {
    SearchSpace bad;
    bad.lower = 0.0;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad.lower = 1e-3;
    bad.upper = 1e-3;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    bad.upper = 1e-6;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    CHECK_NOTHROW(SearchSpace{}.validate());

    TPEConfig cfg;
    CHECK(cfg.gamma == 0.25);
    CHECK(cfg.n_startup == 10);
    CHECK(cfg.n_candidates == 24);
    CHECK_NOTHROW(cfg.validate());
    cfg.gamma = 0.0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg.gamma = 1.0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = TPEConfig{};
    cfg.n_startup = 0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);
    cfg = TPEConfig{};
    cfg.n_candidates = 0;
    CHECK_THROWS_AS(cfg.validate(), UsageError);

    CHECK_THROWS_AS(tune([](double, std::uint64_t) { return Trial{}; }, SearchSpace{},
                         TPEConfig{}, 0),
                    UsageError);
}

TEST_CASE("below n_startup the suggestion is a log-uniform prior draw") {
    const SearchSpace space; // 1e-6 .. 1e-3
    const TPEConfig cfg;
    const double lo = std::log10(space.lower);
    const double hi = std::log10(space.upper);

    const std::vector<Trial> empty;
    std::vector<Trial> nine_mut;
    for (int i = 0; i < 9; ++i)
        nine_mut.push_back(make_trial(1e-4, 0.5));
    const std::vector<Trial>& nine = nine_mut;

    double log_sum = 0.0;
    for (std::uint64_t s = 1; s <= 400; ++s) {
        for (const std::vector<Trial>* h : {&empty, &nine}) {
            Rng rng(s);
            const double lr = tpe_suggest(*h, space, cfg, rng);
            CHECK(lr >= space.lower);
            CHECK(lr <= space.upper);
            // The draw is exactly one uniform deviate mapped through the
            // log-range, reproducible from the same seed.
            Rng mirror(s);
            const double expected = std::pow(10.0, lo + mirror.uniform() * (hi - lo));
            CHECK(lr == expected);
            if (h->empty())
                log_sum += std::log10(lr);
        }
    }
    // Log-uniform: the mean of log10(lr) sits near the midpoint -4.5.
    const double mean_log = log_sum / 400.0;
    CHECK(mean_log > -4.7);
    CHECK(mean_log < -4.3);
}

TEST_CASE("split_history cuts at the gamma quantile with stable ties") {
    std::vector<Trial> h = {make_trial(1e-4, 0.5), make_trial(2e-4, 0.9),
                            make_trial(3e-4, 0.1), make_trial(4e-4, 0.9),
                            make_trial(5e-4, 0.7)};
    std::vector<std::size_t> good, bad;
    split_history(h, 0.25, good, bad); // ceil(1.25) = 2
    REQUIRE(good.size() == 2);
    CHECK(good[0] == 1); // tie between indices 1 and 3 keeps insertion order
    CHECK(good[1] == 3);
    REQUIRE(bad.size() == 3);
    CHECK(bad[0] == 4);
    CHECK(bad[1] == 0);
    CHECK(bad[2] == 2);

    split_history({make_trial(1e-4, 0.3)}, 0.25, good, bad);
    CHECK(good == std::vector<std::size_t>{0});
    CHECK(bad.empty());
}

TEST_CASE("split_history sizes and ordering hold over random histories") {
    Rng rng(505);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_int(40));
        std::vector<Trial> h;
        for (int i = 0; i < n; ++i)
            h.push_back(make_trial(1e-5, rng.uniform()));
        const double gamma = 0.05 + 0.9 * rng.uniform();
        std::vector<std::size_t> good, bad;
        split_history(h, gamma, good, bad);

        const std::size_t expected_good = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n))));
        CHECK(good.size() == std::min<std::size_t>(expected_good, h.size()));
        CHECK(good.size() + bad.size() == h.size());

        std::vector<std::size_t> all = good;
        all.insert(all.end(), bad.begin(), bad.end());
        std::sort(all.begin(), all.end());
        for (std::size_t i = 0; i < all.size(); ++i)
            CHECK(all[i] == i);

        if (!bad.empty()) {
            double min_good = 2.0, max_bad = -1.0;
            for (const std::size_t i : good)
                min_good = std::min(min_good, h[i].objective);
            for (const std::size_t i : bad)
                max_bad = std::max(max_bad, h[i].objective);
            CHECK(min_good >= max_bad);
        }
    }
}

TEST_CASE("parzen bandwidths are nearest-neighbor distances with a floor") {
    const ParzenDensity d = make_parzen({-5.0, -4.9, -3.0}, -6.0, -3.0);
    REQUIRE(d.bws.size() == 3);
    CHECK(d.bws[0] == Approx(0.1));
    CHECK(d.bws[1] == Approx(0.1));
    CHECK(d.bws[2] == Approx(1.9));

    // Points closer than 1% of the range hit the floor.
    const ParzenDensity tight = make_parzen({-5.0, -5.001}, -6.0, -3.0);
    CHECK(tight.bws[0] == Approx(0.03));
    CHECK(tight.bws[1] == Approx(0.03));

    // A lone point gets the full log-range as bandwidth.
    const ParzenDensity lone = make_parzen({-5.0}, -6.0, -3.0);
    REQUIRE(lone.bws.size() == 1);
    CHECK(lone.bws[0] == Approx(3.0));

    CHECK_THROWS_AS(make_parzen({-5.0}, -3.0, -3.0), UsageError);
}

TEST_CASE("parzen pdf matches hand-computed mixture values") {
    // One point at -5 with bandwidth 3 plus the uniform prior over [-6,-3],
    // equally weighted: pdf(x) = (uniform(x) + gauss(x)) / 2.
    const ParzenDensity d = make_parzen({-5.0}, -6.0, -3.0);
    const double inv_sqrt_2pi = 0.3989422804014327;
    const double at_mu = (1.0 / 3.0 + inv_sqrt_2pi / 3.0) / 2.0;
    CHECK(d.pdf(-5.0) == Approx(at_mu));

    // Outside the bounds only the Gaussian tail contributes.
    const double z = (-7.0 + 5.0) / 3.0;
    const double tail = (inv_sqrt_2pi / 3.0) * std::exp(-0.5 * z * z) / 2.0;
    CHECK(d.pdf(-7.0) == Approx(tail));
}

TEST_CASE("parzen pdf integrates to one") {
    const ParzenDensity d = make_parzen({-5.2, -4.1, -3.3}, -6.0, -3.0);
    double mass = 0.0;
    const double step = 0.001;
    for (double x = -20.0; x < 12.0; x += step)
        mass += d.pdf(x) * step;
    CHECK(mass == Approx(1.0).epsilon(1e-3));
}

TEST_CASE("clustered history steers suggestions into the good region") {
    const std::vector<Trial> history = clustered_history();
    const SearchSpace space; // log bounds [-6, -3]
    const TPEConfig cfg;

    // Brute-force grid argmax of the density ratio l/g as the reference: the
    // suggestion should concentrate where the ratio peaks.
    std::vector<std::size_t> good_idx, bad_idx;
    split_history(history, cfg.gamma, good_idx, bad_idx);
    REQUIRE(good_idx.size() == 5);
    std::vector<double> good_logs, bad_logs;
    for (const std::size_t i : good_idx) {
        CHECK(history[i].objective >= 0.85); // the intended cluster
        good_logs.push_back(std::log10(history[i].lr));
    }
    for (const std::size_t i : bad_idx)
        bad_logs.push_back(std::log10(history[i].lr));
    const ParzenDensity l = make_parzen(good_logs, -6.0, -3.0);
    const ParzenDensity g = make_parzen(bad_logs, -6.0, -3.0);

    double best_x = 0.0, best_ratio = -1.0;
    for (int i = 0; i <= 3000; ++i) {
        const double x = -6.0 + 3.0 * i / 3000.0;
        const double ratio = l.pdf(x) / g.pdf(x);
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best_x = x;
        }
    }
    CHECK(best_x > -5.5);
    CHECK(best_x < -4.5);

    int in_window = 0;
    std::vector<double> dist_to_peak;
    for (std::uint64_t s = 1; s <= 100; ++s) {
        Rng rng(s);
        const double lr = tpe_suggest(history, space, cfg, rng);
        CHECK(lr >= space.lower);
        CHECK(lr <= space.upper);
        const double x = std::log10(lr);
        if (x >= -5.5 && x <= -4.5)
            ++in_window;
        dist_to_peak.push_back(std::abs(x - best_x));
    }
    CHECK(in_window >= 90);
    CHECK(median(dist_to_peak) <= 0.5);
}

TEST_CASE("synthetic objective is the documented analytic curve") {
    // Reproduce exp(-(log10 lr + 5)^2) + 0.01 * N(0,1), clamped to [0,1],
    // with the noise drawn from the trial seed's stream.
    for (const double lr : {1e-5, 1e-4, 3.16e-6, 1e-3}) {
        for (const std::uint64_t seed : {1ull, 77ull, 123456ull}) {
            const Trial t = synthetic_objective(lr, seed);
            Rng mirror(seed);
            const double z = std::log10(lr) + 5.0;
            const double expected =
                std::clamp(std::exp(-z * z) + 0.01 * mirror.normal(), 0.0, 1.0);
            CHECK(t.objective == expected);
            CHECK(t.lr == lr);
            CHECK(t.seed == seed);
            REQUIRE(t.fold_accuracies.size() == 1);
            CHECK(t.fold_accuracies[0] == t.objective);
            CHECK(t.objective >= 0.0);
            CHECK(t.objective <= 1.0);
        }
    }
    // At the optimum the curve value is ~1 before clamping.
    const Trial peak = synthetic_objective(1e-5, 9);
    CHECK(peak.objective > 0.9);
    // Far from the optimum it collapses toward zero.
    const Trial off = synthetic_objective(1e-3, 9);
    CHECK(off.objective < 0.1);
}

TEST_CASE("tune is reproducible, resumable, and reports the earliest best") {
    const SearchSpace space;
    TPEConfig cfg;
    cfg.seed = 7;
    const TuneObjective obj = [](double lr, std::uint64_t seed) {
        return synthetic_objective(lr, seed);
    };

    const TuneResult a = tune(obj, space, cfg, 12);
    const TuneResult b = tune(obj, space, cfg, 12);
    REQUIRE(a.history.size() == 12);
    REQUIRE(b.history.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(a.history[i].lr == b.history[i].lr);
        CHECK(a.history[i].objective == b.history[i].objective);
        CHECK(a.history[i].seed == b.history[i].seed);
    }

    // Resuming from a six-trial prefix reproduces the same twelve trials and
    // never re-runs the finished ones.
    const TuneResult first_half = tune(obj, space, cfg, 6);
    REQUIRE(first_half.history.size() == 6);
    int callbacks = 0;
    const TuneResult resumed = tune(obj, space, cfg, 12, first_half.history,
                                    [&callbacks](const Trial&) { ++callbacks; });
    CHECK(callbacks == 6);
    REQUIRE(resumed.history.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) {
        CHECK(resumed.history[i].lr == a.history[i].lr);
        CHECK(resumed.history[i].objective == a.history[i].objective);
    }

    // Best = max objective; asking for no more trials than exist just reports.
    double max_obj = -1.0;
    for (const Trial& t : a.history)
        max_obj = std::max(max_obj, t.objective);
    CHECK(a.best.objective == max_obj);

    std::vector<Trial> tied = {make_trial(1e-5, 0.5), make_trial(1e-4, 0.5)};
    const TuneResult tie_run = tune(obj, space, cfg, 2, tied);
    CHECK(tie_run.best.lr == 1e-5); // earliest of the tied pair
    CHECK(tie_run.history.size() == 2);

    const TuneResult single = tune(obj, space, cfg, 1);
    REQUIRE(single.history.size() == 1);
    CHECK(single.best.lr == single.history[0].lr);
}

TEST_CASE("tpe beats random search on the synthetic objective") {
    const SearchSpace space;
    const double lo = std::log10(space.lower);
    const double range = std::log10(space.upper) - lo;
    const int n_trials = 30;

    std::vector<double> tpe_best, tpe_best_lr, rnd_best;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        TPEConfig cfg;
        cfg.seed = seed;
        const TuneResult r = tune(
            [](double lr, std::uint64_t s) { return synthetic_objective(lr, s); }, space,
            cfg, n_trials);
        tpe_best.push_back(r.best.objective);
        tpe_best_lr.push_back(std::log10(r.best.lr));

        // Pure random search with the same budget and noise model.
        double best = -1.0;
        for (int t = 0; t < n_trials; ++t) {
            Rng rng(Rng::mix(seed, 0x9999 + static_cast<std::uint64_t>(t)));
            const double lr = std::pow(10.0, lo + rng.uniform() * range);
            const Trial trial = synthetic_objective(
                lr, Rng::mix(seed, 0x7000 + static_cast<std::uint64_t>(t)));
            best = std::max(best, trial.objective);
        }
        rnd_best.push_back(best);
    }

    CHECK(median(tpe_best) >= median(rnd_best));
    const double med_lr = median(tpe_best_lr);
    CHECK(med_lr >= -5.5);
    CHECK(med_lr <= -4.5);
}

TEST_CASE("cv objective averages per-fold scores deterministically") {
    const Corpus corpus = fmtest::synthetic_corpus(6, 6, 6, 4242);
    const Vocabulary vocab = fmtest::test_vocab();
    const FoldAssignment folds = make_folds(corpus, 3, 11);

    TokenizerConfig tok;
    tok.lowercase = true;
    tok.max_len = 12;
    EncoderConfig enc;
    enc.num_layers = 1;
    enc.hidden_size = 16;
    enc.num_heads = 2;
    enc.ffn_size = 32;
    enc.vocab_size = static_cast<int>(vocab.size());
    enc.max_positions = 12;
    enc.dropout_p = 0.1;
    TrainConfig train;
    train.learning_rate = 1e-3;
    train.batch_size = 8;
    train.epochs = 1;
    train.eval_every = 50;

    const Trial t = cv_objective(2e-3, corpus, folds, train, enc, vocab, tok, 909);
    CHECK(t.lr == 2e-3);
    CHECK(t.seed == 909);
    REQUIRE(t.fold_accuracies.size() == 3);
    double sum = 0.0;
    for (const double a : t.fold_accuracies) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
        sum += a;
    }
    CHECK(t.objective == Approx(sum / 3.0));

    const Trial again = cv_objective(2e-3, corpus, folds, train, enc, vocab, tok, 909);
    CHECK(again.objective == t.objective);
    for (int i = 0; i < 3; ++i)
        CHECK(again.fold_accuracies[i] == t.fold_accuracies[i]);

    // The macro-F1 variant scores the same folds with the fused report.
    const Trial f1 = cv_objective(2e-3, corpus, folds, train, enc, vocab, tok, 909,
                                  TuneMetric::macro_f1);
    REQUIRE(f1.fold_accuracies.size() == 3);
    for (const double a : f1.fold_accuracies) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0);
    }
    const Trial f1_again = cv_objective(2e-3, corpus, folds, train, enc, vocab, tok, 909,
                                        TuneMetric::macro_f1);
    CHECK(f1_again.objective == f1.objective);
}

TEST_CASE("tune metric names round-trip and junk is rejected") {
    CHECK(std::string(to_string(TuneMetric::accuracy)) == "accuracy");
    CHECK(std::string(to_string(TuneMetric::macro_f1)) == "macro-f1");
    CHECK(tune_metric_from_string("accuracy") == TuneMetric::accuracy);
    CHECK(tune_metric_from_string("macro-f1") == TuneMetric::macro_f1);
    CHECK_THROWS_AS(tune_metric_from_string("f2"), UsageError);
}

TEST_CASE("trial json and the history file round-trip") {
    Trial t;
    t.lr = 3.1e-5;
    t.objective = 0.7125;
    t.fold_accuracies = {0.7, 0.725, 0.7125};
    t.seed = 991;

    const Trial back = trial_from_json(trial_to_json(t));
    CHECK(back.lr == t.lr);
    CHECK(back.objective == t.objective);
    CHECK(back.fold_accuracies == t.fold_accuracies);
    CHECK(back.seed == t.seed);

    const TempDir dir("tpe_hist");
    const std::string path = dir.file("history.jsonl");
    CHECK(load_history(path).empty()); // missing file loads as empty

    append_history(path, t);
    Trial t2 = t;
    t2.lr = 9e-6;
    t2.objective = 0.9;
    append_history(path, t2);

    const std::vector<Trial> loaded = load_history(path);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].lr == t.lr);
    CHECK(loaded[0].fold_accuracies == t.fold_accuracies);
    CHECK(loaded[1].lr == t2.lr);
    CHECK(loaded[1].objective == t2.objective);

    // Blank lines are tolerated, corrupt lines are not.
    {
        std::ofstream app(path, std::ios::app);
        app << "\n";
    }
    CHECK(load_history(path).size() == 2);
    {
        std::ofstream app(path, std::ios::app);
        app << "{\"lr\": oops}\n";
    }
    CHECK_THROWS_WITH_AS(load_history(path), doctest::Contains("line 4"), DataError);
}
