#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fm/errors.hpp"
#include "fm/metrics.hpp"
#include "fm/rng.hpp"
#include "benchmark_figures.hpp"

using namespace fm;
using doctest::Approx;

namespace {

double harmonic(double p, double r) { return (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

ClassReport make_report(double acc, double pre, double rec, double f1) {
    ClassReport c;
    c.accuracy = acc;
    c.precision = pre;
    c.recall = rec;
    c.f1 = f1;
    return c;
}

Prediction make_pred(double p_problem, double p_feature, double p_irrelevant) {
    Prediction p;
    p.probs = {p_problem, p_feature, p_irrelevant};
    p.fused = fuse_argmax(p.probs);
    return p;
}

// One printed-rounding unit plus float slack.
constexpr double kCellTol = 0.01 + 1e-9;

} // namespace

TEST_CASE("binary_counts tallies hand-checked examples") {
    const ConfusionCounts c =
        binary_counts({true, true, false, true}, {true, false, false, true});
    CHECK(c.tp == 2);
    CHECK(c.fp == 1);
    CHECK(c.fn == 0);
    CHECK(c.tn == 1);
    CHECK(c.total() == 4);

    const ConfusionCounts perfect =
        binary_counts({true, false, true}, {true, false, true});
    CHECK(perfect.tp == 2);
    CHECK(perfect.tn == 1);
    CHECK(perfect.fp == 0);
    CHECK(perfect.fn == 0);

    const ConfusionCounts all_pos =
        binary_counts({true, true, true, true}, {false, false, false, false});
    CHECK(all_pos.fp == 4);
    CHECK(all_pos.tp == 0);
    CHECK(all_pos.tn == 0);
    CHECK(all_pos.fn == 0);
}

TEST_CASE("binary_counts rejects mismatched or empty input") {
    CHECK_THROWS_AS(binary_counts({true, false}, {true}), RunError);
    CHECK_THROWS_AS(binary_counts({}, {}), RunError);
}

TEST_CASE("class_report computes the standard ratios") {
    ConfusionCounts c;
    c.tp = 9;
    c.fp = 1;
    const ClassReport r = class_report(c);
    CHECK(r.precision == Approx(0.9));
    CHECK(r.recall == Approx(1.0));
    CHECK(r.accuracy == Approx(0.9));
    CHECK(r.f1 == Approx(2.0 * 0.9 / 1.9));
}

TEST_CASE("class_report 0/0 denominators yield zero") {
    ConfusionCounts no_pos; // nothing predicted positive, nothing gold-positive
    no_pos.tn = 5;
    const ClassReport r = class_report(no_pos);
    CHECK(r.precision == 0.0);
    CHECK(r.recall == 0.0);
    CHECK(r.f1 == 0.0);
    CHECK(r.accuracy == Approx(1.0));

    ConfusionCounts missed; // gold positives exist but none predicted
    missed.fn = 3;
    missed.tn = 7;
    const ClassReport m = class_report(missed);
    CHECK(m.precision == 0.0);
    CHECK(m.recall == 0.0);
    CHECK(m.f1 == 0.0);
    CHECK(m.accuracy == Approx(0.7));

    CHECK_THROWS_AS(class_report(ConfusionCounts{}), RunError);
}

TEST_CASE("class_report f1 matches the printed figure for pre 0.94 / rec 0.95") {
    // Counts engineered to give precision exactly 0.94 and recall exactly 0.95.
    ConfusionCounts c;
    c.tp = 8930;
    c.fp = 570;  // 8930 / 9500 = 0.94
    c.fn = 470;  // 8930 / 9400 = 0.95
    const ClassReport r = class_report(c);
    CHECK(r.precision == Approx(0.94));
    CHECK(r.recall == Approx(0.95));
    CHECK(r.f1 == Approx(0.9449735449735450));
    CHECK(format2(r.f1) == "0.94");
}

TEST_CASE("f1 bounds and zero conditions hold over random counts") {
    Rng rng(2024);
    for (int trial = 0; trial < 2000; ++trial) {
        ConfusionCounts c;
        c.tp = static_cast<long>(rng.uniform_int(20));
        c.fp = static_cast<long>(rng.uniform_int(20));
        c.fn = static_cast<long>(rng.uniform_int(20));
        c.tn = static_cast<long>(rng.uniform_int(20));
        if (c.total() == 0)
            c.tn = 1;
        const ClassReport r = class_report(c);
        CHECK(r.precision >= 0.0);
        CHECK(r.precision <= 1.0);
        CHECK(r.recall >= 0.0);
        CHECK(r.recall <= 1.0);
        CHECK(r.accuracy >= 0.0);
        CHECK(r.accuracy <= 1.0);
        CHECK(r.f1 >= 0.0);
        CHECK(r.f1 <= std::max(r.precision, r.recall) + 1e-15);
        CHECK(r.f1 == Approx(harmonic(r.precision, r.recall)));
        if (r.precision * r.recall == 0.0)
            CHECK(r.f1 == 0.0);
        else
            CHECK(r.f1 > 0.0);
    }
}

TEST_CASE("macro_average is the unrounded arithmetic mean per field") {
    const std::array<ClassReport, kNumLabels> reports = {
        make_report(0.93, 0.94, 0.95, 0.94),
        make_report(0.91, 0.77, 0.90, 0.83),
        make_report(0.93, 0.75, 0.87, 0.80),
    };
    const ClassReport m = macro_average(reports);
    CHECK(m.precision == Approx(0.82));
    CHECK(m.recall == Approx(0.9066666666666666));
    CHECK(m.accuracy == Approx((0.93 + 0.91 + 0.93) / 3.0));
    CHECK(m.f1 == Approx((0.94 + 0.83 + 0.80) / 3.0));
    // The stored macro recall stays unrounded; the published avg cell 0.90 is
    // within one rounding unit of it.
    CHECK(std::abs(m.recall - 0.90) <= kCellTol);

    const ClassReport same = make_report(0.5, 0.6, 0.7, 0.8);
    const ClassReport m2 = macro_average({same, same, same});
    CHECK(m2.accuracy == Approx(0.5));
    CHECK(m2.precision == Approx(0.6));
    CHECK(m2.recall == Approx(0.7));
    CHECK(m2.f1 == Approx(0.8));
}

TEST_CASE("round2 and format2 round half-up at two decimals") {
    CHECK(round2(0.94497) == Approx(0.94));
    CHECK(round2(0.905) == Approx(0.91)); // exact .5 goes up
    CHECK(round2(0.945) == Approx(0.95));
    CHECK(round2(0.9066666666666666) == Approx(0.91));
    CHECK(round2(0.0) == 0.0);
    CHECK(round2(1.0) == 1.0);
    CHECK(format2(0.94497) == "0.94");
    CHECK(format2(0.9) == "0.90");
    CHECK(format2(1.0) == "1.00");
    CHECK(format2(0.0) == "0.00");
    CHECK(format2(0.005) == "0.01");
}

TEST_CASE("benchmark rows: per-class f1 is the harmonic mean of pre/rec") {
    int checked = 0;
    for (int i = 0; i < fmtest::kBenchRowCount; ++i) {
        const fmtest::BenchRow& row = fmtest::kBenchRows[i];
        if (std::string(row.cls) == "avg")
            continue;
        const double h = harmonic(row.pre, row.rec);
        INFO(row.model << " / " << row.dataset << " / " << row.cls);
        CHECK(std::abs(h - row.f1) <= kCellTol);
        ++checked;
    }
    CHECK(checked == 54);
}

TEST_CASE("benchmark rows: avg rows are the means of their class rows") {
    REQUIRE(fmtest::kBenchRowCount % 4 == 0);
    int blocks = 0;
    for (int i = 0; i < fmtest::kBenchRowCount; i += 4) {
        const fmtest::BenchRow& irr = fmtest::kBenchRows[i];
        const fmtest::BenchRow& pr = fmtest::kBenchRows[i + 1];
        const fmtest::BenchRow& fr = fmtest::kBenchRows[i + 2];
        const fmtest::BenchRow& avg = fmtest::kBenchRows[i + 3];
        REQUIRE(std::string(irr.cls) == "irrelevant");
        REQUIRE(std::string(pr.cls) == "problem report");
        REQUIRE(std::string(fr.cls) == "feature request");
        REQUIRE(std::string(avg.cls) == "avg");
        REQUIRE(std::string(irr.model) == avg.model);
        REQUIRE(std::string(irr.dataset) == avg.dataset);

        INFO(avg.model << " / " << avg.dataset);
        if (avg.acc >= 0.0)
            CHECK(std::abs((irr.acc + pr.acc + fr.acc) / 3.0 - avg.acc) <= kCellTol);
        CHECK(std::abs((irr.pre + pr.pre + fr.pre) / 3.0 - avg.pre) <= kCellTol);
        CHECK(std::abs((irr.rec + pr.rec + fr.rec) / 3.0 - avg.rec) <= kCellTol);
        CHECK(std::abs((irr.f1 + pr.f1 + fr.f1) / 3.0 - avg.f1) <= kCellTol);
        ++blocks;
    }
    CHECK(blocks == 18);
}

TEST_CASE("evaluate_predictions scores both modes in one pass (hand fixture)") {
    // probs are (problem_report, feature_request, irrelevant).
    const std::vector<Prediction> preds = {
        make_pred(0.9, 0.2, 0.1), // fused problem_report
        make_pred(0.4, 0.6, 0.2), // fused feature_request
        make_pred(0.3, 0.8, 0.3), // fused feature_request
        make_pred(0.6, 0.1, 0.7), // fused irrelevant; binary problem also fires
        make_pred(0.2, 0.2, 0.9), // fused irrelevant
        make_pred(0.1, 0.5, 0.4), // fused feature_request
    };
    const std::vector<Label> gold = {Label::problem_report, Label::problem_report,
                                     Label::feature_request, Label::irrelevant,
                                     Label::irrelevant,      Label::irrelevant};

    const BothReports both = evaluate_predictions(preds, gold);
    CHECK(both.per_binary.mode == EvalMode::per_binary);
    CHECK(both.fused.mode == EvalMode::fused);
    CHECK(both.per_binary.n_test == 6);
    CHECK(both.fused.n_test == 6);

    // Per-binary mode, threshold 0.5 on each label's own probability.
    const ClassReport& bin_pr = both.per_binary.classes[0];
    CHECK(bin_pr.precision == Approx(0.5)); // tp=1 (row 0), fp=1 (row 3)
    CHECK(bin_pr.recall == Approx(0.5));    // fn=1 (row 1)
    CHECK(bin_pr.accuracy == Approx(4.0 / 6.0));
    CHECK(bin_pr.f1 == Approx(0.5));

    const ClassReport& bin_fr = both.per_binary.classes[1];
    CHECK(bin_fr.precision == Approx(1.0 / 3.0)); // tp=1 (row 2), fp=2 (rows 1, 5)
    CHECK(bin_fr.recall == Approx(1.0));
    CHECK(bin_fr.accuracy == Approx(4.0 / 6.0));
    CHECK(bin_fr.f1 == Approx(0.5));

    const ClassReport& bin_irr = both.per_binary.classes[2];
    CHECK(bin_irr.precision == Approx(1.0));       // tp=2 (rows 3, 4), fp=0
    CHECK(bin_irr.recall == Approx(2.0 / 3.0));    // fn=1 (row 5, prob 0.4)
    CHECK(bin_irr.accuracy == Approx(5.0 / 6.0));
    CHECK(bin_irr.f1 == Approx(0.8));

    CHECK(both.per_binary.macro.precision == Approx((0.5 + 1.0 / 3.0 + 1.0) / 3.0));
    CHECK(both.per_binary.macro.recall == Approx((0.5 + 1.0 + 2.0 / 3.0) / 3.0));
    CHECK(both.per_binary.macro.f1 == Approx(0.6));

    // Fused mode, one-vs-rest on the argmax label.
    const ClassReport& fus_pr = both.fused.classes[0];
    CHECK(fus_pr.precision == Approx(1.0)); // only row 0 fused problem, and it is gold
    CHECK(fus_pr.recall == Approx(0.5));    // row 1 fused feature instead
    CHECK(fus_pr.accuracy == Approx(5.0 / 6.0));
    CHECK(fus_pr.f1 == Approx(2.0 / 3.0));

    const ClassReport& fus_fr = both.fused.classes[1];
    CHECK(fus_fr.precision == Approx(1.0 / 3.0)); // rows 1, 2, 5 fused feature; only row 2 gold
    CHECK(fus_fr.recall == Approx(1.0));
    CHECK(fus_fr.accuracy == Approx(4.0 / 6.0));
    CHECK(fus_fr.f1 == Approx(0.5));

    const ClassReport& fus_irr = both.fused.classes[2];
    CHECK(fus_irr.precision == Approx(1.0));    // rows 3, 4 fused irrelevant, both gold
    CHECK(fus_irr.recall == Approx(2.0 / 3.0)); // row 5 fused feature
    CHECK(fus_irr.accuracy == Approx(5.0 / 6.0));
    CHECK(fus_irr.f1 == Approx(0.8));

    CHECK(both.fused.macro.accuracy == Approx((5.0 + 4.0 + 5.0) / 18.0));
    CHECK(both.fused.macro.precision == Approx((1.0 + 1.0 / 3.0 + 1.0) / 3.0));
    CHECK(both.fused.macro.recall == Approx((0.5 + 1.0 + 2.0 / 3.0) / 3.0));
    CHECK(both.fused.macro.f1 == Approx((2.0 / 3.0 + 0.5 + 0.8) / 3.0));

    // In fused one-vs-rest scoring, each exactly-matched item contributes one
    // tp and two tn, each mismatch one fp, one fn, one tn, so the macro
    // accuracy encodes the exact-match fraction: acc = 1/3 + (2/3) * M/N.
    const double exact_match = 4.0 / 6.0;
    CHECK(both.fused.macro.accuracy == Approx(1.0 / 3.0 + 2.0 / 3.0 * exact_match));
}

TEST_CASE("evaluate_predictions validates input") {
    const std::vector<Prediction> one = {make_pred(0.9, 0.1, 0.1)};
    CHECK_THROWS_AS(evaluate_predictions(one, {}), RunError);
    CHECK_THROWS_AS(evaluate_predictions({}, {}), DataError);
}

TEST_CASE("perfect predictions yield all-ones reports in both modes") {
    Rng rng(99);
    std::vector<Prediction> preds;
    std::vector<Label> gold;
    for (int i = 0; i < 30; ++i) {
        const Label lab = kAllLabels[rng.uniform_int(kNumLabels)];
        std::array<double, kNumLabels> probs = {0.05, 0.05, 0.05};
        probs[static_cast<std::size_t>(static_cast<int>(lab))] = 0.95;
        Prediction p;
        p.probs = probs;
        p.fused = fuse_argmax(probs);
        preds.push_back(p);
        gold.push_back(lab);
    }
    const BothReports both = evaluate_predictions(preds, gold);
    for (const EvaluationReport* rep : {&both.per_binary, &both.fused}) {
        for (const ClassReport& c : rep->classes) {
            CHECK(c.accuracy == Approx(1.0));
            CHECK(c.precision == Approx(1.0));
            CHECK(c.recall == Approx(1.0));
            CHECK(c.f1 == Approx(1.0));
        }
        CHECK(rep->macro.f1 == Approx(1.0));
    }
}

TEST_CASE("fused macro accuracy encodes the exact-match fraction (random)") {
    Rng rng(31337);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 5 + static_cast<int>(rng.uniform_int(40));
        std::vector<Prediction> preds;
        std::vector<Label> gold;
        long matches = 0;
        for (int i = 0; i < n; ++i) {
            const Label g = kAllLabels[rng.uniform_int(kNumLabels)];
            const Label f = kAllLabels[rng.uniform_int(kNumLabels)];
            std::array<double, kNumLabels> probs = {0.1, 0.1, 0.1};
            probs[static_cast<std::size_t>(static_cast<int>(f))] = 0.9;
            Prediction p;
            p.probs = probs;
            p.fused = fuse_argmax(probs);
            REQUIRE(p.fused == f);
            preds.push_back(p);
            gold.push_back(g);
            if (f == g)
                ++matches;
        }
        const BothReports both = evaluate_predictions(preds, gold);
        const double frac = static_cast<double>(matches) / n;
        CHECK(both.fused.macro.accuracy == Approx(1.0 / 3.0 + 2.0 / 3.0 * frac));
    }
}

TEST_CASE("constant-irrelevant predictor shows the degenerate recall shape") {
    // Majority-irrelevant corpus, classifier that always answers irrelevant:
    // irrelevant recall pins at 1.0 while both relevant classes collapse to 0.
    std::vector<Prediction> preds;
    std::vector<Label> gold;
    for (int i = 0; i < 6; ++i)
        gold.push_back(Label::irrelevant);
    for (int i = 0; i < 2; ++i)
        gold.push_back(Label::problem_report);
    for (int i = 0; i < 2; ++i)
        gold.push_back(Label::feature_request);
    for (std::size_t i = 0; i < gold.size(); ++i)
        preds.push_back(make_pred(0.1, 0.1, 0.9));

    const BothReports both = evaluate_predictions(preds, gold);
    for (const EvaluationReport* rep : {&both.per_binary, &both.fused}) {
        const ClassReport& irr = rep->classes[2];
        CHECK(irr.recall == Approx(1.0));
        CHECK(irr.precision == Approx(0.6));
        const ClassReport& pr = rep->classes[0];
        const ClassReport& fr = rep->classes[1];
        CHECK(pr.recall == 0.0);
        CHECK(pr.precision == 0.0);
        CHECK(pr.f1 == 0.0);
        CHECK(fr.recall == 0.0);
        CHECK(fr.precision == 0.0);
        CHECK(fr.f1 == 0.0);
    }
}

TEST_CASE("render_report prints display-order rows with two-decimal cells") {
    EvaluationReport r;
    r.mode = EvalMode::fused;
    r.n_test = 100;
    r.classes[0] = make_report(0.91, 0.77, 0.90, 0.83);      // problem report
    r.classes[1] = make_report(0.93, 0.75, 0.87, 0.80);      // feature request
    r.classes[2] = make_report(0.93, 0.94, 0.95, 0.94497);   // irrelevant
    r.macro = macro_average(r.classes);

    const std::string text = render_report(r);
    std::istringstream in(text);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        lines.push_back(line);
    REQUIRE(lines.size() == 5);

    CHECK(lines[0].find("accuracy") != std::string::npos);
    CHECK(lines[0].find("precision") != std::string::npos);
    CHECK(lines[0].find("recall") != std::string::npos);
    CHECK(lines[0].find("f1") != std::string::npos);

    CHECK(lines[1].find("irrelevant") == 0);
    CHECK(lines[2].find("problem report") == 0);
    CHECK(lines[3].find("feature request") == 0);
    CHECK(lines[4].find("all classes (avg.)") == 0);

    // f1 0.94497 renders as the rounded cell.
    CHECK(lines[1].find("0.94") != std::string::npos);
    // Macro accuracy mean (0.91 + 0.93 + 0.93)/3 = 0.923333 renders "0.92".
    CHECK(lines[4].find("0.92") != std::string::npos);
}

TEST_CASE("macro cells are rounded from unrounded means, not means of rounded cells") {
    EvaluationReport r;
    r.classes[0] = make_report(0.0, 0.0, 0.0051, 0.0);
    r.classes[1] = make_report(0.0, 0.0, 0.0051, 0.0);
    r.classes[2] = make_report(0.0, 0.0, 0.0, 0.0);
    r.macro = macro_average(r.classes);
    CHECK(r.macro.recall == Approx(0.0034));

    // Rounding each class first would give cells 0.01, 0.01, 0.00 whose mean
    // renders "0.01"; rounding the stored mean renders "0.00".
    CHECK(format2(r.macro.recall) == "0.00");
    const std::string text = render_report(r);
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line))
        lines.push_back(line);
    REQUIRE(lines.size() == 5);
    CHECK(lines[4].find("0.01") == std::string::npos);
}

TEST_CASE("report_json carries unrounded values under the documented schema") {
    EvaluationReport r;
    r.mode = EvalMode::per_binary;
    r.n_test = 42;
    r.classes[0] = make_report(0.91, 0.77, 0.90, 0.83);
    r.classes[1] = make_report(0.93, 0.75, 0.87, 0.80);
    r.classes[2] = make_report(0.93, 0.94, 0.95, 0.94497);
    r.macro = macro_average(r.classes);

    const nlohmann::json j = report_json(r);
    CHECK(j.at("mode").get<std::string>() == "binary");
    CHECK(j.at("n_test").get<long>() == 42);
    const auto& classes = j.at("classes");
    REQUIRE(classes.contains("problem_report"));
    REQUIRE(classes.contains("feature_request"));
    REQUIRE(classes.contains("irrelevant"));
    CHECK(classes.at("irrelevant").at("f1").get<double>() == Approx(0.94497));
    CHECK(classes.at("problem_report").at("pre").get<double>() == Approx(0.77));
    CHECK(classes.at("feature_request").at("rec").get<double>() == Approx(0.87));
    CHECK(classes.at("irrelevant").at("acc").get<double>() == Approx(0.93));
    // Macro values stay unrounded in the JSON twin.
    CHECK(j.at("macro").at("rec").get<double>() == Approx((0.90 + 0.87 + 0.95) / 3.0));

    // Round-trips through text.
    const nlohmann::json back = nlohmann::json::parse(j.dump());
    CHECK(back == j);
}

TEST_CASE("eval mode names round-trip and junk is rejected") {
    CHECK(std::string(to_string(EvalMode::per_binary)) == "binary");
    CHECK(std::string(to_string(EvalMode::fused)) == "fused");
    CHECK(eval_mode_from_string("binary") == EvalMode::per_binary);
    CHECK(eval_mode_from_string("fused") == EvalMode::fused);
    CHECK_THROWS_AS(eval_mode_from_string("macro"), UsageError);
}
