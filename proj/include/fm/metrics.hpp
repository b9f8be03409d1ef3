#pragma once

// Confusion counts, per-class accuracy/precision/recall/F1, macro averaging,
// and the report renderer. Two scoring modes exist because per-class numbers
// can be read off either each binary model's own decision (threshold 0.5) or
// the fused one-vs-rest label; both are computed in a single pass.

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "fm/classifier.hpp"
#include "fm/corpus.hpp"

namespace fm {

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    long tn = 0;

    long total() const { return tp + fp + fn + tn; }
};

struct ClassReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

enum class EvalMode { per_binary, fused };

const char* to_string(EvalMode mode);
EvalMode eval_mode_from_string(const std::string& s);

struct EvaluationReport {
    EvalMode mode = EvalMode::fused;
    std::array<ClassReport, kNumLabels> classes{}; // canonical label order
    ClassReport macro;
    long n_test = 0;
};

ConfusionCounts binary_counts(const std::vector<bool>& predicted,
                              const std::vector<bool>& gold);

// precision = tp/(tp+fp), recall = tp/(tp+fn), accuracy = (tp+tn)/total,
// f1 = harmonic mean; every 0/0 denominator yields 0.
ClassReport class_report(const ConfusionCounts& c);

// Arithmetic mean per field over the three classes (unrounded).
ClassReport macro_average(const std::array<ClassReport, kNumLabels>& reports);

struct BothReports {
    EvaluationReport per_binary;
    EvaluationReport fused;
};

// Scores a list of predictions against gold labels in one pass.
BothReports evaluate_predictions(const std::vector<Prediction>& preds,
                                 const std::vector<Label>& gold);

BothReports evaluate_both(TriClassifier& tri, const Corpus& test);
EvaluationReport evaluate(TriClassifier& tri, const Corpus& test, EvalMode mode);

// Round half-up to two decimals (0.94497 -> 0.94, 0.905 -> 0.91).
double round2(double v);
std::string format2(double v);

// Text table: rows irrelevant / problem report / feature request /
// all classes (avg.), columns accuracy, precision, recall, f1, each rounded
// half-up to two decimals. Macro cells are rounded from the unrounded means.
std::string render_report(const EvaluationReport& r);

// JSON twin with unrounded values:
// {mode, classes: {label: {acc,pre,rec,f1}}, macro: {...}, n_test}.
nlohmann::json report_json(const EvaluationReport& r);

} // namespace fm
