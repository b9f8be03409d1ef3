#include "fm/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "fm/errors.hpp"

namespace fm {

using nlohmann::json;

const char* to_string(EvalMode mode) {
    return mode == EvalMode::per_binary ? "binary" : "fused";
}

EvalMode eval_mode_from_string(const std::string& s) {
    if (s == "binary")
        return EvalMode::per_binary;
    if (s == "fused")
        return EvalMode::fused;
    throw UsageError("unknown evaluation mode '" + s + "' (expected binary or fused)");
}

ConfusionCounts binary_counts(const std::vector<bool>& predicted,
                              const std::vector<bool>& gold) {
    if (predicted.size() != gold.size())
        throw RunError("binary_counts: length mismatch (" + std::to_string(predicted.size()) +
                       " predictions vs " + std::to_string(gold.size()) + " gold)");
    if (predicted.empty())
        throw RunError("binary_counts: empty input");
    ConfusionCounts c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i] && gold[i])
            ++c.tp;
        else if (predicted[i] && !gold[i])
            ++c.fp;
        else if (!predicted[i] && gold[i])
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

namespace {
double ratio(long num, long den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }
} // namespace

ClassReport class_report(const ConfusionCounts& c) {
    if (c.total() <= 0)
        throw RunError("class_report: no evaluated items");
    ClassReport r;
    r.precision = ratio(c.tp, c.tp + c.fp);
    r.recall = ratio(c.tp, c.tp + c.fn);
    r.accuracy = ratio(c.tp + c.tn, c.total());
    r.f1 = (r.precision + r.recall) == 0.0
               ? 0.0
               : 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

ClassReport macro_average(const std::array<ClassReport, kNumLabels>& reports) {
    ClassReport m;
    for (const ClassReport& r : reports) {
        m.accuracy += r.accuracy;
        m.precision += r.precision;
        m.recall += r.recall;
        m.f1 += r.f1;
    }
    const double k = static_cast<double>(reports.size());
    m.accuracy /= k;
    m.precision /= k;
    m.recall /= k;
    m.f1 /= k;
    return m;
}

BothReports evaluate_predictions(const std::vector<Prediction>& preds,
                                 const std::vector<Label>& gold) {
    if (preds.size() != gold.size())
        throw RunError("evaluate_predictions: prediction/gold length mismatch");
    if (preds.empty())
        throw DataError("evaluation set is empty");

    BothReports out;
    out.per_binary.mode = EvalMode::per_binary;
    out.fused.mode = EvalMode::fused;
    out.per_binary.n_test = out.fused.n_test = static_cast<long>(preds.size());

    for (std::size_t li = 0; li < kAllLabels.size(); ++li) {
        const Label lab = kAllLabels[li];
        std::vector<bool> gold_pos(preds.size());
        std::vector<bool> bin_pos(preds.size());
        std::vector<bool> fused_pos(preds.size());
        for (std::size_t i = 0; i < preds.size(); ++i) {
            gold_pos[i] = gold[i] == lab;
            bin_pos[i] = preds[i].probs[li] >= 0.5;
            fused_pos[i] = preds[i].fused == lab;
        }
        out.per_binary.classes[li] = class_report(binary_counts(bin_pos, gold_pos));
        out.fused.classes[li] = class_report(binary_counts(fused_pos, gold_pos));
    }
    out.per_binary.macro = macro_average(out.per_binary.classes);
    out.fused.macro = macro_average(out.fused.classes);
    return out;
}

BothReports evaluate_both(TriClassifier& tri, const Corpus& test) {
    if (test.comments.empty())
        throw DataError("evaluation corpus is empty");
    const std::vector<Prediction> preds = predict_batch(tri, test.comments);
    std::vector<Label> gold;
    gold.reserve(test.comments.size());
    for (const UserComment& c : test.comments)
        gold.push_back(c.gold);
    return evaluate_predictions(preds, gold);
}

EvaluationReport evaluate(TriClassifier& tri, const Corpus& test, EvalMode mode) {
    BothReports both = evaluate_both(tri, test);
    return mode == EvalMode::per_binary ? both.per_binary : both.fused;
}

double round2(double v) { return std::floor(v * 100.0 + 0.5) / 100.0; }

std::string format2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", round2(v));
    return buf;
}

std::string render_report(const EvaluationReport& r) {
    // Table rows go irrelevant, problem report, feature request, macro.
    const std::array<int, 3> row_order = {2, 0, 1};
    std::string out;
    char line[128];
    std::snprintf(line, sizeof line, "%-22s %8s %10s %7s %6s\n", "class", "accuracy",
                  "precision", "recall", "f1");
    out += line;
    const auto emit = [&](const char* name, const ClassReport& c) {
        std::snprintf(line, sizeof line, "%-22s %8s %10s %7s %6s\n", name,
                      format2(c.accuracy).c_str(), format2(c.precision).c_str(),
                      format2(c.recall).c_str(), format2(c.f1).c_str());
        out += line;
    };
    for (const int i : row_order)
        emit(display_name(kAllLabels[static_cast<std::size_t>(i)]),
             r.classes[static_cast<std::size_t>(i)]);
    emit("all classes (avg.)", r.macro);
    return out;
}

json report_json(const EvaluationReport& r) {
    const auto cls = [](const ClassReport& c) {
        return json{{"acc", c.accuracy}, {"pre", c.precision}, {"rec", c.recall}, {"f1", c.f1}};
    };
    json classes;
    for (std::size_t i = 0; i < kAllLabels.size(); ++i)
        classes[to_string(kAllLabels[i])] = cls(r.classes[i]);
    return json{{"mode", to_string(r.mode)},
                {"classes", classes},
                {"macro", cls(r.macro)},
                {"n_test", r.n_test}};
}

} // namespace fm
