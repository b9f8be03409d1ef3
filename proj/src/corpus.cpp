#include "fm/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "fm/errors.hpp"
#include "fm/rng.hpp"

namespace fm {

using nlohmann::json;

const char* to_string(Label label) {
    switch (label) {
    case Label::problem_report: return "problem_report";
    case Label::feature_request: return "feature_request";
    case Label::irrelevant: return "irrelevant";
    }
    return "?";
}

const char* display_name(Label label) {
    switch (label) {
    case Label::problem_report: return "problem report";
    case Label::feature_request: return "feature request";
    case Label::irrelevant: return "irrelevant";
    }
    return "?";
}

std::optional<Label> label_from_string(std::string_view s) {
    for (Label label : kAllLabels)
        if (s == to_string(label))
            return label;
    return std::nullopt;
}

namespace {

std::string_view trim(std::string_view s) {
    const auto* ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

} // namespace

UserComment parse_comment_line(std::string_view line, const std::string& language,
                               bool require_label) {
    json rec;
    try {
        rec = json::parse(line);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object())
        throw DataError("record is not a JSON object");
    if (!rec.contains("id") || !rec["id"].is_string())
        throw DataError("missing or non-string \"id\"");
    if (!rec.contains("text") || !rec["text"].is_string())
        throw DataError("missing or non-string \"text\"");

    UserComment c;
    c.id = rec["id"].get<std::string>();
    c.text = rec["text"].get<std::string>();
    if (trim(c.text).empty())
        throw DataError("empty \"text\" field");

    c.language = language;
    if (rec.contains("language")) {
        if (!rec["language"].is_string())
            throw DataError("non-string \"language\"");
        c.language = rec["language"].get<std::string>();
        if (!language.empty() && c.language != language)
            throw DataError("record language \"" + c.language +
                            "\" does not match corpus language \"" + language + "\"");
    }

    if (rec.contains("label")) {
        const auto& lab = rec["label"];
        if (!lab.is_string())
            throw DataError("non-string \"label\"");
        const auto parsed = label_from_string(lab.get<std::string>());
        if (!parsed)
            throw DataError("unknown label \"" + lab.get<std::string>() + "\"");
        c.gold = *parsed;
    } else if (require_label) {
        throw DataError("missing \"label\"");
    }
    return c;
}

CorpusScan scan_corpus(const std::string& path, const std::string& language) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open corpus file: " + path);

    CorpusScan scan;
    scan.corpus.name = path;
    scan.corpus.language = language;

    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (trim(line).empty()) {
            scan.diagnostics.push_back({line_no, "blank line"});
            continue;
        }
        try {
            UserComment c = parse_comment_line(line, language, /*require_label=*/true);
            if (!seen_ids.insert(c.id).second)
                throw DataError("duplicate id \"" + c.id + "\"");
            scan.corpus.comments.push_back(std::move(c));
        } catch (const DataError& e) {
            scan.diagnostics.push_back({line_no, e.what()});
        }
    }
    return scan;
}

Corpus load_corpus(const std::string& path, const std::string& language) {
    CorpusScan scan = scan_corpus(path, language);
    if (!scan.ok()) {
        const auto& d = scan.diagnostics.front();
        throw DataError(path + ":" + std::to_string(d.line) + ": " + d.message);
    }
    return std::move(scan.corpus);
}

std::array<std::size_t, kNumLabels> class_counts(const Corpus& c) {
    std::array<std::size_t, kNumLabels> counts{};
    for (const auto& comment : c.comments)
        ++counts[static_cast<int>(comment.gold)];
    return counts;
}

std::array<double, kNumLabels> class_distribution(const Corpus& c) {
    if (c.empty())
        throw DataError("class_distribution of an empty corpus");
    const auto counts = class_counts(c);
    std::array<double, kNumLabels> ratios{};
    for (int i = 0; i < kNumLabels; ++i)
        ratios[i] = static_cast<double>(counts[i]) / static_cast<double>(c.size());
    return ratios;
}

namespace {

// Indices of c grouped per class, in ingestion order.
std::array<std::vector<std::size_t>, kNumLabels> per_class_indices(const Corpus& c) {
    std::array<std::vector<std::size_t>, kNumLabels> groups;
    for (std::size_t i = 0; i < c.comments.size(); ++i)
        groups[static_cast<int>(c.comments[i].gold)].push_back(i);
    return groups;
}

Corpus select(const Corpus& c, const std::vector<bool>& keep, const std::string& suffix) {
    Corpus out;
    out.name = c.name.empty() ? suffix : c.name + "." + suffix;
    out.language = c.language;
    for (std::size_t i = 0; i < c.comments.size(); ++i)
        if (keep[i])
            out.comments.push_back(c.comments[i]);
    return out;
}

} // namespace

std::pair<Corpus, Corpus> stratified_split(const Corpus& c, double test_fraction,
                                           std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw UsageError("test_fraction must lie strictly between 0 and 1");

    std::vector<bool> in_test(c.comments.size(), false);
    auto groups = per_class_indices(c);
    for (int lab = 0; lab < kNumLabels; ++lab) {
        auto& idx = groups[lab];
        if (idx.empty())
            continue;
        Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(lab)));
        rng.shuffle(idx);
        const auto n_test = static_cast<std::size_t>(
            std::llround(static_cast<double>(idx.size()) * test_fraction));
        for (std::size_t i = 0; i < n_test && i < idx.size(); ++i)
            in_test[idx[i]] = true;
    }

    std::vector<bool> in_train(c.comments.size());
    for (std::size_t i = 0; i < in_test.size(); ++i)
        in_train[i] = !in_test[i];
    return {select(c, in_train, "train"), select(c, in_test, "test")};
}

FoldAssignment make_folds(const Corpus& c, int k, std::uint64_t seed) {
    if (k < 2)
        throw UsageError("fold count must be at least 2");
    const auto counts = class_counts(c);
    for (int lab = 0; lab < kNumLabels; ++lab)
        if (counts[lab] > 0 && counts[lab] < static_cast<std::size_t>(k))
            throw DataError(std::string("class ") + to_string(static_cast<Label>(lab)) +
                            " has fewer members than folds (" +
                            std::to_string(counts[lab]) + " < " + std::to_string(k) + ")");

    FoldAssignment folds;
    folds.k = k;

    // A single round-robin cursor runs across all classes, so per-class
    // counts and total fold sizes both stay within one of each other.
    auto groups = per_class_indices(c);
    int cursor = 0;
    for (int lab = 0; lab < kNumLabels; ++lab) {
        auto& idx = groups[lab];
        Rng rng(Rng::mix(seed, 0x10 + static_cast<std::uint64_t>(lab)));
        rng.shuffle(idx);
        for (const std::size_t i : idx) {
            folds.assignment.emplace(c.comments[i].id, cursor);
            cursor = (cursor + 1) % k;
        }
    }
    return folds;
}

int FoldAssignment::fold_of(const std::string& id) const {
    const auto it = assignment.find(id);
    if (it == assignment.end())
        throw DataError("comment id \"" + id + "\" has no fold assignment");
    return it->second;
}

Corpus fold_subset(const Corpus& c, const FoldAssignment& folds, int fold, bool invert) {
    std::vector<bool> keep(c.comments.size());
    for (std::size_t i = 0; i < c.comments.size(); ++i) {
        const bool in_fold = folds.fold_of(c.comments[i].id) == fold;
        keep[i] = invert ? !in_fold : in_fold;
    }
    return select(c, keep, invert ? "not-fold" + std::to_string(fold)
                                  : "fold" + std::to_string(fold));
}

std::size_t BinaryTask::positives() const {
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [](const BinaryItem& it) { return it.positive; }));
}

std::size_t BinaryTask::negatives() const { return items.size() - positives(); }

BinaryTask to_binary_task(const Corpus& c, Label target) {
    BinaryTask task;
    task.target = target;
    task.items.reserve(c.comments.size());
    for (const auto& comment : c.comments)
        task.items.push_back({comment, comment.gold == target});
    return task;
}

BinaryTask undersample(const BinaryTask& task, std::uint64_t seed) {
    const std::size_t n_pos = task.positives();
    const std::size_t n_neg = task.items.size() - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw DataError(std::string("undersample needs both classes non-empty (target ") +
                        to_string(task.target) + ": " + std::to_string(n_pos) +
                        " positive / " + std::to_string(n_neg) + " negative)");

    const bool majority_positive = n_pos > n_neg;
    const std::size_t keep = std::min(n_pos, n_neg);

    std::vector<std::size_t> majority_idx;
    for (std::size_t i = 0; i < task.items.size(); ++i)
        if (task.items[i].positive == majority_positive)
            majority_idx.push_back(i);

    // Partial Fisher-Yates: the first `keep` slots are a uniform
    // without-replacement sample.
    Rng rng(seed);
    const std::size_t n = majority_idx.size();
    for (std::size_t i = 0; i < keep && i + 1 < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.uniform_int(n - i));
        std::swap(majority_idx[i], majority_idx[j]);
    }

    std::vector<bool> retained(task.items.size(), false);
    for (std::size_t i = 0; i < task.items.size(); ++i)
        if (task.items[i].positive != majority_positive)
            retained[i] = true;
    for (std::size_t i = 0; i < keep; ++i)
        retained[majority_idx[i]] = true;

    BinaryTask out;
    out.target = task.target;
    for (std::size_t i = 0; i < task.items.size(); ++i)
        if (retained[i])
            out.items.push_back(task.items[i]);
    return out;
}

Corpus merge_corpora(const std::vector<Corpus>& parts, const std::string& name,
                     std::uint64_t seed) {
    if (parts.empty())
        throw UsageError("merge_corpora needs at least one corpus");
    Corpus merged;
    merged.name = name;
    merged.language = parts.size() == 1 ? parts.front().language : "multi";
    for (std::size_t p = 0; p < parts.size(); ++p) {
        for (UserComment c : parts[p].comments) {
            c.id = parts[p].name + "/" + c.id;
            merged.comments.push_back(std::move(c));
        }
    }
    Rng rng(Rng::mix(seed, 0x3E)); // interleave deterministically
    rng.shuffle(merged.comments);
    return merged;
}

} // namespace fm
