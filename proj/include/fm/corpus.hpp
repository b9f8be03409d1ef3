#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fm {

// The three comment categories. The enumerator order is the canonical
// order used for argmax tie-breaking and for per-class bookkeeping.
enum class Label : int {
    problem_report = 0,
    feature_request = 1,
    irrelevant = 2,
};

inline constexpr int kNumLabels = 3;
inline constexpr std::array<Label, kNumLabels> kAllLabels = {
    Label::problem_report, Label::feature_request, Label::irrelevant};

const char* to_string(Label label);
// Display name with spaces ("problem report"), as used in rendered reports.
const char* display_name(Label label);
std::optional<Label> label_from_string(std::string_view s);

struct UserComment {
    std::string id;
    std::string text;     // non-empty after whitespace trim
    std::string language; // ISO 639-1
    Label gold = Label::irrelevant;
};

// Immutable after construction; comment order is ingestion order so that
// every seeded sampling operation downstream is reproducible.
struct Corpus {
    std::string name;
    std::string language;
    std::vector<UserComment> comments;

    std::size_t size() const { return comments.size(); }
    bool empty() const { return comments.empty(); }
};

struct LineDiagnostic {
    std::size_t line = 0; // 1-based
    std::string message;
};

// Scans a JSONL corpus file and reports every schema violation instead of
// stopping at the first. Valid records are kept in ingestion order.
struct CorpusScan {
    Corpus corpus;
    std::vector<LineDiagnostic> diagnostics;
    bool ok() const { return diagnostics.empty(); }
};
CorpusScan scan_corpus(const std::string& path, const std::string& language);

// Strict loader: throws DataError with the line number of the first
// malformed record.
Corpus load_corpus(const std::string& path, const std::string& language);

// Parses one JSONL record; used by the loader and by `predict` input
// handling (which accepts records without a label).
UserComment parse_comment_line(std::string_view line, const std::string& language,
                               bool require_label);

std::array<std::size_t, kNumLabels> class_counts(const Corpus& c);

// Ratios per label, summing to 1. Throws DataError on an empty corpus.
std::array<double, kNumLabels> class_distribution(const Corpus& c);

// Per-class test counts equal round(class_count * test_fraction); members
// are chosen by seeded shuffle within each class. Output corpora preserve
// the original comment order.
std::pair<Corpus, Corpus> stratified_split(const Corpus& c, double test_fraction,
                                           std::uint64_t seed);

struct FoldAssignment {
    int k = 0;
    std::unordered_map<std::string, int> assignment; // comment id -> fold in [0, k)

    int fold_of(const std::string& id) const;
};

// Stratified k-fold assignment: fold sizes differ by at most one and
// per-class fold counts differ by at most one. Classes are dealt onto a
// round-robin cursor that carries over between classes so both constraints
// hold at once.
FoldAssignment make_folds(const Corpus& c, int k, std::uint64_t seed);

Corpus fold_subset(const Corpus& c, const FoldAssignment& folds, int fold,
                   bool invert = false);

struct BinaryItem {
    UserComment comment;
    bool positive = false;
};

// One-vs-rest view of a corpus for a single target label.
struct BinaryTask {
    Label target = Label::irrelevant;
    std::vector<BinaryItem> items;

    std::size_t positives() const;
    std::size_t negatives() const;
};

BinaryTask to_binary_task(const Corpus& c, Label target);

// Random undersampling: keeps every minority item and a uniform
// without-replacement subset of the majority, so both sides end up at
// min(|pos|, |neg|). Selection: indices of the majority side are run
// through a partial Fisher-Yates with Rng(seed) — for i in [0, m):
// j = i + uniform_int(n - i), swap — and the first m survive. Item order
// in the result is the original task order.
BinaryTask undersample(const BinaryTask& task, std::uint64_t seed);

// Deterministic interleaving of several corpora into one (used by the
// cross-lingual experiment command). Ids are prefixed with the source
// corpus name to keep them unique.
Corpus merge_corpora(const std::vector<Corpus>& parts, const std::string& name,
                     std::uint64_t seed);

} // namespace fm
