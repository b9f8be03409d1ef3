#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace fm {

inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kMentionToken = "@mention";

// Token ids are dense line numbers of the vocab file, matching the
// published BERT vocab layout so real vocabularies drop in unchanged.
struct Vocabulary {
    std::vector<std::string> tokens;           // id -> token
    std::unordered_map<std::string, int> ids;  // token -> id
    int cls_id = -1;
    int sep_id = -1;
    int pad_id = -1;
    int unk_id = -1;
    int mention_id = -1;

    int size() const { return static_cast<int>(tokens.size()); }
    bool contains(std::string_view token) const;
    int id_of(std::string_view token) const; // -1 when absent
};

// One token per line, UTF-8, line index = id. If "@mention" is missing it
// is appended with the next free id. Throws DataError on duplicates, an
// empty file, or a missing [CLS]/[SEP]/[PAD]/[UNK].
Vocabulary load_vocab(const std::string& path);

// Same validation as load_vocab, for vocabularies built in memory.
Vocabulary make_vocab(std::vector<std::string> tokens);

void save_vocab(const Vocabulary& v, const std::string& path);

struct TokenizerConfig {
    bool lowercase = true;           // uncased vs cased models
    int max_len = 200;               // fixed sequence length L
    std::string continuation_prefix = "##";
};

// Replaces every maximal "@" + [A-Za-z0-9_]+ run with the literal
// "@mention", optionally lowercases (ASCII; the replacement token is
// already lowercase), collapses whitespace runs and trims. Idempotent.
std::string normalize(std::string_view text, const TokenizerConfig& cfg);

// Splits normalized text into basic tokens: whitespace-separated, with
// punctuation characters isolated as standalone tokens. The literal
// "@mention" survives as a single token.
std::vector<std::string> pre_tokenize(std::string_view normalized);

// Greedy longest-match-first WordPiece. Non-initial pieces carry the
// "##" prefix. No backtracking: if the greedy walk gets stuck, or the
// word exceeds 100 characters (UTF-8 code points), the result is a
// single [UNK].
std::vector<std::string> wordpiece(std::string_view word, const Vocabulary& v,
                                   const TokenizerConfig& cfg);

struct EncodedInput {
    std::vector<int> ids;      // length L, [CLS] content [SEP] [PAD]...
    std::vector<int> mask;     // 1 for real tokens incl. CLS/SEP, 0 for PAD
    std::vector<int> segments; // all zero (single-sequence task)

    int length() const { return static_cast<int>(ids.size()); }
    int num_real() const; // count of mask==1 positions
};

// Content token ids before truncation/framing; exposed for coverage stats.
std::vector<int> content_token_ids(std::string_view text, const Vocabulary& v,
                                   const TokenizerConfig& cfg);

// Full pipeline: normalize -> pre_tokenize -> wordpiece -> truncate to
// L-2 -> frame as [CLS] content [SEP] with PAD fill and matching mask.
EncodedInput encode(std::string_view text, const Vocabulary& v,
                    const TokenizerConfig& cfg);

} // namespace fm
