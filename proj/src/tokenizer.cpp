#include "fm/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "fm/errors.hpp"

namespace fm {

namespace {

bool is_word_char(unsigned char c) {
    return std::isalnum(c) != 0 || c == '_';
}

bool is_space_char(unsigned char c) {
    return std::isspace(c) != 0;
}

// ASCII punctuation; bytes >= 0x80 are treated as word characters
// (UTF-8 pass-through, no Unicode categories).
bool is_punct_char(unsigned char c) {
    return c < 0x80 && std::ispunct(c) != 0;
}

// Byte offsets of UTF-8 code point starts, plus the end offset.
std::vector<std::size_t> codepoint_starts(std::string_view s) {
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80)
            starts.push_back(i);
    }
    starts.push_back(s.size());
    return starts;
}

constexpr std::size_t kMaxWordChars = 100;

} // namespace

bool Vocabulary::contains(std::string_view token) const {
    return ids.find(std::string(token)) != ids.end();
}

int Vocabulary::id_of(std::string_view token) const {
    const auto it = ids.find(std::string(token));
    return it == ids.end() ? -1 : it->second;
}

Vocabulary make_vocab(std::vector<std::string> tokens) {
    if (tokens.empty())
        throw DataError("empty vocabulary");
    Vocabulary v;
    v.tokens = std::move(tokens);
    for (std::size_t i = 0; i < v.tokens.size(); ++i) {
        if (v.tokens[i].empty())
            throw DataError("empty token at vocab line " + std::to_string(i + 1));
        if (!v.ids.emplace(v.tokens[i], static_cast<int>(i)).second)
            throw DataError("duplicate vocab token \"" + v.tokens[i] + "\" at line " +
                            std::to_string(i + 1));
    }
    for (const char* required : {kClsToken, kSepToken, kPadToken, kUnkToken})
        if (!v.contains(required))
            throw DataError(std::string("vocabulary is missing ") + required);
    if (!v.contains(kMentionToken)) {
        v.ids.emplace(kMentionToken, v.size());
        v.tokens.emplace_back(kMentionToken);
    }
    v.cls_id = v.id_of(kClsToken);
    v.sep_id = v.id_of(kSepToken);
    v.pad_id = v.id_of(kPadToken);
    v.unk_id = v.id_of(kUnkToken);
    v.mention_id = v.id_of(kMentionToken);
    return v;
}

Vocabulary load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open vocab file: " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        tokens.push_back(line);
    }
    // A trailing newline yields no extra line with getline; an empty final
    // line only appears when the file ends in two newlines.
    while (!tokens.empty() && tokens.back().empty())
        tokens.pop_back();
    return make_vocab(std::move(tokens));
}

void save_vocab(const Vocabulary& v, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw RunError("cannot write vocab file: " + path);
    for (const auto& token : v.tokens)
        out << token << '\n';
}

std::string normalize(std::string_view text, const TokenizerConfig& cfg) {
    std::string replaced;
    replaced.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (c == '@' && i + 1 < text.size() &&
            is_word_char(static_cast<unsigned char>(text[i + 1]))) {
            std::size_t j = i + 1;
            while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j])))
                ++j;
            replaced += kMentionToken;
            i = j;
        } else {
            replaced += text[i];
            ++i;
        }
    }

    std::string out;
    out.reserve(replaced.size());
    bool pending_space = false;
    for (const char ch : replaced) {
        const auto c = static_cast<unsigned char>(ch);
        if (is_space_char(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += cfg.lowercase ? static_cast<char>(std::tolower(c)) : ch;
    }
    return out;
}

std::vector<std::string> pre_tokenize(std::string_view normalized) {
    static const std::string mention = kMentionToken;
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) {
            tokens.push_back(current);
            current.clear();
        }
    };
    for (std::size_t i = 0; i < normalized.size();) {
        const auto c = static_cast<unsigned char>(normalized[i]);
        if (normalized.substr(i, mention.size()) == mention) {
            flush();
            tokens.push_back(mention);
            i += mention.size();
        } else if (is_space_char(c)) {
            flush();
            ++i;
        } else if (is_punct_char(c)) {
            flush();
            tokens.emplace_back(1, normalized[i]);
            ++i;
        } else {
            current += normalized[i];
            ++i;
        }
    }
    flush();
    return tokens;
}

std::vector<std::string> wordpiece(std::string_view word, const Vocabulary& v,
                                   const TokenizerConfig& cfg) {
    const auto starts = codepoint_starts(word);
    const std::size_t n_chars = starts.size() - 1;
    if (n_chars == 0 || n_chars > kMaxWordChars)
        return {kUnkToken};

    std::vector<std::string> pieces;
    std::size_t start = 0; // code point index
    while (start < n_chars) {
        std::size_t end = n_chars;
        std::string found;
        while (end > start) {
            std::string piece(word.substr(starts[start], starts[end] - starts[start]));
            if (start > 0)
                piece = cfg.continuation_prefix + piece;
            if (v.contains(piece)) {
                found = std::move(piece);
                break;
            }
            --end;
        }
        if (found.empty())
            return {kUnkToken}; // greedy walk stuck; no backtracking
        pieces.push_back(std::move(found));
        start = end;
    }
    return pieces;
}

std::vector<int> content_token_ids(std::string_view text, const Vocabulary& v,
                                   const TokenizerConfig& cfg) {
    std::vector<int> ids;
    for (const auto& word : pre_tokenize(normalize(text, cfg)))
        for (const auto& piece : wordpiece(word, v, cfg))
            ids.push_back(v.id_of(piece));
    return ids;
}

int EncodedInput::num_real() const {
    return static_cast<int>(std::count(mask.begin(), mask.end(), 1));
}

EncodedInput encode(std::string_view text, const Vocabulary& v,
                    const TokenizerConfig& cfg) {
    if (cfg.max_len < 3)
        throw UsageError("max_len must be at least 3");
    std::vector<int> content = content_token_ids(text, v, cfg);
    const auto budget = static_cast<std::size_t>(cfg.max_len - 2);
    if (content.size() > budget)
        content.resize(budget);

    EncodedInput e;
    const auto L = static_cast<std::size_t>(cfg.max_len);
    e.ids.assign(L, v.pad_id);
    e.mask.assign(L, 0);
    e.segments.assign(L, 0);
    e.ids[0] = v.cls_id;
    e.mask[0] = 1;
    for (std::size_t i = 0; i < content.size(); ++i) {
        e.ids[i + 1] = content[i];
        e.mask[i + 1] = 1;
    }
    e.ids[content.size() + 1] = v.sep_id;
    e.mask[content.size() + 1] = 1;
    return e;
}

} // namespace fm
