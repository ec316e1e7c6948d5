// Character alphabet, token table, and the spelling/padding conventions that
// define the student's output space.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "spellm/common.hpp"

namespace spellm {

// Char indices; 0 and 1 are reserved in every CharVocab.
inline constexpr int kPadIndex = 0;
inline constexpr int kUnkIndex = 1;

// A token spelled as exactly k char indices, right-padded with PAD.
// Raw head output reuses this shape but is not guaranteed PAD-suffix closed.
using SpelledString = std::vector<int>;

class CharVocab {
public:
    // PAD, UNK, space, the 32 ASCII punctuation marks, 0-9, a-z, A-Z: 97 symbols.
    static CharVocab default_latin();
    // codepoints[0] / [1] are ignored; PAD and UNK always occupy indices 0 and 1.
    static CharVocab from_codepoints(const std::vector<uint32_t>& codepoints);
    static CharVocab from_serialized(const std::vector<std::string>& charset);

    int size() const { return int(codepoints_.size()); }
    std::optional<int> index_of(uint32_t cp) const;
    // Codepoint at index; PAD has none, UNK reports U+FFFD.
    uint32_t codepoint_at(int index) const;
    // ["<pad>", "<unk>", " ", ...] as stored in file headers.
    std::vector<std::string> serialized() const;

    bool operator==(const CharVocab& other) const { return codepoints_ == other.codepoints_; }

private:
    std::vector<uint32_t> codepoints_;  // [0]=PAD sentinel, [1]=UNK sentinel
    std::unordered_map<uint32_t, int> index_;
};

// Canonical decomposition, combining marks dropped, anything outside the
// alphabet folded to U+FFFD. Total on any byte string; length is preserved
// in base characters.
std::string normalize(const std::string& raw, const CharVocab& cv);

// normalize, map to indices, truncate to k, right-pad with PAD.
SpelledString spell(const std::string& raw, int k, const CharVocab& cv);

// Symbols up to the first PAD; UNK renders as U+FFFD.
std::string unspell(const SpelledString& s, const CharVocab& cv);

struct TokenEntry {
    int id = 0;
    std::string raw;
    SpelledString spelling;  // derived: spell(raw, k, cv)
    int norm_len = 0;        // base-character length of normalize(raw)
};

struct CoverageReport {
    int total = 0;
    double representable = 0.0;   // no UNK and norm_len <= k
    double truncated = 0.0;       // norm_len > k
    double contains_unk = 0.0;    // any UNK among normalized characters
};

class TokenVocab {
public:
    TokenVocab() = default;
    // Raw strings indexed by token id (ids are their positions).
    TokenVocab(std::vector<std::string> raws, int k, CharVocab cv);

    int S() const { return int(entries_.size()); }
    int k() const { return k_; }
    const CharVocab& charset() const { return cv_; }
    const TokenEntry& entry(int id) const { return entries_[id]; }
    const std::vector<TokenEntry>& entries() const { return entries_; }

    // All token ids whose spelling equals s exactly (collisions possible after
    // normalization/truncation).
    const std::vector<int>& ids_for_spelling(const SpelledString& s) const;

    // Content hash over (k, charset, raws); identifies the vocab in trace headers.
    const std::string& content_sha256() const { return hash_; }

private:
    int k_ = 0;
    CharVocab cv_;
    std::vector<TokenEntry> entries_;
    std::unordered_map<std::string, std::vector<int>> by_spelling_;
    std::string hash_;
};

std::pair<bool, std::vector<int>> is_valid_token(const SpelledString& s, const TokenVocab& tv);

CoverageReport coverage_report(const TokenVocab& tv, const CharVocab& cv);

// spellm-vocab-v1 JSON Lines: header {"format","k","charset"} then {"id","raw"}.
void write_vocab_file(const std::string& path, const TokenVocab& tv);
TokenVocab read_vocab_file(const std::string& path, std::optional<int> k_override = std::nullopt);

// Deterministic token table for desk-scale runs: mostly lowercase words with
// occasional capitalization, apostrophes, and digits; unique raws.
std::vector<std::string> synth_token_raws(int S, uint64_t seed, int min_len = 1, int max_len = 8);

}  // namespace spellm
