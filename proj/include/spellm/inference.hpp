// Decode policy: direct valid-token emission, AutoCorrect candidate filtering
// with restricted token-head scoring, and the entropy fallback gate.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spellm/heads.hpp"
#include "spellm/vocab.hpp"

namespace spellm {

enum class DecodePath { direct, autocorrect, autocorrect_empty, fallback };

const char* to_string(DecodePath path);

struct DecodeOutcome {
    SpelledString raw;            // per-head argmax string
    DecodePath path = DecodePath::direct;
    std::optional<int> token_id;  // absent only on autocorrect_empty
    std::string text;
    double mean_entropy = 0.0;
    int candidate_count = 0;      // nonzero iff path == autocorrect
};

// Per position, the min(3, s) highest-probability char indices, sorted.
struct Top3Table {
    std::vector<std::vector<int>> sets;  // k sets
};

Top3Table top3_table(const CharLogits& cl);

// Inverted index: per (position, char) a bitmask over token ids, so the
// candidate filter is k-1 AND-of-OR passes instead of a per-token scan.
class SpellingIndex {
public:
    explicit SpellingIndex(const TokenVocab& tv);
    std::vector<int> candidates(const Top3Table& t3) const;

private:
    int k_, s_, S_, words_;
    std::vector<uint64_t> masks_;  // [(pos * s + char) * words .. )
};

// Token ids whose spelling sits inside the per-position top-3 sets everywhere,
// PAD positions included.
std::vector<int> autocorrect_candidates(const Top3Table& t3, const TokenVocab& tv);
std::vector<int> autocorrect_candidates(const Top3Table& t3, const SpellingIndex& index);

// Valid argmax string -> direct. Otherwise score only candidate rows of the
// token head over h and emit the argmax; no candidates -> the raw string.
DecodeOutcome autocorrect(std::span<const double> h, const CharLogits& cl, const HeadStack& stack,
                          const TokenVocab& tv, const SpellingIndex* index = nullptr);

struct DecodePolicy {
    bool autocorrect = true;
    bool fallback = true;
    double fallback_threshold = 0.22;  // mean per-head entropy, nats
};

// Fallback is checked first: mean head entropy above the threshold routes to
// the full token head. autocorrect_empty doubles as the plain raw-string path
// when AutoCorrect is off.
DecodeOutcome decode_with_fallback(std::span<const double> h, const CharLogits& cl,
                                   const HeadStack& stack, const TokenVocab& tv,
                                   const DecodePolicy& policy,
                                   const SpellingIndex* index = nullptr);

// The spelling the outcome stands for: the chosen token's spelling when one
// was picked, the raw argmax string otherwise.
SpelledString outcome_spelling(const DecodeOutcome& outcome, const TokenVocab& tv);

}  // namespace spellm
