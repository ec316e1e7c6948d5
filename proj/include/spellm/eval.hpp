// Intrinsic match classification against the teacher's top-5 and the
// aggregate report: match-rate table, length buckets, entropy bins, top-k
// preference, entropy correlation, and AutoCorrect usage statistics.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spellm/inference.hpp"
#include "spellm/teacher.hpp"

namespace spellm {

enum class MatchKind { full_exact, k_char, prefix, mismatch };

const char* to_string(MatchKind kind);

struct MatchVerdict {
    MatchKind kind = MatchKind::mismatch;
    std::optional<int> matched_token;
    std::optional<int> prefix_len;
};

// full_exact: pred equals the spelling of a top-5 token that fits in k chars.
// k_char: pred equals the first k characters of a top-5 token longer than k.
// prefix: pred is a nonempty proper prefix of a top-5 spelling, then only PAD.
// Among several qualifying tokens the highest-probability one is reported.
MatchVerdict classify_match(const SpelledString& pred,
                            const std::array<std::pair<int, double>, 5>& top5,
                            const TokenVocab& tv);

// The top-5 candidate with the fewest position-wise spelling mistakes against
// pred; ties break toward the higher teacher probability. Returns (id, mistakes)
// and the candidate's rank (1-based) via rank_out.
std::pair<int, int> nearest_token(const SpelledString& pred,
                                  const std::array<std::pair<int, double>, 5>& top5,
                                  const TokenVocab& tv, int* rank_out = nullptr);

inline constexpr int kEntropyBins = 8;

struct BinStat {
    double lo = 0.0, hi = 0.0;
    int count = 0;
    int matched = 0;   // verdict != mismatch
    int exact = 0;     // verdict == full_exact
};

struct LengthBucket {
    int length = 0;
    int count = 0;
    int matched = 0;
    int exact = 0;
};

struct RankHistogramBin {
    double lo = 0.0, hi = 0.0;   // teacher-entropy bin edges
    int count = 0;
    std::array<int, 5> rank_counts = {0, 0, 0, 0, 0};
};

struct AutoCorrectStats {
    int applicable = 0;          // records where the raw string was invalid
    double trigger_rate = 0.0;   // applicable / total
    double accuracy_direct = 0.0;     // match rate when the raw string was valid
    double accuracy_triggered = 0.0;  // match rate when correction was needed
    double candidate_median = 0.0;
    double candidate_top_half_pct_mean = 0.0;  // mean of the largest 0.5%
    double candidate_top_one_pct_mean = 0.0;   // mean of the largest 1%
    double zero_candidate_rate = 0.0;          // empty candidate sets / applicable
};

struct RecordOutcome {
    DecodePath path;
    MatchKind kind;
    double mean_entropy = 0.0;
    double teacher_entropy = 0.0;
    int rank = 0;  // nearest-token rank among top-5, 1-based
    int candidate_count = 0;
    int prefix_len = 0;       // set on prefix verdicts
    int matched_target_len = 0;  // matched token's full length, prefix verdicts
};

struct EvalReport {
    int total = 0;
    double pct_full_exact = 0.0;
    double pct_k_char = 0.0;
    double pct_prefix = 0.0;
    double pct_mismatch = 0.0;
    double pct_total_match = 0.0;  // exact + k_char + prefix

    double mean_prefix_len = 0.0;  // over prefix verdicts
    double mean_target_len = 0.0;  // matched token's full length, same records

    std::vector<LengthBucket> length_buckets;        // 1..k by nearest-token length
    std::vector<BinStat> entropy_bins;               // student mean entropy, 8 bins
    std::vector<RankHistogramBin> rank_by_teacher_entropy;  // 8 teacher-entropy bins
    std::optional<double> pearson_entropy;           // teacher vs student entropy
    std::string pearson_note;                        // set when undefined
    double mean_teacher_entropy = 0.0;               // renormalized top-5
    double mean_teacher_entropy_raw = 0.0;
    double fallback_rate = 0.0;
    AutoCorrectStats autocorrect;
};

// Decodes every record under the policy, classifies, and aggregates.
// Deterministic; per-record outcomes are optionally exposed for tests.
EvalReport run_eval(const HeadStack& stack, const std::vector<TeacherTraceRecord>& trace,
                    const TokenVocab& tv, const DecodePolicy& policy,
                    std::vector<RecordOutcome>* per_record = nullptr);

// Plain-text match-rate table; `with_ac` adds the AutoCorrect column.
std::string format_match_table(const EvalReport& plain, const EvalReport* with_ac, int k);

}  // namespace spellm
