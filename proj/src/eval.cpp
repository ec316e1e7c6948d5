#include "spellm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace spellm {

const char* to_string(MatchKind kind) {
    switch (kind) {
        case MatchKind::full_exact: return "full_exact";
        case MatchKind::k_char: return "k_char";
        case MatchKind::prefix: return "prefix";
        case MatchKind::mismatch: return "mismatch";
    }
    return "?";
}

MatchVerdict classify_match(const SpelledString& pred,
                            const std::array<std::pair<int, double>, 5>& top5,
                            const TokenVocab& tv) {
    const int k = tv.k();
    if (int(pred.size()) != k) throw ContractError("classify_match: pred length != k");

    // top5 is probability-descending, so the first qualifying candidate is the
    // highest-probability one.
    for (const auto& [id, p] : top5) {
        const TokenEntry& e = tv.entry(id);
        if (e.norm_len <= k && pred == e.spelling)
            return {MatchKind::full_exact, id, std::nullopt};
    }
    for (const auto& [id, p] : top5) {
        const TokenEntry& e = tv.entry(id);
        if (e.norm_len > k && pred == e.spelling)  // truncated spelling fills all k
            return {MatchKind::k_char, id, std::nullopt};
    }
    // Prefix: nonempty run of non-PAD chars, then only PAD.
    int run = 0;
    while (run < k && pred[run] != kPadIndex) ++run;
    bool pad_closed = true;
    for (int i = run; i < k; ++i)
        if (pred[i] != kPadIndex) pad_closed = false;
    if (run >= 1 && pad_closed) {
        for (const auto& [id, p] : top5) {
            const TokenEntry& e = tv.entry(id);
            int spelled = std::min(e.norm_len, k);
            if (run >= spelled) continue;  // proper prefix only
            bool match = true;
            for (int i = 0; i < run; ++i)
                if (pred[i] != e.spelling[i]) {
                    match = false;
                    break;
                }
            if (match) return {MatchKind::prefix, id, run};
        }
    }
    return {MatchKind::mismatch, std::nullopt, std::nullopt};
}

std::pair<int, int> nearest_token(const SpelledString& pred,
                                  const std::array<std::pair<int, double>, 5>& top5,
                                  const TokenVocab& tv, int* rank_out) {
    if (int(pred.size()) != tv.k()) throw ContractError("nearest_token: pred length != k");
    int best_rank = 0;
    int best_mistakes = tv.k() + 1;
    for (int r = 0; r < 5; ++r) {
        const SpelledString& spelling = tv.entry(top5[r].first).spelling;
        int mistakes = 0;
        for (int i = 0; i < tv.k(); ++i)
            if (spelling[i] != pred[i]) ++mistakes;
        if (mistakes < best_mistakes) {  // ties keep the earlier = higher-p entry
            best_mistakes = mistakes;
            best_rank = r;
        }
    }
    if (rank_out) *rank_out = best_rank + 1;
    return {top5[best_rank].first, best_mistakes};
}

namespace {

void fill_bins(std::vector<BinStat>& bins, double max_value) {
    double hi = max_value > 0.0 ? max_value : 1e-12;
    bins.resize(kEntropyBins);
    for (int b = 0; b < kEntropyBins; ++b) {
        bins[b].lo = hi * b / kEntropyBins;
        bins[b].hi = hi * (b + 1) / kEntropyBins;
    }
}

int bin_of(double v, double max_value) {
    double hi = max_value > 0.0 ? max_value : 1e-12;
    int b = int(std::floor(v / hi * kEntropyBins));
    return std::clamp(b, 0, kEntropyBins - 1);
}

double percentile_tail_mean(const std::vector<int>& sorted_desc, double fraction) {
    if (sorted_desc.empty()) return 0.0;
    int take = std::max<int>(1, int(std::ceil(fraction * sorted_desc.size())));
    double sum = 0.0;
    for (int i = 0; i < take; ++i) sum += sorted_desc[i];
    return sum / take;
}

}  // namespace

EvalReport run_eval(const HeadStack& stack, const std::vector<TeacherTraceRecord>& trace,
                    const TokenVocab& tv, const DecodePolicy& policy,
                    std::vector<RecordOutcome>* per_record) {
    if (trace.empty()) throw ContractError("run_eval: empty trace");
    if (int(trace[0].hidden.size()) != stack.d) throw ContractError("run_eval: hidden width mismatch");
    if (tv.k() != stack.k || tv.S() != stack.S || tv.charset().size() != stack.s)
        throw ContractError("run_eval: vocab does not match stack");

    const int n = int(trace.size());
    SpellingIndex index(tv);
    std::vector<RecordOutcome> outcomes(n);

    parallel_for(n, [&](int i) {
        const TeacherTraceRecord& rec = trace[i];
        CharLogits cl = forward_chars(stack, rec.hidden);
        DecodeOutcome decoded = decode_with_fallback(rec.hidden, cl, stack, tv, policy, &index);
        SpelledString final = outcome_spelling(decoded, tv);
        MatchVerdict verdict = classify_match(final, rec.top5, tv);
        RecordOutcome& out = outcomes[i];
        out.path = decoded.path;
        out.kind = verdict.kind;
        out.mean_entropy = decoded.mean_entropy;
        out.teacher_entropy = teacher_entropy(rec);
        out.candidate_count = decoded.candidate_count;
        nearest_token(final, rec.top5, tv, &out.rank);
        if (verdict.kind == MatchKind::prefix) {
            out.prefix_len = *verdict.prefix_len;
            out.matched_target_len = tv.entry(*verdict.matched_token).norm_len;
        }
    });

    EvalReport rep;
    rep.total = n;
    int counts[4] = {0, 0, 0, 0};
    double max_student_entropy = 0.0, max_teacher_entropy = 0.0;
    for (const RecordOutcome& o : outcomes) {
        ++counts[int(o.kind)];
        max_student_entropy = std::max(max_student_entropy, o.mean_entropy);
        max_teacher_entropy = std::max(max_teacher_entropy, o.teacher_entropy);
    }
    rep.pct_full_exact = 100.0 * counts[int(MatchKind::full_exact)] / n;
    rep.pct_k_char = 100.0 * counts[int(MatchKind::k_char)] / n;
    rep.pct_prefix = 100.0 * counts[int(MatchKind::prefix)] / n;
    rep.pct_mismatch = 100.0 * counts[int(MatchKind::mismatch)] / n;
    rep.pct_total_match = rep.pct_full_exact + rep.pct_k_char + rep.pct_prefix;

    double prefix_len_sum = 0.0, target_len_sum = 0.0;
    int prefix_count = 0;
    for (const RecordOutcome& o : outcomes) {
        if (o.kind != MatchKind::prefix) continue;
        prefix_len_sum += o.prefix_len;
        target_len_sum += o.matched_target_len;
        ++prefix_count;
    }
    rep.mean_prefix_len = prefix_count ? prefix_len_sum / prefix_count : 0.0;
    rep.mean_target_len = prefix_count ? target_len_sum / prefix_count : 0.0;

    // Length buckets 1..k over the nearest token's spelled length.
    rep.length_buckets.resize(tv.k());
    for (int b = 0; b < tv.k(); ++b) rep.length_buckets[b].length = b + 1;
    for (int i = 0; i < n; ++i) {
        const RecordOutcome& o = outcomes[i];
        int nearest_id = trace[i].top5[o.rank - 1].first;
        int len = std::clamp(std::min(tv.entry(nearest_id).norm_len, tv.k()), 1, tv.k());
        LengthBucket& lb = rep.length_buckets[len - 1];
        ++lb.count;
        if (o.kind != MatchKind::mismatch) ++lb.matched;
        if (o.kind == MatchKind::full_exact) ++lb.exact;
    }

    fill_bins(rep.entropy_bins, max_student_entropy);
    for (const RecordOutcome& o : outcomes) {
        BinStat& bin = rep.entropy_bins[bin_of(o.mean_entropy, max_student_entropy)];
        ++bin.count;
        if (o.kind != MatchKind::mismatch) ++bin.matched;
        if (o.kind == MatchKind::full_exact) ++bin.exact;
    }

    rep.rank_by_teacher_entropy.resize(kEntropyBins);
    double teacher_hi = max_teacher_entropy > 0.0 ? max_teacher_entropy : 1e-12;
    for (int b = 0; b < kEntropyBins; ++b) {
        rep.rank_by_teacher_entropy[b].lo = teacher_hi * b / kEntropyBins;
        rep.rank_by_teacher_entropy[b].hi = teacher_hi * (b + 1) / kEntropyBins;
    }
    for (const RecordOutcome& o : outcomes) {
        RankHistogramBin& bin =
            rep.rank_by_teacher_entropy[bin_of(o.teacher_entropy, max_teacher_entropy)];
        ++bin.count;
        ++bin.rank_counts[o.rank - 1];
    }

    double teacher_sum = 0.0, teacher_raw_sum = 0.0;
    std::vector<double> teacher_series(n), student_series(n);
    int fallbacks = 0;
    for (int i = 0; i < n; ++i) {
        teacher_series[i] = outcomes[i].teacher_entropy;
        student_series[i] = outcomes[i].mean_entropy;
        teacher_sum += outcomes[i].teacher_entropy;
        teacher_raw_sum += teacher_entropy_raw(trace[i]);
        if (outcomes[i].path == DecodePath::fallback) ++fallbacks;
    }
    rep.mean_teacher_entropy = teacher_sum / n;
    rep.mean_teacher_entropy_raw = teacher_raw_sum / n;
    rep.fallback_rate = double(fallbacks) / n;
    try {
        rep.pearson_entropy = pearson(teacher_series, student_series);
    } catch (const UndefinedCorrelationError& e) {
        rep.pearson_note = e.what();
    } catch (const ContractError& e) {
        rep.pearson_note = e.what();
    }

    // AutoCorrect usage: applicable when the raw string was not a valid token.
    AutoCorrectStats& ac = rep.autocorrect;
    std::vector<int> candidate_counts;
    int valid_total = 0, valid_matched = 0, triggered_matched = 0, empty_sets = 0;
    for (const RecordOutcome& o : outcomes) {
        switch (o.path) {
            case DecodePath::direct:
                ++valid_total;
                if (o.kind != MatchKind::mismatch) ++valid_matched;
                break;
            case DecodePath::autocorrect:
            case DecodePath::autocorrect_empty:
                ++ac.applicable;
                if (o.kind != MatchKind::mismatch) ++triggered_matched;
                if (o.path == DecodePath::autocorrect_empty)
                    ++empty_sets;
                else
                    candidate_counts.push_back(o.candidate_count);
                break;
            case DecodePath::fallback:
                break;
        }
    }
    ac.trigger_rate = double(ac.applicable) / n;
    ac.accuracy_direct = valid_total ? double(valid_matched) / valid_total : 0.0;
    ac.accuracy_triggered = ac.applicable ? double(triggered_matched) / ac.applicable : 0.0;
    ac.zero_candidate_rate = ac.applicable ? double(empty_sets) / ac.applicable : 0.0;
    if (!candidate_counts.empty()) {
        std::sort(candidate_counts.begin(), candidate_counts.end(), std::greater<>());
        size_t m = candidate_counts.size();
        ac.candidate_median = (m % 2) ? candidate_counts[m / 2]
                                      : 0.5 * (candidate_counts[m / 2 - 1] + candidate_counts[m / 2]);
        ac.candidate_top_half_pct_mean = percentile_tail_mean(candidate_counts, 0.005);
        ac.candidate_top_one_pct_mean = percentile_tail_mean(candidate_counts, 0.01);
    }

    if (per_record) *per_record = std::move(outcomes);
    return rep;
}

std::string format_match_table(const EvalReport& plain, const EvalReport* with_ac, int k) {
    std::ostringstream os;
    char line[160];
    auto row = [&](const char* label, double a, const double* b) {
        if (b)
            std::snprintf(line, sizeof(line), "%-22s %10.2f %12.2f\n", label, a, *b);
        else
            std::snprintf(line, sizeof(line), "%-22s %10.2f\n", label, a);
        os << line;
    };
    std::string kc = std::to_string(k) + "-character match";
    if (with_ac)
        std::snprintf(line, sizeof(line), "%-22s %10s %12s\n", "Match Type", "SpeLLM", "+AutoCorrect");
    else
        std::snprintf(line, sizeof(line), "%-22s %10s\n", "Match Type", "SpeLLM");
    os << line;
    row("Full exact match", plain.pct_full_exact, with_ac ? &with_ac->pct_full_exact : nullptr);
    row(kc.c_str(), plain.pct_k_char, with_ac ? &with_ac->pct_k_char : nullptr);
    row("Match for prefix", plain.pct_prefix, with_ac ? &with_ac->pct_prefix : nullptr);
    row("Total", plain.pct_total_match, with_ac ? &with_ac->pct_total_match : nullptr);
    return os.str();
}

}  // namespace spellm
