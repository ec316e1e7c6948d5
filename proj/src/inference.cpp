#include "spellm/inference.hpp"

#include <algorithm>

namespace spellm {

const char* to_string(DecodePath path) {
    switch (path) {
        case DecodePath::direct: return "direct";
        case DecodePath::autocorrect: return "autocorrect";
        case DecodePath::autocorrect_empty: return "autocorrect_empty";
        case DecodePath::fallback: return "fallback";
    }
    return "?";
}

Top3Table top3_table(const CharLogits& cl) {
    Top3Table t3;
    t3.sets.reserve(cl.per_head.size());
    for (const std::vector<double>& logits : cl.per_head) {
        int take = std::min<int>(3, int(logits.size()));
        // Selection by repeated max keeps the tie rule explicit: higher logit
        // first, lower index on equality.
        std::vector<int> set;
        set.reserve(take);
        std::vector<bool> used(logits.size(), false);
        for (int pick = 0; pick < take; ++pick) {
            int best = -1;
            for (int i = 0; i < int(logits.size()); ++i) {
                if (used[i]) continue;
                if (best < 0 || logits[i] > logits[best]) best = i;
            }
            used[best] = true;
            set.push_back(best);
        }
        std::sort(set.begin(), set.end());
        t3.sets.push_back(std::move(set));
    }
    return t3;
}

SpellingIndex::SpellingIndex(const TokenVocab& tv)
    : k_(tv.k()), s_(tv.charset().size()), S_(tv.S()), words_((tv.S() + 63) / 64),
      masks_(size_t(k_) * s_ * words_, 0) {
    for (const TokenEntry& e : tv.entries())
        for (int pos = 0; pos < k_; ++pos) {
            size_t base = (size_t(pos) * s_ + e.spelling[pos]) * words_;
            masks_[base + e.id / 64] |= uint64_t(1) << (e.id % 64);
        }
}

std::vector<int> SpellingIndex::candidates(const Top3Table& t3) const {
    if (int(t3.sets.size()) != k_) throw ContractError("SpellingIndex: table k mismatch");
    std::vector<uint64_t> acc(words_, ~uint64_t(0));
    std::vector<uint64_t> pos_union(words_);
    for (int pos = 0; pos < k_; ++pos) {
        std::fill(pos_union.begin(), pos_union.end(), 0);
        for (int c : t3.sets[pos]) {
            const uint64_t* mask = masks_.data() + (size_t(pos) * s_ + c) * words_;
            for (int w = 0; w < words_; ++w) pos_union[w] |= mask[w];
        }
        for (int w = 0; w < words_; ++w) acc[w] &= pos_union[w];
    }
    std::vector<int> out;
    for (int w = 0; w < words_; ++w) {
        uint64_t bits = acc[w];
        while (bits) {
            int bit = __builtin_ctzll(bits);
            int id = w * 64 + bit;
            if (id < S_) out.push_back(id);
            bits &= bits - 1;
        }
    }
    return out;
}

std::vector<int> autocorrect_candidates(const Top3Table& t3, const SpellingIndex& index) {
    return index.candidates(t3);
}

std::vector<int> autocorrect_candidates(const Top3Table& t3, const TokenVocab& tv) {
    return SpellingIndex(tv).candidates(t3);
}

namespace {

// Argmax of token-head scores restricted to `ids`; ties to the lowest id
// (ids arrive ascending).
int best_restricted(std::span<const double> h, const HeadStack& stack, std::span<const int> ids) {
    int best = ids[0];
    double best_score = 0.0;
    bool first = true;
    for (int id : ids) {
        const double* row = stack.token_head.row(id);
        double score = 0.0;
        for (int j = 0; j < stack.d; ++j) score += row[j] * h[j];
        if (stack.use_bias) score += stack.token_bias[id];
        if (first || score > best_score) {
            best = id;
            best_score = score;
            first = false;
        }
    }
    return best;
}

}  // namespace

DecodeOutcome autocorrect(std::span<const double> h, const CharLogits& cl, const HeadStack& stack,
                          const TokenVocab& tv, const SpellingIndex* index) {
    DecodeOutcome out;
    out.raw = decode_argmax(cl);
    out.mean_entropy = head_entropies(cl).mean;
    auto [valid, ids] = is_valid_token(out.raw, tv);
    if (valid) {
        out.path = DecodePath::direct;
        out.token_id = ids.size() == 1 ? ids[0] : best_restricted(h, stack, ids);
        out.text = unspell(out.raw, tv.charset());
        return out;
    }
    Top3Table t3 = top3_table(cl);
    std::vector<int> cands = index ? index->candidates(t3) : autocorrect_candidates(t3, tv);
    if (cands.empty()) {
        out.path = DecodePath::autocorrect_empty;
        out.text = unspell(out.raw, tv.charset());
        return out;
    }
    out.path = DecodePath::autocorrect;
    out.candidate_count = int(cands.size());
    out.token_id = best_restricted(h, stack, cands);
    out.text = tv.entry(*out.token_id).raw;
    return out;
}

DecodeOutcome decode_with_fallback(std::span<const double> h, const CharLogits& cl,
                                   const HeadStack& stack, const TokenVocab& tv,
                                   const DecodePolicy& policy, const SpellingIndex* index) {
    if (policy.fallback_threshold < 0.0)
        throw ContractError("decode_with_fallback: negative threshold");
    if (policy.fallback) {
        double mean_entropy = head_entropies(cl).mean;
        if (mean_entropy > policy.fallback_threshold) {
            DecodeOutcome out;
            out.raw = decode_argmax(cl);
            out.mean_entropy = mean_entropy;
            out.path = DecodePath::fallback;
            std::vector<double> logits = forward_token(stack, h);
            int best = 0;
            for (int t = 1; t < stack.S; ++t)
                if (logits[t] > logits[best]) best = t;
            out.token_id = best;
            out.text = tv.entry(best).raw;
            return out;
        }
    }
    if (policy.autocorrect) return autocorrect(h, cl, stack, tv, index);

    // Plain decode: emit the raw string, flagging validity via the path.
    DecodeOutcome out;
    out.raw = decode_argmax(cl);
    out.mean_entropy = head_entropies(cl).mean;
    auto [valid, ids] = is_valid_token(out.raw, tv);
    if (valid) {
        out.path = DecodePath::direct;
        out.token_id = ids.size() == 1 ? ids[0] : best_restricted(h, stack, ids);
    } else {
        out.path = DecodePath::autocorrect_empty;
    }
    out.text = unspell(out.raw, tv.charset());
    return out;
}

SpelledString outcome_spelling(const DecodeOutcome& outcome, const TokenVocab& tv) {
    if (outcome.token_id) return tv.entry(*outcome.token_id).spelling;
    return outcome.raw;
}

}  // namespace spellm
