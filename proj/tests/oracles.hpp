// Independent reference implementations used only by tests. Everything here
// is written definition-first (plain loops, full sorts, exhaustive scans) and
// must stay decoupled from the library's code paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "spellm/heads.hpp"
#include "spellm/teacher.hpp"
#include "spellm/vocab.hpp"

namespace oracle {

// Triple-checked dot products: plain accumulation in declaration order.
inline std::vector<double> naive_matvec(const spellm::DenseMatrix& m,
                                        const std::vector<double>& v) {
    std::vector<double> out(m.rows, 0.0);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c) out[r] += m.at(r, c) * v[c];
    return out;
}

// Direct formula, no shared helpers.
inline double direct_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    double n = double(x.size());
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
        sxy += x[i] * y[i];
    }
    double cov = sxy / n - (sx / n) * (sy / n);
    double vx = sxx / n - (sx / n) * (sx / n);
    double vy = syy / n - (sy / n) * (sy / n);
    return cov / std::sqrt(vx * vy);
}

inline double direct_entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

// Linear scan argmax per head, first maximum wins.
inline spellm::SpelledString scan_argmax(const spellm::CharLogits& cl) {
    spellm::SpelledString out;
    for (const auto& logits : cl.per_head) {
        int best = 0;
        for (size_t i = 0; i < logits.size(); ++i)
            if (logits[i] > logits[best]) best = int(i);
        out.push_back(best);
    }
    return out;
}

// Full sort per head, logit descending / index ascending, take three.
inline std::vector<std::vector<int>> sorted_top3(const spellm::CharLogits& cl) {
    std::vector<std::vector<int>> sets;
    for (const auto& logits : cl.per_head) {
        std::vector<int> idx(logits.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = int(i);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
            if (logits[a] != logits[b]) return logits[a] > logits[b];
            return a < b;
        });
        idx.resize(std::min<size_t>(3, idx.size()));
        std::sort(idx.begin(), idx.end());
        sets.push_back(idx);
    }
    return sets;
}

// Exhaustive per-token per-position filter.
inline std::vector<int> brute_candidates(const std::vector<std::vector<int>>& top3_sets,
                                         const spellm::TokenVocab& tv) {
    std::vector<int> out;
    for (const spellm::TokenEntry& e : tv.entries()) {
        bool ok = true;
        for (int pos = 0; pos < tv.k() && ok; ++pos) {
            const std::vector<int>& set = top3_sets[pos];
            ok = std::find(set.begin(), set.end(), e.spelling[pos]) != set.end();
        }
        if (ok) out.push_back(e.id);
    }
    return out;
}

// Exhaustive similar-candidate selection with explicit tie rules.
inline int brute_select_similar(const spellm::SpelledString& argmax,
                                const std::vector<std::pair<int, double>>& candidates,
                                const spellm::TokenVocab& tv) {
    int best = -1;
    int best_matches = -1;
    double best_p = -1.0;
    for (const auto& [id, p] : candidates) {
        int matches = 0;
        for (size_t i = 0; i < argmax.size(); ++i)
            if (tv.entry(id).spelling[i] == argmax[i]) ++matches;
        if (matches > best_matches || (matches == best_matches && p > best_p) ||
            (matches == best_matches && p == best_p && id < best))
            best = id, best_matches = matches, best_p = p;
    }
    return best;
}

// Exhaustive nearest-token selection (fewest mistakes, probability tie-break).
inline std::pair<int, int> brute_nearest(const spellm::SpelledString& pred,
                                         const std::array<std::pair<int, double>, 5>& top5,
                                         const spellm::TokenVocab& tv) {
    int best = -1, best_mistakes = 1 << 20;
    double best_p = -1.0;
    for (const auto& [id, p] : top5) {
        int mistakes = 0;
        for (int i = 0; i < tv.k(); ++i)
            if (tv.entry(id).spelling[i] != pred[i]) ++mistakes;
        if (mistakes < best_mistakes || (mistakes == best_mistakes && p > best_p)) {
            best = id;
            best_mistakes = mistakes;
            best_p = p;
        }
    }
    return {best, best_mistakes};
}

// Central finite differences of f at x, step h.
template <typename F>
inline double central_diff(F f, double& x, double h) {
    double saved = x;
    x = saved + h;
    double up = f();
    x = saved - h;
    double down = f();
    x = saved;
    return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

}  // namespace oracle
