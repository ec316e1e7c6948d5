#include "spellm/distill.hpp"

#include <cmath>

namespace spellm {

std::pair<int, SpelledString> select_similar(const CharLogits& cl,
                                             std::span<const std::pair<int, double>> candidates,
                                             const TokenVocab& tv) {
    if (candidates.empty()) throw ContractError("select_similar: no candidates");
    SpelledString argmax = decode_argmax(cl);
    int best_id = -1;
    int best_matches = -1;
    double best_p = 0.0;
    for (const auto& [id, p] : candidates) {
        const SpelledString& spelling = tv.entry(id).spelling;
        int matches = 0;
        for (size_t i = 0; i < argmax.size(); ++i)
            if (spelling[i] == argmax[i]) ++matches;
        bool better = matches > best_matches ||
                      (matches == best_matches &&
                       (p > best_p || (p == best_p && id < best_id)));
        if (better) {
            best_id = id;
            best_matches = matches;
            best_p = p;
        }
    }
    return {best_id, tv.entry(best_id).spelling};
}

CharLossResult char_loss(const CharLogits& cl, const SpelledString& target) {
    if (target.size() != cl.per_head.size())
        throw ContractError("char_loss: target length != head count");
    CharLossResult res;
    res.grad.reserve(cl.per_head.size());
    for (size_t i = 0; i < cl.per_head.size(); ++i) {
        const std::vector<double>& logits = cl.per_head[i];
        std::vector<double> lsm = log_softmax(logits);
        res.loss -= lsm[target[i]];
        // grad = softmax(logits) - onehot(target)
        std::vector<double> g(logits.size());
        for (size_t c = 0; c < g.size(); ++c) g[c] = std::exp(lsm[c]);
        g[target[i]] -= 1.0;
        res.grad.push_back(std::move(g));
    }
    return res;
}

double char_loss_value(const CharLogits& cl, const SpelledString& target) {
    if (target.size() != cl.per_head.size())
        throw ContractError("char_loss_value: target length != head count");
    double loss = 0.0;
    for (size_t i = 0; i < cl.per_head.size(); ++i)
        loss -= log_softmax(cl.per_head[i])[target[i]];
    return loss;
}

TokenLossResult token_loss(std::span<const double> token_logits,
                           const std::array<std::pair<int, double>, 5>& top5,
                           bool renormalize, bool restricted) {
    double mass = 0.0;
    for (int i = 0; i < 5; ++i) {
        for (int j = i + 1; j < 5; ++j)
            if (top5[i].first == top5[j].first)
                throw ContractError("token_loss: duplicate token ids in top5");
        if (top5[i].first < 0 || top5[i].first >= int(token_logits.size()))
            throw ContractError("token_loss: token id out of range");
        mass += top5[i].second;
    }
    double scale = renormalize ? 1.0 / mass : 1.0;

    TokenLossResult res;
    res.grad.assign(token_logits.size(), 0.0);
    if (restricted) {
        // Softmax over the 5 candidate logits only.
        std::array<double, 5> logits;
        for (int i = 0; i < 5; ++i) logits[i] = token_logits[top5[i].first];
        std::vector<double> lsm = log_softmax(logits);
        double q_sum = 0.0;
        for (int i = 0; i < 5; ++i) {
            double q = top5[i].second * scale;
            res.loss -= q * lsm[i];
            q_sum += q;
        }
        for (int i = 0; i < 5; ++i)
            res.grad[top5[i].first] = q_sum * std::exp(lsm[i]) - top5[i].second * scale;
    } else {
        std::vector<double> lsm = log_softmax(token_logits);
        double q_sum = 0.0;
        for (int i = 0; i < 5; ++i) {
            double q = top5[i].second * scale;
            res.loss -= q * lsm[top5[i].first];
            q_sum += q;
        }
        // grad = (sum q) * softmax(logits) - q
        for (size_t t = 0; t < token_logits.size(); ++t) res.grad[t] = q_sum * std::exp(lsm[t]);
        for (int i = 0; i < 5; ++i) res.grad[top5[i].first] -= top5[i].second * scale;
    }
    return res;
}

namespace {

struct AdamTensor {
    std::vector<double> m, v;
    explicit AdamTensor(size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(std::span<double> w, std::span<const double> g, double lr, double wd,
              double bc1, double bc2) {
        for (size_t i = 0; i < w.size(); ++i) {
            m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
            v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            w[i] -= lr * (mhat / (std::sqrt(vhat) + kAdamEps) + wd * w[i]);
        }
    }
};

SpelledString pick_label(const CharLogits& cl, const TeacherTraceRecord& rec,
                         const TokenVocab& tv, LabelRule rule) {
    if (rule == LabelRule::similar_top3) {
        std::array<std::pair<int, double>, 3> top3 = {rec.top5[0], rec.top5[1], rec.top5[2]};
        return select_similar(cl, top3, tv).second;
    }
    // min_loss_top5: the spelling with the lowest char loss; top5 order breaks
    // ties toward the higher-probability candidate.
    int best = 0;
    double best_loss = 0.0;
    for (int i = 0; i < 5; ++i) {
        double loss = char_loss_value(cl, tv.entry(rec.top5[i].first).spelling);
        if (i == 0 || loss < best_loss) {
            best = i;
            best_loss = loss;
        }
    }
    return tv.entry(rec.top5[best].first).spelling;
}

}  // namespace

std::vector<LossBreakdown> train(HeadStack& stack, const std::vector<TeacherTraceRecord>& trace,
                                 const TokenVocab& tv, const TrainConfig& cfg) {
    if (trace.empty()) throw ContractError("train: empty trace");
    if (int(trace[0].hidden.size()) != stack.d)
        throw ContractError("train: trace hidden width != stack d");
    if (tv.k() != stack.k) throw ContractError("train: vocab k != stack k");
    if (tv.S() != stack.S) throw ContractError("train: vocab size != stack S");
    if (tv.charset().size() != stack.s) throw ContractError("train: charset size != stack s");
    if (cfg.learning_rate <= 0.0 && cfg.learning_rate != 0.0)
        throw ContractError("train: negative learning rate");
    if (cfg.batch_size < 1) throw ContractError("train: batch_size must be >= 1");

    const int n = int(trace.size());
    std::vector<DenseMatrix> g_char(stack.k);
    for (int i = 0; i < stack.k; ++i) g_char[i] = DenseMatrix(stack.s, stack.d);
    DenseMatrix g_token(stack.S, stack.d);
    std::vector<std::vector<double>> g_cbias;
    std::vector<double> g_tbias;
    if (stack.use_bias) {
        g_cbias.assign(stack.k, std::vector<double>(stack.s, 0.0));
        g_tbias.assign(stack.S, 0.0);
    }

    std::vector<AdamTensor> opt_char;
    for (int i = 0; i < stack.k; ++i) opt_char.emplace_back(stack.char_heads[i].data.size());
    AdamTensor opt_token(stack.token_head.data.size());
    std::vector<AdamTensor> opt_cbias;
    AdamTensor opt_tbias(stack.use_bias ? stack.S : 0);
    if (stack.use_bias)
        for (int i = 0; i < stack.k; ++i) opt_cbias.emplace_back(stack.s);

    SeededRng shuffle_rng = SeededRng(cfg.seed).child(0x7368756666ULL);
    std::vector<LossBreakdown> log;
    long adam_t = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<int> order = shuffled_indices(n, shuffle_rng);
        double epoch_char = 0.0, epoch_token = 0.0;

        for (int start = 0; start < n; start += cfg.batch_size) {
            int batch = std::min(cfg.batch_size, n - start);
            for (DenseMatrix& g : g_char) std::fill(g.data.begin(), g.data.end(), 0.0);
            std::fill(g_token.data.begin(), g_token.data.end(), 0.0);
            if (stack.use_bias) {
                for (auto& g : g_cbias) std::fill(g.begin(), g.end(), 0.0);
                std::fill(g_tbias.begin(), g_tbias.end(), 0.0);
            }
            double batch_char = 0.0, batch_token = 0.0;

            for (int b = 0; b < batch; ++b) {
                const TeacherTraceRecord& rec = trace[order[start + b]];
                const std::vector<double>& h = rec.hidden;
                CharLogits cl = forward_chars(stack, h);
                SpelledString label = pick_label(cl, rec, tv, cfg.label_rule);
                CharLossResult closs = char_loss(cl, label);
                std::vector<double> tok_logits = forward_token(stack, h);
                TokenLossResult tloss = token_loss(tok_logits, rec.top5,
                                                   cfg.renormalize_token_targets,
                                                   cfg.token_loss_restricted);
                batch_char += closs.loss;
                batch_token += tloss.loss;

                for (int i = 0; i < stack.k; ++i) {
                    DenseMatrix& g = g_char[i];
                    for (int c = 0; c < stack.s; ++c) {
                        double coeff = closs.grad[i][c];
                        double* grow = g.row(c);
                        for (int j = 0; j < stack.d; ++j) grow[j] += coeff * h[j];
                        if (stack.use_bias) g_cbias[i][c] += coeff;
                    }
                }
                for (int t = 0; t < stack.S; ++t) {
                    double coeff = tloss.grad[t];
                    if (coeff == 0.0) continue;
                    double* grow = g_token.row(t);
                    for (int j = 0; j < stack.d; ++j) grow[j] += coeff * h[j];
                    if (stack.use_bias) g_tbias[t] += coeff;
                }
            }

            double batch_total = batch_char + batch_token;
            if (!std::isfinite(batch_total))
                throw TrainingDivergedError("NaN loss at epoch " + std::to_string(epoch) +
                                            ", batch starting at record " + std::to_string(start));
            epoch_char += batch_char;
            epoch_token += batch_token;

            // Mean reduction over the batch.
            double inv = 1.0 / double(batch);
            for (DenseMatrix& g : g_char)
                for (double& x : g.data) x *= inv;
            for (double& x : g_token.data) x *= inv;
            if (stack.use_bias) {
                for (auto& g : g_cbias)
                    for (double& x : g) x *= inv;
                for (double& x : g_tbias) x *= inv;
            }

            ++adam_t;
            double bc1 = 1.0 - std::pow(kAdamBeta1, double(adam_t));
            double bc2 = 1.0 - std::pow(kAdamBeta2, double(adam_t));
            for (int i = 0; i < stack.k; ++i)
                opt_char[i].step(stack.char_heads[i].data, g_char[i].data, cfg.learning_rate,
                                 cfg.weight_decay, bc1, bc2);
            opt_token.step(stack.token_head.data, g_token.data, cfg.learning_rate,
                           cfg.weight_decay, bc1, bc2);
            if (stack.use_bias) {
                for (int i = 0; i < stack.k; ++i)
                    opt_cbias[i].step(stack.char_bias[i], g_cbias[i], cfg.learning_rate,
                                      cfg.weight_decay, bc1, bc2);
                opt_tbias.step(stack.token_bias, g_tbias, cfg.learning_rate, cfg.weight_decay,
                               bc1, bc2);
            }
        }

        LossBreakdown lb;
        lb.char_loss = epoch_char / double(n);
        lb.token_loss = epoch_token / double(n);
        lb.total = lb.char_loss + lb.token_loss;
        log.push_back(lb);
    }
    return log;
}

}  // namespace spellm
