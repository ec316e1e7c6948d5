// Self-distillation: label selection, the combined char+token loss with
// analytic gradients, and the AdamW loop that updates only the HeadStack.
#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "spellm/heads.hpp"
#include "spellm/teacher.hpp"

namespace spellm {

enum class LabelRule { similar_top3, min_loss_top5 };

struct TrainConfig {
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    int batch_size = 16;
    int epochs = 3;
    LabelRule label_rule = LabelRule::similar_top3;
    uint64_t seed = 0;
    // Ablation switches; defaults follow the soft target exactly as stored.
    bool renormalize_token_targets = false;
    bool token_loss_restricted = false;  // score only the 5 candidate logits
};

// AdamW moments; weight decay is decoupled and scaled by the learning rate.
inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

struct LossBreakdown {
    double char_loss = 0.0;
    double token_loss = 0.0;
    double total = 0.0;  // always char_loss + token_loss
};

// The candidate whose spelling shares the most position-wise matches with
// decode_argmax(cl); ties by higher probability, then lower token id.
// Candidates are (token_id, probability) pairs; any order.
std::pair<int, SpelledString> select_similar(const CharLogits& cl,
                                             std::span<const std::pair<int, double>> candidates,
                                             const TokenVocab& tv);

struct CharLossResult {
    double loss = 0.0;
    std::vector<std::vector<double>> grad;  // d loss / d char logits, k x s
};

// Sum over heads of hard-label cross entropy against the target spelling.
// PAD positions train as ordinary labels.
CharLossResult char_loss(const CharLogits& cl, const SpelledString& target);
double char_loss_value(const CharLogits& cl, const SpelledString& target);

struct TokenLossResult {
    double loss = 0.0;
    std::vector<double> grad;  // d loss / d token logits, length S
};

// Cross entropy against the sparse top-5 soft target, used unnormalized
// unless cfg asks otherwise. Throws ContractError on duplicate ids.
TokenLossResult token_loss(std::span<const double> token_logits,
                           const std::array<std::pair<int, double>, 5>& top5,
                           bool renormalize = false, bool restricted = false);

// AdamW over char heads + token head only. Deterministic given cfg.seed:
// per-epoch shuffles and accumulation order are fixed. Returns one
// LossBreakdown per epoch (means over records).
std::vector<LossBreakdown> train(HeadStack& stack, const std::vector<TeacherTraceRecord>& trace,
                                 const TokenVocab& tv, const TrainConfig& cfg);

}  // namespace spellm
