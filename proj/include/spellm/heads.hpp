// The SpeLLM student: k character heads plus the auxiliary token head.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spellm/numcore.hpp"
#include "spellm/vocab.hpp"

namespace spellm {

struct HeadStack {
    int k = 0;  // character positions
    int s = 0;  // character alphabet size
    int S = 0;  // token vocabulary size
    int d = 0;  // hidden width
    bool use_bias = false;
    uint64_t seed = 0;
    std::vector<DenseMatrix> char_heads;       // k matrices, each s x d
    DenseMatrix token_head;                    // S x d
    std::vector<std::vector<double>> char_bias;  // k x s, present iff use_bias
    std::vector<double> token_bias;              // S, present iff use_bias

    // Fresh heads, uniform in [-0.1/sqrt(d), +0.1/sqrt(d)] (near-zero readout init).
    static HeadStack init(int k, int s, int S, int d, uint64_t seed, bool use_bias = false);
};

struct CharLogits {
    std::vector<std::vector<double>> per_head;  // k arrays of length s
};

CharLogits forward_chars(const HeadStack& stack, std::span<const double> h);
std::vector<double> forward_token(const HeadStack& stack, std::span<const double> h);

// Instrumented variants; every multiply-add lands in `macs`.
CharLogits forward_chars_counted(const HeadStack& stack, std::span<const double> h, uint64_t& macs);
std::vector<double> forward_token_counted(const HeadStack& stack, std::span<const double> h,
                                          uint64_t& macs);

// Per-head argmax, ties to the lowest index. Not forced PAD-suffix closed;
// the raw student may emit PAD mid-string and downstream policies handle it.
SpelledString decode_argmax(const CharLogits& cl);

struct HeadEntropies {
    std::vector<double> per_head;  // nats
    double mean = 0.0;
};

HeadEntropies head_entropies(const CharLogits& cl);

// spellm-ckpt-v1: JSON with shape header, charset, seed, and row-major weights
// rendered as round-trip-exact decimals.
void write_checkpoint(const std::string& path, const HeadStack& stack, const CharVocab& cv);
struct Checkpoint {
    HeadStack stack;
    CharVocab charset;
};
Checkpoint read_checkpoint(const std::string& path);

}  // namespace spellm
