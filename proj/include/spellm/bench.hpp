// Output-head micro-benchmarks: k small character heads vs one S-way token
// head, in isolation and behind a configurable dummy backbone.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace spellm {

struct BenchConfig {
    int d = 1024;
    int S = 100000;
    int s = 97;
    int k = 10;
    int n_samples = 100;   // >= 100 for reported medians
    int warmup = 10;       // >= 10, excluded from stats
    int backbone_layers = 0;  // 0 = head-only
    int repeat = 1;
    uint64_t seed = 7;
    bool use_f32 = true;   // measurement dtype; counting mode is dtype-free
};

struct VariantStats {
    double median_ns = 0.0;
    double mean_ns = 0.0;
    double p95_ns = 0.0;
};

struct BenchReport {
    BenchConfig cfg;
    VariantStats token_head;   // per-sample (head-only) or per-token (end-to-end)
    VariantStats spellm_head;
    uint64_t flops_token = 0;    // analytic multiply-adds per position
    uint64_t flops_spellm = 0;
    uint64_t counted_token = 0;  // instrumented tallies, must equal analytic
    uint64_t counted_spellm = 0;
    double speedup_ratio = 0.0;  // token median / spellm median
    // End-to-end extras (backbone_layers > 0):
    uint64_t flops_backbone = 0;
    double head_share_token = 0.0;      // token head / total FLOPs
    double predicted_speedup = 0.0;     // FLOP-model ratio
    double measured_speedup = 0.0;      // per-token median ratio
    // One median per repeat, for stability checks.
    std::vector<double> repeat_medians_token;
    std::vector<double> repeat_medians_spellm;
};

// Times per-sample head application (matvec + softmax + argmax) over
// pre-generated hidden states; generation is outside the timed region.
BenchReport bench_head_only(const BenchConfig& cfg);

// Per-token latency: dummy backbone (backbone_layers blocks of d->4d->d with
// an elementwise activation) plus either head variant.
BenchReport bench_end_to_end(const BenchConfig& cfg);

std::string format_bench_table(const BenchReport& rep);

}  // namespace spellm
