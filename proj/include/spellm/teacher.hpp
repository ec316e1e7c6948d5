// Teacher traces: frozen hidden states plus the teacher's top-5 token
// predictions, generated synthetically or imported from external exports.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spellm/numcore.hpp"
#include "spellm/vocab.hpp"

namespace spellm {

struct TeacherTraceRecord {
    std::vector<double> hidden;                   // values are f32-exact
    std::array<std::pair<int, double>, 5> top5;   // (token_id, p), p descending

    // Validates, snaps hidden to f32 precision, sorts top5 by (p desc, id asc).
    static TeacherTraceRecord make(std::vector<double> hidden,
                                   std::array<std::pair<int, double>, 5> top5);
    bool operator==(const TeacherTraceRecord&) const = default;
};

enum class TeacherMode { separable, linear };

struct SyntheticTeacherSpec {
    TeacherMode mode = TeacherMode::separable;
    int d = 64;
    int S = 512;
    double noise_sigma = 0.05;
    uint64_t seed = 0;
};

// Separable mode guarantees: token embeddings are unit-norm with pairwise dot
// products <= kSeparationMaxDot, and noise_sigma must stay below
// kMaxSeparableNoise so the planted token dominates the teacher softmax.
// Embedding directions encode the first kSpellingComponents characters of
// each token so that spelling is linearly decodable from the hidden state.
inline constexpr double kSeparationMaxDot = 0.8;
inline constexpr double kMaxSeparableNoise = 0.25;
inline constexpr double kTeacherGain = 16.0;
inline constexpr int kSpellingComponents = 10;
// Stored hidden coordinates are scaled to this RMS magnitude.
inline constexpr double kHiddenCoordRms = 8.0;

// Deterministic in (spec, n, skip, vocab). The teacher (embeddings or weight
// matrix) depends only on spec.seed; record i draws from its own child
// stream, so [skip, skip+n) slices of one stream are reproducible and
// disjoint slices share the teacher. `planted_out`, when given, receives the
// target token of each record (separable mode; linear mode reports the
// teacher argmax).
std::vector<TeacherTraceRecord> gen_synthetic_trace(const SyntheticTeacherSpec& spec, int n,
                                                    const TokenVocab& tv,
                                                    std::vector<int>* planted_out = nullptr,
                                                    int skip = 0);

// spellm-trace-v1 JSON Lines. Header: {"format","d","vocab_sha256","count"}.
// Records: {"h":[...],"top5":[[id,p]x5]}.
void write_trace(const std::string& path, const std::vector<TeacherTraceRecord>& records,
                 int d, const std::string& vocab_sha256);
std::vector<TeacherTraceRecord> read_trace(const std::string& path,
                                           std::optional<std::string> expected_vocab_sha256 = {});
struct TraceHeader {
    int d = 0;
    std::string vocab_sha256;
    int count = 0;
};
TraceHeader read_trace_header(const std::string& path);

// Entropy of the top-5 probabilities renormalized to sum 1 (a true entropy in
// [0, ln 5]); the raw variant uses the stored mass as-is.
double teacher_entropy(const TeacherTraceRecord& rec);
double teacher_entropy_raw(const TeacherTraceRecord& rec);

}  // namespace spellm
