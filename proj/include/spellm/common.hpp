// Shared error types, float formatting, and the worker-pool helper.
#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spellm {

// Precondition / dimension violations on in-memory calls.
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Pearson over a constant series has no defined value.
struct UndefinedCorrelationError : std::domain_error {
    using std::domain_error::domain_error;
};

// File-level failures, each a distinct type so callers can tell them apart.
struct FormatVersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VocabHashMismatchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TruncatedFileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
    int line;
    ParseError(const std::string& msg, int line_no)
        : std::runtime_error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Loss went NaN; training aborts with the offending epoch/batch in the message.
struct TrainingDivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Round-trip-exact decimal rendering. Doubles get 17 significant digits,
// f32-valued doubles get 9 (enough to recover the float exactly).
std::string format_f64(double v);
std::string format_f32(double v);

// Worker count: min(hardware, SPELLM_THREADS). At least 1.
int worker_count();

// Splits [0, n) into contiguous chunks across worker_count() threads.
// fn(i) must be pure per index; results land in caller-owned slots, so the
// outcome is identical for any thread count.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace spellm
