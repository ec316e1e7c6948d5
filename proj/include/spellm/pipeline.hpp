// Command implementations behind the CLI: config parsing with flag overrides,
// artifact persistence, and the gen -> train -> eval -> analyze -> bench flow.
// Every command is deterministic given its config; wall-clock data lives only
// in the *_meta.json sidecars.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spellm/bench.hpp"
#include "spellm/distill.hpp"
#include "spellm/eval.hpp"

namespace spellm {

struct PathsConfig {
    std::string vocab;
    std::string trace;
    std::string eval_trace;
    std::string checkpoint;
    std::string out = ".";
};

struct VocabSpecConfig {
    bool present = false;
    int S = 512;
    uint64_t seed = 7;
    int min_len = 1;
    int max_len = 8;
};

struct TeacherCliConfig {
    TeacherMode mode = TeacherMode::separable;
    int d = 64;
    double noise_sigma = 0.05;
    std::optional<uint64_t> seed;  // defaults to the run seed
};

struct RunConfig {
    uint64_t seed = 42;
    int k = 10;
    std::optional<std::vector<std::string>> charset;  // serialized; default Latin set
    PathsConfig paths;
    VocabSpecConfig vocab_spec;
    TeacherCliConfig teacher;
    int gen_n = 1000;
    int gen_skip = 0;
    TrainConfig train;
    bool train_seed_set = false;
    bool use_bias = false;
    DecodePolicy policy;
    BenchConfig bench;
    std::vector<int> k_sweep;

    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_json_file(const std::string& path);
    std::string to_json_text() const;  // effective config, echoed into bundles

    CharVocab make_charset() const;
};

// Held while a command writes into its out directory; a second concurrent
// invocation on the same directory fails instead of interleaving writes.
class DirLock {
public:
    explicit DirLock(const std::string& out_dir);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::string path_;
};

struct GenResult {
    std::string vocab_path;
    std::string trace_path;
    int n = 0;
};
GenResult cmd_gen(const RunConfig& cfg);

struct TrainResult {
    std::string checkpoint_path;
    std::string log_path;
    std::vector<LossBreakdown> log;
};
TrainResult cmd_train(const RunConfig& cfg);

struct EvalResult {
    EvalReport report;
    std::string report_path;
    std::string table_path;
    std::vector<std::string> sweep_report_paths;  // k-sweep runs only
};
EvalResult cmd_eval(const RunConfig& cfg);

struct AnalyzeResult {
    EvalReport report;
    std::string bundle_dir;
};
AnalyzeResult cmd_analyze(const RunConfig& cfg);

struct BenchResult {
    BenchReport report;
    std::string report_path;
    std::string table;
};
BenchResult cmd_bench(const RunConfig& cfg);

}  // namespace spellm
