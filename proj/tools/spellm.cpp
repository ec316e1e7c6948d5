// spellm: gen | train | eval | bench | analyze over a single JSON config,
// with flags overriding config fields.
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "spellm/pipeline.hpp"

namespace {

struct Overrides {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<bool> autocorrect;
    std::optional<double> fallback_threshold;
    std::optional<std::vector<int>> k_sweep;
    std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("--config", ov.config_path, "JSON config file")->required();
    cmd->add_option("--seed", [&ov](const CLI::results_t& r) {
        ov.seed = std::stoull(r[0]);
        return true;
    }, "Override the run seed");
    cmd->add_flag("--autocorrect,!--no-autocorrect", [&ov](int64_t count) {
        ov.autocorrect = count > 0;
    }, "Enable or disable AutoCorrect");
    cmd->add_option("--fallback-threshold", [&ov](const CLI::results_t& r) {
        ov.fallback_threshold = std::stod(r[0]);
        return true;
    }, "Entropy fallback threshold in nats (default 0.22)");
    cmd->add_option("--k-sweep", [&ov](const CLI::results_t& r) {
        std::vector<int> ks;
        std::string item;
        for (char c : r[0] + ",") {
            if (c == ',') {
                if (!item.empty()) ks.push_back(std::stoi(item));
                item.clear();
            } else {
                item.push_back(c);
            }
        }
        ov.k_sweep = ks;
        return true;
    }, "Comma-separated head counts, e.g. 5,10,15");
    cmd->add_option("--out", [&ov](const CLI::results_t& r) {
        ov.out = r[0];
        return true;
    }, "Output directory override");
}

spellm::RunConfig load_config(const Overrides& ov) {
    spellm::RunConfig cfg = spellm::RunConfig::from_json_file(ov.config_path);
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.autocorrect) cfg.policy.autocorrect = *ov.autocorrect;
    if (ov.fallback_threshold) cfg.policy.fallback_threshold = *ov.fallback_threshold;
    if (ov.k_sweep) cfg.k_sweep = *ov.k_sweep;
    if (ov.out) cfg.paths.out = *ov.out;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SpeLLM output-head toolkit: character-level decoding heads, "
                 "self-distillation, decoding policies, evaluation, and benchmarks"};
    app.require_subcommand(1);

    Overrides gen_ov, train_ov, eval_ov, bench_ov, analyze_ov;
    CLI::App* gen = app.add_subcommand("gen", "Generate a teacher trace (and vocab if needed)");
    add_common(gen, gen_ov);
    CLI::App* train = app.add_subcommand("train", "Distill heads from a trace");
    add_common(train, train_ov);
    CLI::App* eval = app.add_subcommand("eval", "Match-rate evaluation (or a k sweep)");
    add_common(eval, eval_ov);
    CLI::App* bench = app.add_subcommand("bench", "Output-head micro-benchmark");
    add_common(bench, bench_ov);
    CLI::App* analyze = app.add_subcommand("analyze", "Entropy/length/AutoCorrect analysis CSVs");
    add_common(analyze, analyze_ov);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            spellm::GenResult r = spellm::cmd_gen(load_config(gen_ov));
            std::printf("wrote %d records to %s (vocab %s)\n", r.n, r.trace_path.c_str(),
                        r.vocab_path.c_str());
        } else if (train->parsed()) {
            spellm::TrainResult r = spellm::cmd_train(load_config(train_ov));
            for (size_t e = 0; e < r.log.size(); ++e)
                std::printf("epoch %zu: char %.4f token %.4f total %.4f\n", e,
                            r.log[e].char_loss, r.log[e].token_loss, r.log[e].total);
            std::printf("checkpoint: %s\n", r.checkpoint_path.c_str());
        } else if (eval->parsed()) {
            spellm::EvalResult r = spellm::cmd_eval(load_config(eval_ov));
            if (!r.sweep_report_paths.empty()) {
                std::printf("sweep table: %s\n", r.table_path.c_str());
            } else {
                std::printf("exact %.2f%%  k-char %.2f%%  prefix %.2f%%  total %.2f%%\n",
                            r.report.pct_full_exact, r.report.pct_k_char, r.report.pct_prefix,
                            r.report.pct_total_match);
                std::printf("report: %s\n", r.report_path.c_str());
            }
        } else if (bench->parsed()) {
            spellm::BenchResult r = spellm::cmd_bench(load_config(bench_ov));
            std::fputs(r.table.c_str(), stdout);
            std::printf("report: %s\n", r.report_path.c_str());
        } else if (analyze->parsed()) {
            spellm::AnalyzeResult r = spellm::cmd_analyze(load_config(analyze_ov));
            std::printf("analysis bundle: %s\n", r.bundle_dir.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
