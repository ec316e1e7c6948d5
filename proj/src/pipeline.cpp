#include "spellm/pipeline.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "spellm/sha256.hpp"

namespace spellm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config: " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what(), 1);
    }
}

LabelRule parse_label_rule(const std::string& s) {
    if (s == "similar_top3") return LabelRule::similar_top3;
    if (s == "min_loss_top5") return LabelRule::min_loss_top5;
    throw ContractError("config: unknown label_rule '" + s + "'");
}

TeacherMode parse_mode(const std::string& s) {
    if (s == "separable") return TeacherMode::separable;
    if (s == "linear") return TeacherMode::linear;
    throw ContractError("config: unknown teacher mode '" + s + "'");
}

void write_text_file(const std::string& path, const std::string& text) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

// Deterministic artifacts never carry wall-clock data; it all lands here.
void write_meta_sidecar(const std::string& out_dir, const std::string& command, double wall_ms,
                        const json& extra = json::object()) {
    json meta = extra;
    meta["command"] = command;
    meta["wall_ms"] = wall_ms;
    meta["written_unix_ms"] = double(std::chrono::duration_cast<std::chrono::milliseconds>(
                                         std::chrono::system_clock::now().time_since_epoch())
                                         .count());
    write_text_file(out_dir + "/" + command + "_meta.json", meta.dump(2) + "\n");
}

void echo_config(const RunConfig& cfg, const std::string& command) {
    write_text_file(cfg.paths.out + "/" + command + "_config.json", cfg.to_json_text());
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

TokenVocab load_vocab(const RunConfig& cfg, std::optional<int> k_override = std::nullopt) {
    if (cfg.paths.vocab.empty()) throw IoError("config: paths.vocab is required");
    if (!fs::exists(cfg.paths.vocab)) throw IoError("missing vocab file: " + cfg.paths.vocab);
    return read_vocab_file(cfg.paths.vocab, k_override);
}

HeadStack train_stack(const RunConfig& cfg, const TokenVocab& tv,
                      const std::vector<TeacherTraceRecord>& records,
                      std::vector<LossBreakdown>* log_out) {
    if (records.empty()) throw ContractError("train: trace has no records");
    int d = int(records[0].hidden.size());
    TrainConfig tc = cfg.train;
    if (!cfg.train_seed_set) tc.seed = cfg.seed;
    HeadStack stack =
        HeadStack::init(tv.k(), tv.charset().size(), tv.S(), d, tc.seed, cfg.use_bias);
    std::vector<LossBreakdown> log = train(stack, records, tv, tc);
    if (log_out) *log_out = std::move(log);
    return stack;
}

json bins_to_json(const std::vector<BinStat>& bins) {
    json arr = json::array();
    for (const BinStat& b : bins)
        arr.push_back({{"lo", b.lo},
                       {"hi", b.hi},
                       {"count", b.count},
                       {"matched", b.matched},
                       {"exact", b.exact}});
    return arr;
}

json report_to_json(const EvalReport& rep, const DecodePolicy& policy) {
    json j;
    j["policy"] = {{"autocorrect", policy.autocorrect},
                   {"fallback", policy.fallback},
                   {"fallback_threshold", policy.fallback_threshold}};
    j["total_records"] = rep.total;
    j["pct_full_exact"] = rep.pct_full_exact;
    j["pct_k_char"] = rep.pct_k_char;
    j["pct_prefix"] = rep.pct_prefix;
    j["pct_mismatch"] = rep.pct_mismatch;
    j["pct_total_match"] = rep.pct_total_match;
    j["mean_prefix_len"] = rep.mean_prefix_len;
    j["mean_target_len"] = rep.mean_target_len;
    json lb = json::array();
    for (const LengthBucket& b : rep.length_buckets)
        lb.push_back({{"length", b.length},
                      {"count", b.count},
                      {"matched", b.matched},
                      {"exact", b.exact}});
    j["length_buckets"] = lb;
    j["entropy_bins"] = bins_to_json(rep.entropy_bins);
    json rk = json::array();
    for (const RankHistogramBin& b : rep.rank_by_teacher_entropy)
        rk.push_back({{"lo", b.lo},
                      {"hi", b.hi},
                      {"count", b.count},
                      {"rank_counts", b.rank_counts}});
    j["rank_by_teacher_entropy"] = rk;
    if (rep.pearson_entropy)
        j["pearson_entropy"] = *rep.pearson_entropy;
    else
        j["pearson_entropy"] = nullptr;
    if (!rep.pearson_note.empty()) j["pearson_note"] = rep.pearson_note;
    j["mean_teacher_entropy"] = rep.mean_teacher_entropy;
    j["mean_teacher_entropy_raw"] = rep.mean_teacher_entropy_raw;
    j["fallback_rate"] = rep.fallback_rate;
    j["autocorrect"] = {{"applicable", rep.autocorrect.applicable},
                        {"trigger_rate", rep.autocorrect.trigger_rate},
                        {"accuracy_direct", rep.autocorrect.accuracy_direct},
                        {"accuracy_triggered", rep.autocorrect.accuracy_triggered},
                        {"candidate_median", rep.autocorrect.candidate_median},
                        {"candidate_top_half_pct_mean", rep.autocorrect.candidate_top_half_pct_mean},
                        {"candidate_top_one_pct_mean", rep.autocorrect.candidate_top_one_pct_mean},
                        {"zero_candidate_rate", rep.autocorrect.zero_candidate_rate}};
    return j;
}

}  // namespace

RunConfig RunConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("config: ") + e.what(), 1);
    }
    RunConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.k = j.value("k", cfg.k);
    if (j.contains("charset") && j["charset"].is_array())
        cfg.charset = j["charset"].get<std::vector<std::string>>();
    if (j.contains("paths")) {
        const json& p = j["paths"];
        cfg.paths.vocab = p.value("vocab", "");
        cfg.paths.trace = p.value("trace", "");
        cfg.paths.eval_trace = p.value("eval_trace", "");
        cfg.paths.checkpoint = p.value("checkpoint", "");
        cfg.paths.out = p.value("out", ".");
    }
    if (j.contains("vocab_spec")) {
        const json& v = j["vocab_spec"];
        cfg.vocab_spec.present = true;
        cfg.vocab_spec.S = v.value("S", cfg.vocab_spec.S);
        cfg.vocab_spec.seed = v.value("seed", cfg.vocab_spec.seed);
        cfg.vocab_spec.min_len = v.value("min_len", cfg.vocab_spec.min_len);
        cfg.vocab_spec.max_len = v.value("max_len", cfg.vocab_spec.max_len);
    }
    if (j.contains("teacher")) {
        const json& t = j["teacher"];
        cfg.teacher.mode = parse_mode(t.value("mode", "separable"));
        cfg.teacher.d = t.value("d", cfg.teacher.d);
        cfg.teacher.noise_sigma = t.value("noise_sigma", cfg.teacher.noise_sigma);
        if (t.contains("seed")) cfg.teacher.seed = t["seed"].get<uint64_t>();
    }
    if (j.contains("gen")) {
        cfg.gen_n = j["gen"].value("n", cfg.gen_n);
        cfg.gen_skip = j["gen"].value("skip", cfg.gen_skip);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
        cfg.train.weight_decay = t.value("weight_decay", cfg.train.weight_decay);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.epochs = t.value("epochs", cfg.train.epochs);
        if (t.contains("label_rule"))
            cfg.train.label_rule = parse_label_rule(t["label_rule"].get<std::string>());
        if (t.contains("seed")) {
            cfg.train.seed = t["seed"].get<uint64_t>();
            cfg.train_seed_set = true;
        }
        cfg.train.renormalize_token_targets =
            t.value("renormalize_token_targets", cfg.train.renormalize_token_targets);
        cfg.train.token_loss_restricted =
            t.value("token_loss_restricted", cfg.train.token_loss_restricted);
        cfg.use_bias = t.value("use_bias", cfg.use_bias);
    }
    if (j.contains("policy")) {
        const json& p = j["policy"];
        cfg.policy.autocorrect = p.value("autocorrect", cfg.policy.autocorrect);
        cfg.policy.fallback = p.value("fallback", cfg.policy.fallback);
        cfg.policy.fallback_threshold =
            p.value("fallback_threshold", cfg.policy.fallback_threshold);
    }
    if (j.contains("bench")) {
        const json& b = j["bench"];
        cfg.bench.d = b.value("d", cfg.bench.d);
        cfg.bench.S = b.value("S", cfg.bench.S);
        cfg.bench.s = b.value("s", cfg.bench.s);
        cfg.bench.k = b.value("k", cfg.bench.k);
        cfg.bench.n_samples = b.value("n_samples", cfg.bench.n_samples);
        cfg.bench.warmup = b.value("warmup", cfg.bench.warmup);
        cfg.bench.backbone_layers = b.value("backbone_layers", cfg.bench.backbone_layers);
        cfg.bench.repeat = b.value("repeat", cfg.bench.repeat);
        cfg.bench.seed = b.value("seed", cfg.bench.seed);
        cfg.bench.use_f32 = b.value("use_f32", cfg.bench.use_f32);
    }
    if (j.contains("k_sweep")) cfg.k_sweep = j["k_sweep"].get<std::vector<int>>();
    return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

std::string RunConfig::to_json_text() const {
    json j;
    j["seed"] = seed;
    j["k"] = k;
    if (charset) j["charset"] = *charset;
    j["paths"] = {{"vocab", paths.vocab},
                  {"trace", paths.trace},
                  {"eval_trace", paths.eval_trace},
                  {"checkpoint", paths.checkpoint},
                  {"out", paths.out}};
    if (vocab_spec.present)
        j["vocab_spec"] = {{"S", vocab_spec.S},
                           {"seed", vocab_spec.seed},
                           {"min_len", vocab_spec.min_len},
                           {"max_len", vocab_spec.max_len}};
    j["teacher"] = {{"mode", teacher.mode == TeacherMode::separable ? "separable" : "linear"},
                    {"d", teacher.d},
                    {"noise_sigma", teacher.noise_sigma},
                    {"seed", teacher.seed.value_or(seed)}};
    j["gen"] = {{"n", gen_n}, {"skip", gen_skip}};
    j["train"] = {{"learning_rate", train.learning_rate},
                  {"weight_decay", train.weight_decay},
                  {"batch_size", train.batch_size},
                  {"epochs", train.epochs},
                  {"label_rule",
                   train.label_rule == LabelRule::similar_top3 ? "similar_top3" : "min_loss_top5"},
                  {"seed", train_seed_set ? train.seed : seed},
                  {"renormalize_token_targets", train.renormalize_token_targets},
                  {"token_loss_restricted", train.token_loss_restricted},
                  {"use_bias", use_bias}};
    j["policy"] = {{"autocorrect", policy.autocorrect},
                   {"fallback", policy.fallback},
                   {"fallback_threshold", policy.fallback_threshold}};
    j["bench"] = {{"d", bench.d},
                  {"S", bench.S},
                  {"s", bench.s},
                  {"k", bench.k},
                  {"n_samples", bench.n_samples},
                  {"warmup", bench.warmup},
                  {"backbone_layers", bench.backbone_layers},
                  {"repeat", bench.repeat},
                  {"seed", bench.seed},
                  {"use_f32", bench.use_f32}};
    if (!k_sweep.empty()) j["k_sweep"] = k_sweep;
    return j.dump(2) + "\n";
}

CharVocab RunConfig::make_charset() const {
    return charset ? CharVocab::from_serialized(*charset) : CharVocab::default_latin();
}

DirLock::DirLock(const std::string& out_dir) {
    fs::create_directories(out_dir);
    path_ = out_dir + "/.spellm.lock";
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f)
        throw IoError("output directory is locked by another invocation (" + path_ +
                      " exists); remove it if stale");
    std::fclose(f);
}

DirLock::~DirLock() { std::remove(path_.c_str()); }

GenResult cmd_gen(const RunConfig& cfg) {
    DirLock lock(cfg.paths.out);
    Stopwatch watch;
    if (cfg.paths.trace.empty()) throw IoError("config: paths.trace is required for gen");
    if (cfg.gen_n < 0) throw ContractError("config: gen.n must be >= 0");

    TokenVocab tv;
    if (fs::exists(cfg.paths.vocab)) {
        tv = read_vocab_file(cfg.paths.vocab);
    } else if (cfg.vocab_spec.present) {
        if (cfg.paths.vocab.empty()) throw IoError("config: paths.vocab is required");
        std::vector<std::string> raws = synth_token_raws(cfg.vocab_spec.S, cfg.vocab_spec.seed,
                                                         cfg.vocab_spec.min_len,
                                                         cfg.vocab_spec.max_len);
        tv = TokenVocab(std::move(raws), cfg.k, cfg.make_charset());
        fs::path vp(cfg.paths.vocab);
        if (vp.has_parent_path()) fs::create_directories(vp.parent_path());
        write_vocab_file(cfg.paths.vocab, tv);
    } else {
        throw IoError("missing vocab file: " + cfg.paths.vocab +
                      " (provide vocab_spec to synthesize one)");
    }

    SyntheticTeacherSpec spec;
    spec.mode = cfg.teacher.mode;
    spec.d = cfg.teacher.d;
    spec.S = tv.S();
    spec.noise_sigma = cfg.teacher.noise_sigma;
    spec.seed = cfg.teacher.seed.value_or(cfg.seed);

    std::vector<TeacherTraceRecord> records;
    if (cfg.gen_n > 0)
        records = gen_synthetic_trace(spec, cfg.gen_n, tv, nullptr, cfg.gen_skip);
    fs::path tp(cfg.paths.trace);
    if (tp.has_parent_path()) fs::create_directories(tp.parent_path());
    write_trace(cfg.paths.trace, records, spec.d, tv.content_sha256());

    echo_config(cfg, "gen");
    write_meta_sidecar(cfg.paths.out, "gen", watch.ms());
    return {cfg.paths.vocab, cfg.paths.trace, int(records.size())};
}

TrainResult cmd_train(const RunConfig& cfg) {
    DirLock lock(cfg.paths.out);
    Stopwatch watch;
    if (cfg.paths.checkpoint.empty()) throw IoError("config: paths.checkpoint is required");
    TokenVocab tv = load_vocab(cfg);
    std::vector<TeacherTraceRecord> records = read_trace(cfg.paths.trace, tv.content_sha256());

    TrainResult res;
    HeadStack stack = train_stack(cfg, tv, records, &res.log);

    fs::path cp(cfg.paths.checkpoint);
    if (cp.has_parent_path()) fs::create_directories(cp.parent_path());
    write_checkpoint(cfg.paths.checkpoint, stack, tv.charset());
    res.checkpoint_path = cfg.paths.checkpoint;

    std::string log_text;
    for (size_t e = 0; e < res.log.size(); ++e) {
        log_text += "{\"epoch\":" + std::to_string(e) +
                    ",\"char_loss\":" + format_f64(res.log[e].char_loss) +
                    ",\"token_loss\":" + format_f64(res.log[e].token_loss) +
                    ",\"total\":" + format_f64(res.log[e].total) + "}\n";
    }
    res.log_path = cfg.paths.out + "/train_log.jsonl";
    write_text_file(res.log_path, log_text);

    echo_config(cfg, "train");
    write_meta_sidecar(cfg.paths.out, "train", watch.ms(), {{"epochs", int(res.log.size())}});
    return res;
}

namespace {

struct LoadedRun {
    TokenVocab tv;
    HeadStack stack;
    std::vector<TeacherTraceRecord> records;
};

LoadedRun load_eval_inputs(const RunConfig& cfg) {
    LoadedRun run;
    run.tv = load_vocab(cfg);
    if (cfg.paths.checkpoint.empty() || !fs::exists(cfg.paths.checkpoint))
        throw IoError("missing checkpoint: " + cfg.paths.checkpoint);
    Checkpoint ck = read_checkpoint(cfg.paths.checkpoint);
    if (!(ck.charset == run.tv.charset()))
        throw VocabHashMismatchError("checkpoint charset differs from vocab charset");
    if (ck.stack.k != run.tv.k() || ck.stack.S != run.tv.S())
        throw ContractError("checkpoint shape does not match vocab (k or S)");
    run.stack = std::move(ck.stack);
    const std::string& trace_path =
        cfg.paths.eval_trace.empty() ? cfg.paths.trace : cfg.paths.eval_trace;
    run.records = read_trace(trace_path, run.tv.content_sha256());
    return run;
}

}  // namespace

EvalResult cmd_eval(const RunConfig& cfg) {
    DirLock lock(cfg.paths.out);
    Stopwatch watch;
    EvalResult res;

    if (!cfg.k_sweep.empty()) {
        // Each k trains a fresh student on the training trace, then evaluates.
        TokenVocab base_tv = load_vocab(cfg);
        std::vector<TeacherTraceRecord> train_records =
            read_trace(cfg.paths.trace, base_tv.content_sha256());
        const std::string& eval_path =
            cfg.paths.eval_trace.empty() ? cfg.paths.trace : cfg.paths.eval_trace;
        std::vector<TeacherTraceRecord> eval_records =
            read_trace(eval_path, base_tv.content_sha256());

        std::string table;
        std::vector<EvalReport> plain_reports, ac_reports;
        for (int k : cfg.k_sweep) {
            TokenVocab tv = load_vocab(cfg, k);
            HeadStack stack = train_stack(cfg, tv, train_records, nullptr);
            DecodePolicy plain = cfg.policy;
            plain.autocorrect = false;
            DecodePolicy with_ac = cfg.policy;
            with_ac.autocorrect = true;
            EvalReport rp = run_eval(stack, eval_records, tv, plain);
            EvalReport ra = run_eval(stack, eval_records, tv, with_ac);
            plain_reports.push_back(rp);
            ac_reports.push_back(ra);
            json j = {{"k", k},
                      {"spellm", report_to_json(rp, plain)},
                      {"spellm_autocorrect", report_to_json(ra, with_ac)}};
            std::string path = cfg.paths.out + "/sweep_k" + std::to_string(k) + "_report.json";
            write_text_file(path, j.dump(2) + "\n");
            res.sweep_report_paths.push_back(path);
        }

        char line[256];
        auto block = [&](const char* title, const std::vector<EvalReport>& reps) {
            table += title;
            table += "\n";
            auto row = [&](const char* label, auto getter) {
                std::string s;
                std::snprintf(line, sizeof(line), "  %-20s", label);
                s += line;
                for (const EvalReport& r : reps) {
                    std::snprintf(line, sizeof(line), " %9.2f", getter(r));
                    s += line;
                }
                table += s + "\n";
            };
            row("Exact match", [](const EvalReport& r) { return r.pct_full_exact; });
            row("k-character match", [](const EvalReport& r) { return r.pct_k_char; });
            row("Total", [](const EvalReport& r) { return r.pct_full_exact + r.pct_k_char; });
        };
        std::snprintf(line, sizeof(line), "%-22s", "Match Type");
        table += line;
        for (int k : cfg.k_sweep) {
            std::snprintf(line, sizeof(line), " %6d hd.", k);
            table += line;
        }
        table += "\n";
        block("SpeLLM", plain_reports);
        block("SpeLLM + AutoCorrect", ac_reports);
        res.table_path = cfg.paths.out + "/sweep_table.txt";
        write_text_file(res.table_path, table);
        res.report = ac_reports.empty() ? EvalReport{} : ac_reports.back();
        echo_config(cfg, "eval");
        write_meta_sidecar(cfg.paths.out, "eval", watch.ms(), {{"sweep", true}});
        return res;
    }

    LoadedRun run = load_eval_inputs(cfg);
    res.report = run_eval(run.stack, run.records, run.tv, cfg.policy);
    res.report_path = cfg.paths.out + "/eval_report.json";
    write_text_file(res.report_path, report_to_json(res.report, cfg.policy).dump(2) + "\n");

    std::string table;
    if (cfg.policy.autocorrect) {
        DecodePolicy plain = cfg.policy;
        plain.autocorrect = false;
        EvalReport no_ac = run_eval(run.stack, run.records, run.tv, plain);
        table = format_match_table(no_ac, &res.report, run.tv.k());
    } else {
        table = format_match_table(res.report, nullptr, run.tv.k());
    }
    res.table_path = cfg.paths.out + "/eval_table.txt";
    write_text_file(res.table_path, table);

    echo_config(cfg, "eval");
    write_meta_sidecar(cfg.paths.out, "eval", watch.ms());
    return res;
}

AnalyzeResult cmd_analyze(const RunConfig& cfg) {
    DirLock lock(cfg.paths.out);
    Stopwatch watch;
    LoadedRun run = load_eval_inputs(cfg);
    if (run.records.empty()) throw ContractError("analyze: eval trace has no records");

    AnalyzeResult res;
    res.report = run_eval(run.stack, run.records, run.tv, cfg.policy);
    res.bundle_dir = cfg.paths.out;
    const EvalReport& rep = res.report;

    std::string csv = "length,count,share,match_rate,exact_rate\n";
    for (const LengthBucket& b : rep.length_buckets) {
        double share = rep.total ? double(b.count) / rep.total : 0.0;
        csv += std::to_string(b.length) + "," + std::to_string(b.count) + "," +
               format_f64(share) + "," +
               format_f64(b.count ? double(b.matched) / b.count : 0.0) + "," +
               format_f64(b.count ? double(b.exact) / b.count : 0.0) + "\n";
    }
    write_text_file(cfg.paths.out + "/length_buckets.csv", csv);

    csv = "bin,lo,hi,count,share,match_rate,exact_rate\n";
    for (size_t i = 0; i < rep.entropy_bins.size(); ++i) {
        const BinStat& b = rep.entropy_bins[i];
        double share = rep.total ? double(b.count) / rep.total : 0.0;
        csv += std::to_string(i) + "," + format_f64(b.lo) + "," + format_f64(b.hi) + "," +
               std::to_string(b.count) + "," + format_f64(share) + "," +
               format_f64(b.count ? double(b.matched) / b.count : 0.0) + "," +
               format_f64(b.count ? double(b.exact) / b.count : 0.0) + "\n";
    }
    write_text_file(cfg.paths.out + "/entropy_bins.csv", csv);

    csv = "bin,lo,hi,count,share,rank1,rank2,rank3,rank4,rank5\n";
    for (size_t i = 0; i < rep.rank_by_teacher_entropy.size(); ++i) {
        const RankHistogramBin& b = rep.rank_by_teacher_entropy[i];
        double share = rep.total ? double(b.count) / rep.total : 0.0;
        csv += std::to_string(i) + "," + format_f64(b.lo) + "," + format_f64(b.hi) + "," +
               std::to_string(b.count) + "," + format_f64(share);
        for (int r = 0; r < 5; ++r)
            csv += "," + format_f64(b.count ? double(b.rank_counts[r]) / b.count : 0.0);
        csv += "\n";
    }
    write_text_file(cfg.paths.out + "/topk_preference.csv", csv);

    csv = "trigger_rate,accuracy_direct,accuracy_triggered,candidate_median,"
          "candidate_top_half_pct_mean,candidate_top_one_pct_mean,zero_candidate_rate\n";
    const AutoCorrectStats& ac = rep.autocorrect;
    csv += format_f64(ac.trigger_rate) + "," + format_f64(ac.accuracy_direct) + "," +
           format_f64(ac.accuracy_triggered) + "," + format_f64(ac.candidate_median) + "," +
           format_f64(ac.candidate_top_half_pct_mean) + "," +
           format_f64(ac.candidate_top_one_pct_mean) + "," + format_f64(ac.zero_candidate_rate) +
           "\n";
    write_text_file(cfg.paths.out + "/autocorrect_stats.csv", csv);

    write_text_file(cfg.paths.out + "/analysis.json",
                    report_to_json(rep, cfg.policy).dump(2) + "\n");

    echo_config(cfg, "analyze");
    write_meta_sidecar(cfg.paths.out, "analyze", watch.ms());
    return res;
}

BenchResult cmd_bench(const RunConfig& cfg) {
    DirLock lock(cfg.paths.out);
    Stopwatch watch;
    BenchResult res;
    res.report = cfg.bench.backbone_layers > 0 ? bench_end_to_end(cfg.bench)
                                               : bench_head_only(cfg.bench);
    const BenchReport& r = res.report;
    json j;
    j["config"] = {{"d", r.cfg.d},
                   {"S", r.cfg.S},
                   {"s", r.cfg.s},
                   {"k", r.cfg.k},
                   {"n_samples", r.cfg.n_samples},
                   {"warmup", r.cfg.warmup},
                   {"backbone_layers", r.cfg.backbone_layers},
                   {"repeat", r.cfg.repeat},
                   {"use_f32", r.cfg.use_f32}};
    j["token_head"] = {{"median_ns", r.token_head.median_ns},
                       {"mean_ns", r.token_head.mean_ns},
                       {"p95_ns", r.token_head.p95_ns}};
    j["spellm_head"] = {{"median_ns", r.spellm_head.median_ns},
                        {"mean_ns", r.spellm_head.mean_ns},
                        {"p95_ns", r.spellm_head.p95_ns}};
    j["flops"] = {{"token", r.flops_token},
                  {"spellm", r.flops_spellm},
                  {"counted_token", r.counted_token},
                  {"counted_spellm", r.counted_spellm},
                  {"backbone", r.flops_backbone}};
    j["speedup_ratio"] = r.speedup_ratio;
    if (r.cfg.backbone_layers > 0) {
        j["head_share_token"] = r.head_share_token;
        j["predicted_speedup"] = r.predicted_speedup;
        j["measured_speedup"] = r.measured_speedup;
    }
    j["repeat_medians_token"] = r.repeat_medians_token;
    j["repeat_medians_spellm"] = r.repeat_medians_spellm;
    res.report_path = cfg.paths.out + "/bench_report.json";
    write_text_file(res.report_path, j.dump(2) + "\n");
    res.table = format_bench_table(r);
    write_text_file(cfg.paths.out + "/bench_table.txt", res.table);
    echo_config(cfg, "bench");
    write_meta_sidecar(cfg.paths.out, "bench", watch.ms());
    return res;
}

}  // namespace spellm
