// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Heavier fixtures (the separable distillation run) are shared across
// criteria; every tolerance is pinned here in code.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "spellm/bench.hpp"
#include "spellm/distill.hpp"
#include "spellm/eval.hpp"
#include "spellm/pipeline.hpp"

using namespace spellm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

struct Check {
    Outcome& out;
    void operator()(bool ok, const std::string& what) {
        if (!ok) {
            out.pass = false;
            out.detail += (out.detail.empty() ? "" : "; ") + what;
        }
    }
};

// ---------------------------------------------------------------------------
// Criterion 1: analytic gradients vs central finite differences.

Outcome criterion1() {
    Outcome out;
    Check check{out};
    SeededRng rng(0xC1);
    const double step = 1e-5;
    int bad = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        int k = 1 + rng.next_int(8);
        int s = 2 + rng.next_int(31);
        int S = 6 + rng.next_int(251);
        CharLogits cl;
        cl.per_head.resize(k);
        for (auto& head : cl.per_head) {
            head.resize(s);
            for (double& l : head) l = rng.next_uniform(-3, 3);
        }
        SpelledString target(k);
        for (int& t : target) t = rng.next_int(s);
        CharLossResult cres = char_loss(cl, target);
        for (int i = 0; i < k; ++i)
            for (int c = 0; c < s; ++c) {
                double fd = oracle::central_diff(
                    [&] { return char_loss_value(cl, target); }, cl.per_head[i][c], step);
                double err = oracle::rel_err(cres.grad[i][c], fd);
                worst = std::max(worst, err);
                if (err >= 1e-4) ++bad;
            }

        std::vector<double> logits(S);
        for (double& l : logits) l = rng.next_uniform(-3, 3);
        std::array<std::pair<int, double>, 5> top5;
        std::vector<int> ids;
        while (int(ids.size()) < 5) {
            int id = rng.next_int(S);
            if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
        }
        double remaining = rng.next_uniform(0.5, 1.0);
        for (int j = 0; j < 5; ++j) {
            double p = (j == 4) ? remaining : remaining * rng.next_uniform(0.3, 0.7);
            top5[j] = {ids[j], std::max(p, 1e-6)};
            remaining -= p;
        }
        TokenLossResult tres = token_loss(logits, top5);
        for (int t = 0; t < S; ++t) {
            double fd = oracle::central_diff([&] { return token_loss(logits, top5).loss; },
                                             logits[t], step);
            double err = oracle::rel_err(tres.grad[t], fd);
            worst = std::max(worst, err);
            if (err >= 1e-4) ++bad;
        }
    }
    check(bad == 0, std::to_string(bad) + " gradient coordinates off");
    char buf[96];
    std::snprintf(buf, sizeof(buf), "worst rel err %.2e over 100 instances", worst);
    if (out.pass) out.detail = buf;
    return out;
}

// ---------------------------------------------------------------------------
// Criterion 2: oracle equivalences, 1000 trials each, zero mismatches.

Outcome criterion2() {
    Outcome out;
    Check check{out};
    SeededRng rng(0xC2);
    TokenVocab tv(synth_token_raws(200, 12), 5, CharVocab::default_latin());
    SpellingIndex index(tv);
    int s = tv.charset().size();

    int bad_candidates = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        Top3Table t3;
        t3.sets.resize(tv.k());
        for (auto& set : t3.sets) {
            while (int(set.size()) < 3) {
                int c = rng.next_int(s);
                if (std::find(set.begin(), set.end(), c) == set.end()) set.push_back(c);
            }
            std::sort(set.begin(), set.end());
        }
        if (index.candidates(t3) != oracle::brute_candidates(t3.sets, tv)) ++bad_candidates;
    }
    check(bad_candidates == 0,
          "autocorrect_candidates mismatches: " + std::to_string(bad_candidates));

    int bad_argmax = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        CharLogits cl;
        int k = 1 + rng.next_int(8);
        cl.per_head.resize(k);
        for (auto& head : cl.per_head) {
            head.resize(2 + rng.next_int(30));
            for (double& l : head) l = rng.next_uniform(-4, 4);
        }
        if (decode_argmax(cl) != oracle::scan_argmax(cl)) ++bad_argmax;
    }
    check(bad_argmax == 0, "decode_argmax mismatches: " + std::to_string(bad_argmax));

    int bad_similar = 0, bad_nearest = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        CharLogits cl;
        cl.per_head.resize(tv.k());
        for (auto& head : cl.per_head) {
            head.resize(s);
            for (double& l : head) l = rng.next_uniform(-3, 3);
        }
        std::vector<int> ids;
        while (int(ids.size()) < 5) {
            int id = rng.next_int(tv.S());
            if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
        }
        std::vector<std::pair<int, double>> top3;
        std::array<std::pair<int, double>, 5> top5;
        for (int j = 0; j < 5; ++j) {
            double p = (trial % 5 == 0) ? 0.1 : 0.4 / (1 << j);  // exercise probability ties
            top5[j] = {ids[j], p};
            if (j < 3) top3.push_back({ids[j], p});
        }
        std::sort(top5.begin(), top5.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (select_similar(cl, top3, tv).first !=
            oracle::brute_select_similar(decode_argmax(cl), top3, tv))
            ++bad_similar;
        SpelledString pred(tv.k());
        for (int& c : pred) c = rng.next_int(s);
        if (nearest_token(pred, top5, tv) != oracle::brute_nearest(pred, top5, tv)) ++bad_nearest;
    }
    check(bad_similar == 0, "select_similar mismatches: " + std::to_string(bad_similar));
    check(bad_nearest == 0, "nearest_token mismatches: " + std::to_string(bad_nearest));

    // Restricted token-head scoring vs the full head restricted to candidates;
    // blended spellings keep the autocorrect path busy.
    HeadStack st = HeadStack::init(tv.k(), s, tv.S(), 8, 0xC2C2);
    int bad_restricted = 0, scored = 0;
    for (int trial = 0; trial < 40000 && scored < 1000; ++trial) {
        std::vector<double> h(8);
        for (double& x : h) x = rng.next_uniform(-1.5, 1.5);
        CharLogits cl;
        int t1 = rng.next_int(tv.S()), t2 = rng.next_int(tv.S());
        double w1 = rng.next_uniform(3, 6), w2 = rng.next_uniform(3, 6);
        for (int pos = 0; pos < tv.k(); ++pos) {
            std::vector<double> head(s);
            for (double& l : head) l = rng.next_uniform(-0.5, 0.5);
            head[tv.entry(t1).spelling[pos]] += w1;
            head[tv.entry(t2).spelling[pos]] += w2;
            cl.per_head.push_back(std::move(head));
        }
        DecodeOutcome decoded = autocorrect(h, cl, st, tv, &index);
        if (decoded.path != DecodePath::autocorrect) continue;
        ++scored;
        std::vector<int> cands = oracle::brute_candidates(top3_table(cl).sets, tv);
        std::vector<double> full = forward_token(st, h);
        int best = cands[0];
        for (int id : cands)
            if (full[id] > full[best]) best = id;
        if (*decoded.token_id != best) ++bad_restricted;
    }
    check(scored == 1000, "only " + std::to_string(scored) + " autocorrect trials");
    check(bad_restricted == 0, "restricted-softmax mismatches: " + std::to_string(bad_restricted));
    if (out.pass) out.detail = "4 equivalences x 1000 trials, zero mismatches";
    return out;
}

// ---------------------------------------------------------------------------
// Criteria 3-5 share the separable distillation fixture.

struct DistillFixture {
    TokenVocab tv;  // k = 6
    std::vector<TeacherTraceRecord> train_trace;
    std::vector<TeacherTraceRecord> eval_trace;
    HeadStack stack;    // trained at k = 6
    EvalReport plain;   // no autocorrect, no fallback
    EvalReport with_ac; // autocorrect, no fallback
};

HeadStack train_separable(const TokenVocab& tv, const std::vector<TeacherTraceRecord>& trace,
                          uint64_t seed) {
    HeadStack st = HeadStack::init(tv.k(), tv.charset().size(), tv.S(), 64, seed);
    TrainConfig cfg;
    cfg.learning_rate = 5e-5;
    cfg.weight_decay = 0.01;
    cfg.batch_size = 1;
    cfg.epochs = 3;
    cfg.seed = seed;
    train(st, trace, tv, cfg);
    return st;
}

DistillFixture build_fixture() {
    DistillFixture fx;
    fx.tv = TokenVocab(synth_token_raws(512, 2024), 6, CharVocab::default_latin());
    SyntheticTeacherSpec spec;
    spec.mode = TeacherMode::separable;
    spec.d = 64;
    spec.S = 512;
    spec.noise_sigma = 0.05;
    spec.seed = 11;
    fx.train_trace = gen_synthetic_trace(spec, 20000, fx.tv, nullptr, 0);
    fx.eval_trace = gen_synthetic_trace(spec, 2000, fx.tv, nullptr, 20000);
    fx.stack = train_separable(fx.tv, fx.train_trace, 7);
    fx.plain = run_eval(fx.stack, fx.eval_trace, fx.tv, DecodePolicy{false, false, 0.22});
    fx.with_ac = run_eval(fx.stack, fx.eval_trace, fx.tv, DecodePolicy{true, false, 0.22});
    return fx;
}

Outcome criterion3(const DistillFixture& fx) {
    Outcome out;
    Check check{out};
    check(fx.plain.pct_full_exact >= 95.0,
          "full exact " + std::to_string(fx.plain.pct_full_exact) + " < 95");
    check(fx.with_ac.pct_total_match >= fx.plain.pct_total_match,
          "AutoCorrect total below plain total");
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "exact %.2f%% (no AC), total %.2f%% -> %.2f%% with AutoCorrect",
                  fx.plain.pct_full_exact, fx.plain.pct_total_match, fx.with_ac.pct_total_match);
    if (out.pass) out.detail = buf;
    return out;
}

Outcome criterion4(const DistillFixture& fx) {
    Outcome out;
    Check check{out};
    std::vector<int> ks = {5, 6, 12};
    std::vector<double> exact, total;
    std::ostringstream detail;
    detail.precision(4);
    for (int k : ks) {
        EvalReport rep;
        if (k == 6) {
            rep = fx.plain;
        } else {
            TokenVocab tv(synth_token_raws(512, 2024), k, CharVocab::default_latin());
            SyntheticTeacherSpec spec;
            spec.d = 64;
            spec.S = 512;
            spec.noise_sigma = 0.05;
            spec.seed = 11;
            std::vector<TeacherTraceRecord> train_trace =
                gen_synthetic_trace(spec, 20000, tv, nullptr, 0);
            std::vector<TeacherTraceRecord> eval_trace =
                gen_synthetic_trace(spec, 2000, tv, nullptr, 20000);
            HeadStack st = train_separable(tv, train_trace, 7);
            rep = run_eval(st, eval_trace, tv, DecodePolicy{false, false, 0.22});
        }
        exact.push_back(rep.pct_full_exact);
        total.push_back(rep.pct_full_exact + rep.pct_k_char);
        detail << "k=" << k << ": exact " << rep.pct_full_exact << " total "
               << rep.pct_full_exact + rep.pct_k_char << "; ";
    }
    check(exact[0] <= exact[1] && exact[1] <= exact[2], "exact match not non-decreasing in k");
    double lo = *std::min_element(total.begin(), total.end());
    double hi = *std::max_element(total.begin(), total.end());
    check(hi - lo <= 3.0, "Total spread " + std::to_string(hi - lo) + " > 3 points");
    if (out.pass) out.detail = detail.str();
    return out;
}

Outcome criterion5(const DistillFixture& fx) {
    Outcome out;
    Check check{out};

    // Pure token-head argmax match rate, computed independently.
    int token_head_matches = 0;
    for (const TeacherTraceRecord& rec : fx.eval_trace) {
        std::vector<double> logits = forward_token(fx.stack, rec.hidden);
        int best = 0;
        for (int t = 1; t < fx.stack.S; ++t)
            if (logits[t] > logits[best]) best = t;
        MatchVerdict v = classify_match(fx.tv.entry(best).spelling, rec.top5, fx.tv);
        if (v.kind != MatchKind::mismatch) ++token_head_matches;
    }
    double token_head_rate = 100.0 * token_head_matches / double(fx.eval_trace.size());

    EvalReport at_zero = run_eval(fx.stack, fx.eval_trace, fx.tv, DecodePolicy{true, true, 0.0});
    check(at_zero.fallback_rate == 1.0, "threshold 0 did not route every record to fallback");
    check(at_zero.pct_total_match == token_head_rate,
          "threshold-0 match rate differs from pure token-head rate");

    double ln_s = std::log(double(fx.tv.charset().size()));
    EvalReport at_lns = run_eval(fx.stack, fx.eval_trace, fx.tv, DecodePolicy{true, true, ln_s});
    check(at_lns.fallback_rate == 0.0, "threshold ln(s) still fell back");
    check(at_lns.pct_total_match == fx.with_ac.pct_total_match &&
              at_lns.pct_full_exact == fx.with_ac.pct_full_exact,
          "threshold ln(s) differs from the no-fallback pipeline");

    EvalReport at_default =
        run_eval(fx.stack, fx.eval_trace, fx.tv, DecodePolicy{true, true, 0.22});
    check(at_default.pct_total_match >= fx.with_ac.pct_total_match - 0.5,
          "threshold 0.22 fell more than 0.5 points below the no-fallback rate");
    check(at_default.pct_total_match >= token_head_rate - 0.5,
          "threshold 0.22 fell more than 0.5 points below the token-head rate");

    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "token-head %.2f%%, @0 %.2f%%, @ln(s) %.2f%%, @0.22 %.2f%% (fallback rate %.3f)",
                  token_head_rate, at_zero.pct_total_match, at_lns.pct_total_match,
                  at_default.pct_total_match, at_default.fallback_rate);
    if (out.pass) out.detail = buf;
    return out;
}

// ---------------------------------------------------------------------------
// Criterion 6: output-head benchmark.

Outcome criterion6() {
    Outcome out;
    Check check{out};
    BenchConfig cfg;
    cfg.d = 1024;
    cfg.S = 100000;
    cfg.k = 10;
    cfg.s = 97;
    cfg.n_samples = 100;
    cfg.warmup = 10;
    cfg.seed = 7;
    BenchReport head = bench_head_only(cfg);
    check(head.counted_token == head.flops_token && head.counted_spellm == head.flops_spellm,
          "instrumented multiply-add counts differ from the analytic formulas");
    check(head.flops_token == uint64_t(100000) * 1024 &&
              head.flops_spellm == uint64_t(10) * 97 * 1024,
          "analytic flop formulas wrong");
    check(head.speedup_ratio >= 10.0,
          "head-only ratio " + std::to_string(head.speedup_ratio) + " < 10x");

    // Dummy backbone sized so the token head is ~10% of per-token work.
    BenchConfig e2e = cfg;
    e2e.d = 384;
    e2e.S = 3400;
    e2e.backbone_layers = 10;
    BenchReport deep = bench_end_to_end(e2e);
    double predicted_gain = deep.predicted_speedup - 1.0;
    double measured_gain = deep.measured_speedup - 1.0;
    check(measured_gain >= 0.5 * predicted_gain && measured_gain <= 2.0 * predicted_gain,
          "measured gain " + std::to_string(measured_gain) + " outside [0.5x, 2x] of predicted " +
              std::to_string(predicted_gain));

    char buf[200];
    std::snprintf(buf, sizeof(buf),
                  "head-only %.1fx; end-to-end speedup %.2f%% vs predicted %.2f%% "
                  "(head share %.1f%%)",
                  head.speedup_ratio, 100.0 * measured_gain, 100.0 * predicted_gain,
                  100.0 * deep.head_share_token);
    if (out.pass) out.detail = buf;
    return out;
}

// ---------------------------------------------------------------------------
// Criterion 7: byte-identical artifacts across two consecutive runs.

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "<missing " + path.string() + ">";
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

Outcome criterion7() {
    Outcome out;
    Check check{out};
    fs::path dir = fs::temp_directory_path() / "spellm_acceptance_det";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::string config =
        std::string("{") + "\"seed\":21,\"k\":5," + "\"paths\":{\"vocab\":\"" +
        (dir / "vocab.jsonl").string() + "\",\"trace\":\"" + (dir / "trace.jsonl").string() +
        "\",\"eval_trace\":\"" + (dir / "trace.jsonl").string() + "\",\"checkpoint\":\"" +
        (dir / "ckpt.json").string() + "\",\"out\":\"" + (dir / "out").string() + "\"}," +
        "\"vocab_spec\":{\"S\":64,\"seed\":9}," +
        "\"teacher\":{\"mode\":\"separable\",\"d\":32,\"noise_sigma\":0.05}," +
        "\"gen\":{\"n\":400},\"train\":{\"batch_size\":1,\"epochs\":1}}";
    RunConfig cfg = RunConfig::from_json_text(config);

    const std::vector<std::string> artifacts = {
        "vocab.jsonl",         "trace.jsonl",            "ckpt.json",
        "out/train_log.jsonl", "out/eval_report.json",   "out/eval_table.txt",
        "out/analysis.json",   "out/length_buckets.csv", "out/entropy_bins.csv",
        "out/topk_preference.csv", "out/autocorrect_stats.csv"};
    std::vector<std::string> first;
    for (int run = 0; run < 2; ++run) {
        cmd_gen(cfg);
        cmd_train(cfg);
        cmd_eval(cfg);
        cmd_analyze(cfg);
        if (run == 0) {
            for (const std::string& name : artifacts) first.push_back(slurp(dir / name));
        } else {
            for (size_t i = 0; i < artifacts.size(); ++i)
                check(first[i] == slurp(dir / artifacts[i]), artifacts[i] + " differs between runs");
        }
    }
    fs::remove_all(dir);
    if (out.pass)
        out.detail = std::to_string(artifacts.size()) + " artifacts byte-identical across reruns";
    return out;
}

// ---------------------------------------------------------------------------
// Criterion 8: the 12-case match-classifier fixture.

Outcome criterion8() {
    Outcome out;
    Check check{out};
    TokenVocab tv({"cat", "cart", "carts", "cartoon", "dog", "Ab", "Áb", "catnip", "cartop"},
                  5, CharVocab::default_latin());
    CharVocab cv = tv.charset();
    auto sp = [&](const std::string& raw) { return spell(raw, 5, cv); };
    auto t5 = [](std::array<int, 5> ids) {
        std::array<std::pair<int, double>, 5> arr;
        double p = 0.5;
        for (int i = 0; i < 5; ++i) {
            arr[i] = {ids[i], p};
            p *= 0.5;
        }
        return arr;
    };
    struct Case {
        SpelledString pred;
        std::array<int, 5> ids;
        MatchKind want;
        int want_token;   // -1 = unchecked
        int want_prefix;  // -1 = unchecked
        const char* name;
    };
    SpelledString holey = sp("ca");
    holey[3] = *cv.index_of('t');
    std::vector<Case> cases = {
        {sp("cat"), {0, 1, 2, 4, 5}, MatchKind::full_exact, 0, -1, "exact top-1"},
        {sp("dog"), {0, 1, 2, 4, 5}, MatchKind::full_exact, 4, -1, "exact lower rank"},
        {sp("Ab"), {6, 5, 0, 1, 4}, MatchKind::full_exact, 6, -1, "exact collision tie"},
        {sp("carto"), {3, 0, 1, 2, 4}, MatchKind::k_char, 3, -1, "k-char truncation"},
        {sp("catni"), {7, 0, 1, 2, 4}, MatchKind::k_char, 7, -1, "k-char catnip"},
        {sp("carto"), {8, 3, 0, 1, 4}, MatchKind::k_char, 8, -1, "k-char shared truncation tie"},
        {sp("car"), {2, 4, 5, 6, 7}, MatchKind::prefix, 2, 3, "prefix of carts"},
        {sp("ca"), {1, 0, 4, 5, 6}, MatchKind::prefix, 1, 2, "prefix probability tie"},
        {sp("cart"), {3, 4, 5, 6, 7}, MatchKind::prefix, 3, 4, "prefix of truncated spelling"},
        {sp(""), {0, 1, 2, 3, 4}, MatchKind::mismatch, -1, -1, "all-PAD excluded"},
        {holey, {0, 1, 2, 3, 4}, MatchKind::mismatch, -1, -1, "PAD inside the string"},
        {sp("zzz"), {0, 1, 2, 3, 4}, MatchKind::mismatch, -1, -1, "plain wrong string"},
    };
    for (const Case& c : cases) {
        MatchVerdict v = classify_match(c.pred, t5(c.ids), tv);
        check(v.kind == c.want, std::string(c.name) + ": wrong kind");
        if (c.want_token >= 0)
            check(v.matched_token && *v.matched_token == c.want_token,
                  std::string(c.name) + ": wrong matched token");
        if (c.want_prefix >= 0)
            check(v.prefix_len && *v.prefix_len == c.want_prefix,
                  std::string(c.name) + ": wrong prefix length");
    }
    if (out.pass) out.detail = "12/12 fixture cases classified as specified";
    return out;
}

}  // namespace

int main() {
    auto t_fx = Clock::now();
    DistillFixture fx = build_fixture();
    double fixture_s = std::chrono::duration<double>(Clock::now() - t_fx).count();
    std::printf("[fixture] separable distillation run built in %.1fs\n", fixture_s);

    struct Entry {
        const char* name;
        std::function<Outcome()> run;
        double budget_s;  // stated runtime limit, 0 = none
        bool add_fixture_time;
    };
    std::vector<Entry> entries = {
        {"1 gradient correctness", criterion1, 10.0, false},
        {"2 oracle equivalences", criterion2, 30.0, false},
        {"3 synthetic distillation", [&] { return criterion3(fx); }, 600.0, true},
        {"4 head-count sweep", [&] { return criterion4(fx); }, 0.0, false},
        {"5 entropy fallback", [&] { return criterion5(fx); }, 0.0, false},
        {"6 benchmark", criterion6, 120.0, false},
        {"7 determinism", criterion7, 0.0, false},
        {"8 match classifier fixture", criterion8, 0.0, false},
    };

    bool all_pass = true;
    for (Entry& e : entries) {
        auto t0 = Clock::now();
        Outcome out = e.run();
        double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        if (e.add_fixture_time) secs += fixture_s;
        if (e.budget_s > 0 && secs > e.budget_s) {
            out.pass = false;
            out.detail += " [exceeded " + std::to_string(int(e.budget_s)) + "s budget]";
        }
        std::printf("criterion %-28s %s  (%.1fs)  %s\n", e.name, out.pass ? "PASS" : "FAIL", secs,
                    out.detail.c_str());
        all_pass = all_pass && out.pass;
    }
    return all_pass ? 0 : 1;
}
