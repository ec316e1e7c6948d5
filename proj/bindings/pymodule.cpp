// Python bindings for the core operations: numerics, spelling, head
// forward/decode, losses, decoding policies, match classification, and the
// pipeline commands.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "spellm/distill.hpp"
#include "spellm/eval.hpp"
#include "spellm/inference.hpp"
#include "spellm/pipeline.hpp"

namespace py = pybind11;
using namespace spellm;

namespace {

std::array<std::pair<int, double>, 5> to_top5(const std::vector<std::pair<int, double>>& v) {
    if (v.size() != 5) throw ContractError("top5 must have exactly 5 (id, p) pairs");
    std::array<std::pair<int, double>, 5> a;
    std::copy(v.begin(), v.end(), a.begin());
    return a;
}

}  // namespace

PYBIND11_MODULE(_spellm, m) {
    m.doc() = "Character-level output heads: spelling, distillation, decoding";

    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<UndefinedCorrelationError>(m, "UndefinedCorrelationError",
                                                      PyExc_ArithmeticError);

    m.def("softmax", [](const std::vector<double>& logits) { return softmax(logits).values; });
    m.def("entropy", [](const std::vector<double>& p) { return entropy(ProbVector{p}); });
    m.def("cross_entropy", [](const std::vector<double>& logits, const std::vector<double>& t) {
        return cross_entropy(logits, t);
    });
    m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) {
        return pearson(x, y);
    });

    py::class_<CharVocab>(m, "CharVocab")
        .def_static("default_latin", &CharVocab::default_latin)
        .def_static("from_serialized", &CharVocab::from_serialized)
        .def("size", &CharVocab::size)
        .def("serialized", &CharVocab::serialized);

    py::class_<TokenVocab>(m, "TokenVocab")
        .def(py::init([](const std::vector<std::string>& raws, int k, const CharVocab& cv) {
                 return TokenVocab(raws, k, cv);
             }),
             py::arg("raws"), py::arg("k"), py::arg("charset"))
        .def_property_readonly("S", &TokenVocab::S)
        .def_property_readonly("k", &TokenVocab::k)
        .def("charset", &TokenVocab::charset)
        .def("raw", [](const TokenVocab& tv, int id) { return tv.entry(id).raw; })
        .def("spelling", [](const TokenVocab& tv, int id) { return tv.entry(id).spelling; })
        .def("content_sha256", &TokenVocab::content_sha256);

    m.def("normalize", &normalize);
    m.def("spell", &spell);
    m.def("unspell", &unspell);
    m.def("is_valid_token", &is_valid_token);
    m.def("synth_token_raws", &synth_token_raws, py::arg("S"), py::arg("seed"),
          py::arg("min_len") = 1, py::arg("max_len") = 8);

    py::class_<HeadStack>(m, "HeadStack")
        .def_static("init", &HeadStack::init, py::arg("k"), py::arg("s"), py::arg("S"),
                    py::arg("d"), py::arg("seed"), py::arg("use_bias") = false)
        .def_readonly("k", &HeadStack::k)
        .def_readonly("s", &HeadStack::s)
        .def_readonly("S", &HeadStack::S)
        .def_readonly("d", &HeadStack::d);

    py::class_<CharLogits>(m, "CharLogits")
        .def_readonly("per_head", &CharLogits::per_head);

    m.def("forward_chars",
          [](const HeadStack& st, const std::vector<double>& h) { return forward_chars(st, h); });
    m.def("forward_token",
          [](const HeadStack& st, const std::vector<double>& h) { return forward_token(st, h); });
    m.def("decode_argmax", &decode_argmax);
    m.def("head_entropies", [](const CharLogits& cl) {
        HeadEntropies he = head_entropies(cl);
        return py::make_tuple(he.per_head, he.mean);
    });

    py::class_<TeacherTraceRecord>(m, "TeacherTraceRecord")
        .def_static("make",
                    [](const std::vector<double>& hidden,
                       const std::vector<std::pair<int, double>>& top5) {
                        return TeacherTraceRecord::make(hidden, to_top5(top5));
                    })
        .def_readonly("hidden", &TeacherTraceRecord::hidden)
        .def_readonly("top5", &TeacherTraceRecord::top5);

    m.def("teacher_entropy", &teacher_entropy);

    py::enum_<DecodePath>(m, "DecodePath")
        .value("direct", DecodePath::direct)
        .value("autocorrect", DecodePath::autocorrect)
        .value("autocorrect_empty", DecodePath::autocorrect_empty)
        .value("fallback", DecodePath::fallback);

    py::class_<DecodeOutcome>(m, "DecodeOutcome")
        .def_readonly("raw", &DecodeOutcome::raw)
        .def_readonly("path", &DecodeOutcome::path)
        .def_readonly("token_id", &DecodeOutcome::token_id)
        .def_readonly("text", &DecodeOutcome::text)
        .def_readonly("mean_entropy", &DecodeOutcome::mean_entropy)
        .def_readonly("candidate_count", &DecodeOutcome::candidate_count);

    m.def("decode",
          [](const std::vector<double>& h, const HeadStack& st, const TokenVocab& tv,
             bool autocorrect_on, bool fallback_on, double threshold) {
              CharLogits cl = forward_chars(st, h);
              DecodePolicy policy{autocorrect_on, fallback_on, threshold};
              return decode_with_fallback(h, cl, st, tv, policy);
          },
          py::arg("h"), py::arg("stack"), py::arg("vocab"), py::arg("autocorrect") = true,
          py::arg("fallback") = true, py::arg("threshold") = 0.22);

    py::enum_<MatchKind>(m, "MatchKind")
        .value("full_exact", MatchKind::full_exact)
        .value("k_char", MatchKind::k_char)
        .value("prefix", MatchKind::prefix)
        .value("mismatch", MatchKind::mismatch);

    m.def("classify_match",
          [](const SpelledString& pred, const std::vector<std::pair<int, double>>& top5,
             const TokenVocab& tv) {
              MatchVerdict v = classify_match(pred, to_top5(top5), tv);
              return py::make_tuple(v.kind, v.matched_token, v.prefix_len);
          });

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("weight_decay", &TrainConfig::weight_decay)
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("seed", &TrainConfig::seed);

    m.def("train",
          [](HeadStack& stack, const std::vector<TeacherTraceRecord>& trace, const TokenVocab& tv,
             const TrainConfig& cfg) {
              std::vector<LossBreakdown> log = train(stack, trace, tv, cfg);
              std::vector<std::tuple<double, double, double>> out;
              for (const LossBreakdown& lb : log)
                  out.emplace_back(lb.char_loss, lb.token_loss, lb.total);
              return out;
          });

    m.def("gen_synthetic_trace",
          [](const std::string& mode, int d, double noise_sigma, uint64_t seed, int n,
             const TokenVocab& tv) {
              SyntheticTeacherSpec spec;
              spec.mode = mode == "linear" ? TeacherMode::linear : TeacherMode::separable;
              spec.d = d;
              spec.S = tv.S();
              spec.noise_sigma = noise_sigma;
              spec.seed = seed;
              return gen_synthetic_trace(spec, n, tv);
          },
          py::arg("mode"), py::arg("d"), py::arg("noise_sigma"), py::arg("seed"), py::arg("n"),
          py::arg("vocab"));

    m.def("run_eval",
          [](const HeadStack& stack, const std::vector<TeacherTraceRecord>& trace,
             const TokenVocab& tv, bool autocorrect_on, bool fallback_on, double threshold) {
              DecodePolicy policy{autocorrect_on, fallback_on, threshold};
              EvalReport rep = run_eval(stack, trace, tv, policy);
              py::dict d;
              d["pct_full_exact"] = rep.pct_full_exact;
              d["pct_k_char"] = rep.pct_k_char;
              d["pct_prefix"] = rep.pct_prefix;
              d["pct_mismatch"] = rep.pct_mismatch;
              d["pct_total_match"] = rep.pct_total_match;
              d["fallback_rate"] = rep.fallback_rate;
              d["autocorrect_trigger_rate"] = rep.autocorrect.trigger_rate;
              return d;
          },
          py::arg("stack"), py::arg("trace"), py::arg("vocab"), py::arg("autocorrect") = true,
          py::arg("fallback") = true, py::arg("threshold") = 0.22);

    // Pipeline commands, each driven by a config JSON string.
    m.def("cmd_gen", [](const std::string& config_json) {
        GenResult r = cmd_gen(RunConfig::from_json_text(config_json));
        return py::make_tuple(r.vocab_path, r.trace_path, r.n);
    });
    m.def("cmd_train", [](const std::string& config_json) {
        TrainResult r = cmd_train(RunConfig::from_json_text(config_json));
        return py::make_tuple(r.checkpoint_path, r.log_path);
    });
    m.def("cmd_eval", [](const std::string& config_json) {
        EvalResult r = cmd_eval(RunConfig::from_json_text(config_json));
        return py::make_tuple(r.report_path, r.table_path, r.report.pct_total_match);
    });
}
