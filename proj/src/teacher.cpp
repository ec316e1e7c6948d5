#include "spellm/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace spellm {

using nlohmann::json;

TeacherTraceRecord TeacherTraceRecord::make(std::vector<double> hidden,
                                            std::array<std::pair<int, double>, 5> top5) {
    TeacherTraceRecord rec;
    rec.hidden = std::move(hidden);
    for (double& v : rec.hidden) {
        v = double(float(v));
        if (!std::isfinite(v)) throw ContractError("trace record: non-finite hidden value");
    }
    std::sort(top5.begin(), top5.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    double sum = 0.0;
    for (auto& [id, p] : top5) {
        if (id < 0) throw ContractError("trace record: negative token id");
        if (!(p > 0.0) || p > 1.0) throw ContractError("trace record: probability outside (0,1]");
        sum += p;
    }
    if (sum > 1.0 + 1e-9) throw ContractError("trace record: top-5 mass exceeds 1");
    rec.top5 = top5;
    return rec;
}

namespace {

void random_unit(std::vector<double>& v, SeededRng& rng) {
    double norm2 = 0.0;
    for (double& x : v) {
        x = rng.next_gaussian();
        norm2 += x * x;
    }
    double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
}

// Unit-norm embeddings whose direction encodes the token's spelling, the way
// spelling probes read real final-layer states: one direction per
// (position, char) over the first kSpellingComponents characters, one
// length-indicator direction, and a personal component. Pairwise dots stay
// capped at kSeparationMaxDot.
std::vector<std::vector<double>> make_embeddings(const TokenVocab& tv, int d, SeededRng& rng) {
    const int cap = kSpellingComponents;
    const double personal_weight = 0.5;
    const int s = tv.charset().size();
    std::vector<std::vector<double>> directions(size_t(cap) * s, std::vector<double>(d));
    for (auto& dir : directions) random_unit(dir, rng);
    std::vector<std::vector<double>> length_dirs(cap + 1, std::vector<double>(d));
    for (auto& dir : length_dirs) random_unit(dir, rng);

    std::vector<SpelledString> capped_all;
    capped_all.reserve(tv.S());
    for (int t = 0; t < tv.S(); ++t)
        capped_all.push_back(spell(tv.entry(t).raw, cap, tv.charset()));

    auto project_out = [d](std::vector<double>& dir,
                           const std::vector<std::vector<double>*>& basis) {
        for (const std::vector<double>* prev : basis) {
            double dot = 0.0;
            for (int j = 0; j < d; ++j) dot += dir[j] * (*prev)[j];
            for (int j = 0; j < d; ++j) dir[j] -= dot * (*prev)[j];
        }
        double norm2 = 0.0;
        for (double x : dir) norm2 += x * x;
        if (norm2 < 1e-12) return false;
        double inv = 1.0 / std::sqrt(norm2);
        for (double& x : dir) x *= inv;
        return true;
    };

    // Length indicators are mutually orthonormal (padding classification is a
    // disjoint OR over them, so it carries no cross-length leakage), and each
    // position's occurring characters are orthonormalized against that block
    // plus their same-position predecessors. Leftovers past the d available
    // axes keep their random draws.
    std::vector<std::vector<double>*> length_block;
    for (auto& dir : length_dirs)
        if (int(length_block.size()) < d && project_out(dir, length_block))
            length_block.push_back(&dir);
    for (int i = 0; i < cap; ++i) {
        std::vector<char> occurs(s, 0);
        for (const SpelledString& sp : capped_all) occurs[sp[i]] = 1;
        std::vector<std::vector<double>*> basis = length_block;
        for (int c = 0; c < s && int(basis.size()) < d; ++c) {
            if (!occurs[c] || c == kPadIndex) continue;
            std::vector<double>& dir = directions[size_t(i) * s + c];
            if (project_out(dir, basis)) basis.push_back(&dir);
        }
    }

    std::vector<std::vector<double>> emb;
    emb.reserve(tv.S());
    std::vector<double> personal(d), v(d);
    for (int t = 0; t < tv.S(); ++t) {
        const SpelledString& capped = capped_all[t];
        int len = 0;
        while (len < cap && capped[len] != kPadIndex) ++len;
        std::vector<double> base = length_dirs[len];
        for (int i = 0; i < len; ++i) {
            const std::vector<double>& dir = directions[size_t(i) * s + capped[i]];
            for (int j = 0; j < d; ++j) base[j] += dir[j];
        }
        for (int attempt = 0; attempt < 1000; ++attempt) {
            random_unit(personal, rng);
            double norm2 = 0.0;
            for (int j = 0; j < d; ++j) {
                v[j] = base[j] + personal_weight * personal[j];
                norm2 += v[j] * v[j];
            }
            double inv = 1.0 / std::sqrt(norm2);
            for (double& x : v) x *= inv;
            bool ok = true;
            for (const std::vector<double>& prev : emb) {
                double dot = 0.0;
                for (int j = 0; j < d; ++j) dot += v[j] * prev[j];
                if (dot > kSeparationMaxDot) {
                    ok = false;
                    break;
                }
            }
            if (ok) break;
            if (attempt == 999)
                throw ContractError("separable teacher: cannot separate embeddings; raise d");
        }
        emb.push_back(v);
    }
    return emb;
}

std::array<std::pair<int, double>, 5> top5_of(const std::vector<double>& logits) {
    ProbVector p = softmax(logits);
    std::vector<int> ids(p.values.size());
    for (size_t i = 0; i < ids.size(); ++i) ids[i] = int(i);
    std::partial_sort(ids.begin(), ids.begin() + 5, ids.end(), [&](int a, int b) {
        if (p.values[a] != p.values[b]) return p.values[a] > p.values[b];
        return a < b;
    });
    std::array<std::pair<int, double>, 5> out;
    for (int i = 0; i < 5; ++i) out[i] = {ids[i], std::max(p.values[ids[i]], 1e-300)};
    return out;
}

}  // namespace

std::vector<TeacherTraceRecord> gen_synthetic_trace(const SyntheticTeacherSpec& spec, int n,
                                                    const TokenVocab& tv,
                                                    std::vector<int>* planted_out, int skip) {
    if (n < 1) throw ContractError("gen_synthetic_trace: n must be >= 1");
    if (skip < 0) throw ContractError("gen_synthetic_trace: negative skip");
    if (spec.S != tv.S()) throw ContractError("gen_synthetic_trace: spec.S != vocab size");
    if (spec.S < 5) throw ContractError("gen_synthetic_trace: need at least 5 tokens");
    if (spec.noise_sigma < 0.0) throw ContractError("gen_synthetic_trace: negative noise");
    if (spec.mode == TeacherMode::separable && spec.noise_sigma >= kMaxSeparableNoise)
        throw ContractError("gen_synthetic_trace: separable mode needs noise_sigma < " +
                            std::to_string(kMaxSeparableNoise));

    SeededRng base(spec.seed);
    SeededRng rec_base = base.child(2);
    std::vector<TeacherTraceRecord> records;
    records.reserve(n);
    if (planted_out) planted_out->clear();

    if (spec.mode == TeacherMode::separable) {
        SeededRng emb_rng = base.child(1);
        std::vector<std::vector<double>> emb = make_embeddings(tv, spec.d, emb_rng);
        std::vector<double> logits(spec.S);
        // Stored hidden states carry large coordinates (RMS ~ kHiddenCoordRms,
        // like real final-layer activations); the teacher softmax runs on
        // unit-sphere dots so its probabilities do not depend on that scale.
        const double hidden_scale = kHiddenCoordRms * std::sqrt(double(spec.d));
        for (int i = skip; i < skip + n; ++i) {
            SeededRng rec_rng = rec_base.child(uint64_t(i));
            int target = rec_rng.next_int(spec.S);
            std::vector<double> h = emb[target];
            for (double& x : h) x += spec.noise_sigma * rec_rng.next_gaussian();
            for (int t = 0; t < spec.S; ++t) {
                double dot = 0.0;
                for (int c = 0; c < spec.d; ++c) dot += emb[t][c] * h[c];
                logits[t] = kTeacherGain * dot;
            }
            for (double& x : h) x *= hidden_scale;
            records.push_back(TeacherTraceRecord::make(std::move(h), top5_of(logits)));
            if (planted_out) planted_out->push_back(target);
        }
    } else {
        SeededRng w_rng = base.child(1);
        DenseMatrix teacher(spec.S, spec.d);
        double scale = 2.0 / std::sqrt(double(spec.d));
        for (double& w : teacher.data) w = scale * w_rng.next_gaussian();
        for (int i = skip; i < skip + n; ++i) {
            SeededRng rec_rng = rec_base.child(uint64_t(i));
            std::vector<double> h(spec.d);
            for (double& x : h) x = rec_rng.next_gaussian();
            std::vector<double> logits = matvec(teacher, h);
            auto top5 = top5_of(logits);
            records.push_back(TeacherTraceRecord::make(std::move(h), top5));
            if (planted_out) planted_out->push_back(top5[0].first);
        }
    }
    return records;
}

void write_trace(const std::string& path, const std::vector<TeacherTraceRecord>& records,
                 int d, const std::string& vocab_sha256) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    json header = {{"format", "spellm-trace-v1"},
                   {"d", d},
                   {"vocab_sha256", vocab_sha256},
                   {"count", int(records.size())}};
    out << header.dump() << "\n";
    for (const TeacherTraceRecord& rec : records) {
        out << "{\"h\":[";
        for (size_t i = 0; i < rec.hidden.size(); ++i) {
            if (i) out << ",";
            out << format_f32(rec.hidden[i]);
        }
        out << "],\"top5\":[";
        for (int i = 0; i < 5; ++i) {
            if (i) out << ",";
            out << "[" << rec.top5[i].first << "," << format_f64(rec.top5[i].second) << "]";
        }
        out << "]}\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

TraceHeader read_trace_header(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open trace: " + path);
    std::string line;
    if (!std::getline(in, line)) throw TruncatedFileError("trace has no header: " + path);
    json header;
    try {
        header = json::parse(line);
    } catch (const json::exception& e) {
        throw ParseError(std::string("trace header: ") + e.what(), 1);
    }
    if (header.value("format", "") != "spellm-trace-v1")
        throw FormatVersionError("trace format is not spellm-trace-v1: " + path);
    TraceHeader h;
    h.d = header.at("d").get<int>();
    h.vocab_sha256 = header.at("vocab_sha256").get<std::string>();
    h.count = header.at("count").get<int>();
    return h;
}

std::vector<TeacherTraceRecord> read_trace(const std::string& path,
                                           std::optional<std::string> expected_vocab_sha256) {
    TraceHeader header = read_trace_header(path);
    if (expected_vocab_sha256 && header.vocab_sha256 != *expected_vocab_sha256)
        throw VocabHashMismatchError("trace was built against a different vocab: " + path);

    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::getline(in, line);  // header already parsed
    std::vector<TeacherTraceRecord> records;
    records.reserve(header.count);
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
            std::vector<double> h = rec.at("h").get<std::vector<double>>();
            if (int(h.size()) != header.d) throw ParseError("hidden width mismatch", line_no);
            for (double& v : h) v = double(float(v));  // snap to stored f32 precision
            const json& t5 = rec.at("top5");
            if (t5.size() != 5) throw ParseError("top5 must have 5 entries", line_no);
            std::array<std::pair<int, double>, 5> top5;
            for (int i = 0; i < 5; ++i)
                top5[i] = {t5[i][0].get<int>(), t5[i][1].get<double>()};
            records.push_back(TeacherTraceRecord::make(std::move(h), top5));
        } catch (const json::exception& e) {
            throw ParseError(std::string("trace record: ") + e.what(), line_no);
        } catch (const ContractError& e) {
            throw ParseError(std::string("trace record: ") + e.what(), line_no);
        }
    }
    if (int(records.size()) != header.count)
        throw TruncatedFileError("trace body has " + std::to_string(records.size()) +
                                 " records but header says " + std::to_string(header.count) +
                                 ": " + path);
    return records;
}

double teacher_entropy(const TeacherTraceRecord& rec) {
    double sum = 0.0;
    for (const auto& [id, p] : rec.top5) sum += p;
    ProbVector p;
    p.values.reserve(5);
    for (const auto& [id, prob] : rec.top5) p.values.push_back(prob / sum);
    return entropy(p);
}

double teacher_entropy_raw(const TeacherTraceRecord& rec) {
    double h = 0.0;
    for (const auto& [id, p] : rec.top5)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

}  // namespace spellm
