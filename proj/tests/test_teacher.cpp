#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "spellm/teacher.hpp"

using namespace spellm;

namespace {

TokenVocab test_vocab(int S, uint64_t seed = 7, int k = 6) {
    return TokenVocab(synth_token_raws(S, seed), k, CharVocab::default_latin());
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE("teacher") {

TEST_CASE("record factory sorts, snaps, and validates") {
    TeacherTraceRecord rec = TeacherTraceRecord::make(
        {0.1, 0.2}, {{{3, 0.2}, {1, 0.5}, {2, 0.1}, {4, 0.1}, {0, 0.05}}});
    CHECK(rec.top5[0].first == 1);
    CHECK(rec.top5[1].first == 3);
    // equal probabilities tie toward the lower id
    CHECK(rec.top5[2].first == 2);
    CHECK(rec.top5[3].first == 4);
    CHECK(rec.hidden[0] == double(float(0.1)));

    CHECK_THROWS_AS(TeacherTraceRecord::make(
                        {0.0}, {{{0, 0.5}, {1, 0.4}, {2, 0.3}, {3, 0.2}, {4, 0.1}}}),
                    ContractError);  // mass over 1
    CHECK_THROWS_AS(TeacherTraceRecord::make(
                        {0.0}, {{{0, 0.5}, {1, 0.0}, {2, 0.1}, {3, 0.05}, {4, 0.01}}}),
                    ContractError);  // zero probability
    CHECK_THROWS_AS(TeacherTraceRecord::make(
                        {1e300}, {{{0, 0.5}, {1, 0.2}, {2, 0.1}, {3, 0.05}, {4, 0.01}}}),
                    ContractError);  // overflows f32 storage
}

TEST_CASE("separable mode with zero noise plants the top-1 token") {
    TokenVocab tv = test_vocab(64);
    SyntheticTeacherSpec spec;
    spec.mode = TeacherMode::separable;
    spec.d = 32;
    spec.S = tv.S();
    spec.noise_sigma = 0.0;
    spec.seed = 5;
    std::vector<int> planted;
    std::vector<TeacherTraceRecord> records = gen_synthetic_trace(spec, 500, tv, &planted);
    for (int i = 0; i < 500; ++i) CHECK(records[i].top5[0].first == planted[i]);
}

TEST_CASE("same seed gives identical streams, different seed differs") {
    TokenVocab tv = test_vocab(32);
    SyntheticTeacherSpec spec;
    spec.d = 16;
    spec.S = tv.S();
    spec.seed = 9;
    std::vector<TeacherTraceRecord> a = gen_synthetic_trace(spec, 50, tv);
    std::vector<TeacherTraceRecord> b = gen_synthetic_trace(spec, 50, tv);
    CHECK(a == b);
    spec.seed = 10;
    CHECK(gen_synthetic_trace(spec, 50, tv) != a);
}

TEST_CASE("default-noise separable traces keep the planted token on top") {
    // oracle: regenerate with label logging and measure the top-1 hit rate
    TokenVocab tv = test_vocab(128);
    SyntheticTeacherSpec spec;
    spec.d = 64;
    spec.S = tv.S();
    spec.noise_sigma = 0.05;
    spec.seed = 40;
    std::vector<int> planted;
    std::vector<TeacherTraceRecord> records = gen_synthetic_trace(spec, 10000, tv, &planted);
    int hits = 0;
    for (int i = 0; i < 10000; ++i)
        if (records[i].top5[0].first == planted[i]) ++hits;
    CHECK(double(hits) / 10000.0 > 0.99);
}

TEST_CASE("record streams slice: skip is disjoint and stable") {
    TokenVocab tv = test_vocab(32);
    SyntheticTeacherSpec spec;
    spec.d = 16;
    spec.S = tv.S();
    spec.seed = 9;
    std::vector<TeacherTraceRecord> all = gen_synthetic_trace(spec, 30, tv);
    std::vector<TeacherTraceRecord> head = gen_synthetic_trace(spec, 20, tv);
    std::vector<TeacherTraceRecord> tail = gen_synthetic_trace(spec, 10, tv, nullptr, 20);
    for (int i = 0; i < 20; ++i) CHECK(all[i] == head[i]);
    for (int i = 0; i < 10; ++i) CHECK(all[20 + i] == tail[i]);
}

TEST_CASE("separable mode rejects excessive noise") {
    TokenVocab tv = test_vocab(16);
    SyntheticTeacherSpec spec;
    spec.d = 16;
    spec.S = tv.S();
    spec.noise_sigma = kMaxSeparableNoise + 0.01;
    CHECK_THROWS_AS(gen_synthetic_trace(spec, 10, tv), ContractError);
}

TEST_CASE("linear mode is deterministic and spreads entropy") {
    TokenVocab tv = test_vocab(64);
    SyntheticTeacherSpec spec;
    spec.mode = TeacherMode::linear;
    spec.d = 16;
    spec.S = tv.S();
    spec.seed = 11;
    std::vector<TeacherTraceRecord> a = gen_synthetic_trace(spec, 200, tv);
    CHECK(a == gen_synthetic_trace(spec, 200, tv));
    double lo = 1e9, hi = -1e9;
    for (const TeacherTraceRecord& rec : a) {
        double h = teacher_entropy(rec);
        lo = std::min(lo, h);
        hi = std::max(hi, h);
    }
    CHECK(hi > lo);  // non-degenerate entropy spread
    CHECK(hi <= std::log(5.0) + 1e-9);
}

TEST_CASE("teacher entropy: peaked, uniform, formula oracle") {
    auto rec = [](std::array<std::pair<int, double>, 5> t5) {
        return TeacherTraceRecord::make({0.0}, t5);
    };
    TeacherTraceRecord peaked =
        rec({{{0, 0.9996}, {1, 1e-4}, {2, 1e-4}, {3, 1e-4}, {4, 1e-4}}});
    CHECK(teacher_entropy(peaked) < 0.01);

    TeacherTraceRecord uniform = rec({{{0, 0.2}, {1, 0.2}, {2, 0.2}, {3, 0.2}, {4, 0.2}}});
    CHECK(teacher_entropy(uniform) == doctest::Approx(std::log(5.0)).epsilon(1e-12));

    TeacherTraceRecord mixed = rec({{{0, 0.4}, {1, 0.3}, {2, 0.15}, {3, 0.1}, {4, 0.05}}});
    double expect = oracle::direct_entropy({0.4, 0.3, 0.15, 0.1, 0.05});
    CHECK(expect == doctest::Approx(1.3923212547574294).epsilon(1e-12));
    CHECK(teacher_entropy(mixed) == doctest::Approx(expect).epsilon(1e-12));
    // renormalized and raw agree when mass is exactly 1
    CHECK(teacher_entropy_raw(mixed) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("trace files round trip exactly") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "spellm_trace_test";
    fs::create_directories(dir);
    std::string path = (dir / "trace.jsonl").string();

    TokenVocab tv = test_vocab(32);
    SeededRng rng(3);
    std::vector<TeacherTraceRecord> records;
    for (int i = 0; i < 40; ++i) {
        std::vector<double> h(8);
        for (double& x : h) x = rng.next_gaussian();
        std::array<std::pair<int, double>, 5> t5;
        double remaining = 1.0;
        for (int j = 0; j < 5; ++j) {
            double p = remaining * rng.next_uniform(0.05, 0.5);
            t5[j] = {rng.next_int(tv.S()), p};
            remaining -= p;
            for (int l = 0; l < j; ++l)
                if (t5[l].first == t5[j].first) t5[j].first = (t5[j].first + 7 + l) % tv.S();
        }
        records.push_back(TeacherTraceRecord::make(std::move(h), t5));
    }
    write_trace(path, records, 8, tv.content_sha256());
    std::vector<TeacherTraceRecord> loaded = read_trace(path, tv.content_sha256());
    CHECK(loaded == records);

    // empty trace: header only
    write_trace(path, {}, 8, tv.content_sha256());
    CHECK(read_trace(path).empty());

    fs::remove_all(dir);
}

TEST_CASE("trace file errors are distinct and name the line") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "spellm_trace_errs";
    fs::create_directories(dir);
    std::string path = (dir / "trace.jsonl").string();

    TokenVocab tv = test_vocab(16);
    SyntheticTeacherSpec spec;
    spec.d = 16;
    spec.S = tv.S();
    spec.seed = 2;
    std::vector<TeacherTraceRecord> records = gen_synthetic_trace(spec, 3, tv);
    write_trace(path, records, 16, tv.content_sha256());

    CHECK_THROWS_AS(read_trace(path, std::string(64, '0')), VocabHashMismatchError);

    // corrupt the second record line (line 3 of the file)
    std::string text = slurp(path);
    size_t first = text.find('\n');
    size_t second = text.find('\n', first + 1);
    size_t third = text.find('\n', second + 1);
    std::string corrupted = text.substr(0, second + 1) + "{broken\n" + text.substr(third + 1);
    std::ofstream(path, std::ios::binary) << corrupted;
    try {
        read_trace(path);
        CHECK(false);
    } catch (const ParseError& e) {
        CHECK(e.line == 3);
    }

    // truncated body vs header count
    std::string truncated = text.substr(0, third + 1);
    std::ofstream(path, std::ios::binary) << truncated;
    CHECK_THROWS_AS(read_trace(path), TruncatedFileError);

    // wrong format version
    std::ofstream(path, std::ios::binary)
        << "{\"format\":\"spellm-trace-v2\",\"d\":16,\"vocab_sha256\":\"x\",\"count\":0}\n";
    CHECK_THROWS_AS(read_trace(path), FormatVersionError);

    fs::remove_all(dir);
}

TEST_CASE("round trip holds on arbitrary factory-built records") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "spellm_trace_prop";
    fs::create_directories(dir);
    std::string path = (dir / "t.jsonl").string();
    TokenVocab tv = test_vocab(100);
    SeededRng rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        int n = rng.next_int(8);
        int d = 1 + rng.next_int(12);
        std::vector<TeacherTraceRecord> records;
        for (int i = 0; i < n; ++i) {
            std::vector<double> h(d);
            for (double& x : h) x = rng.next_uniform(-1e4, 1e4);
            std::array<std::pair<int, double>, 5> t5;
            for (int j = 0; j < 5; ++j) t5[j] = {j * 7 + rng.next_int(5), 0.19};
            for (int j = 0; j < 5; ++j) t5[j].first = j * 11 + 3;  // distinct
            records.push_back(TeacherTraceRecord::make(std::move(h), t5));
        }
        write_trace(path, records, d, tv.content_sha256());
        CHECK(read_trace(path) == records);
    }
    fs::remove_all(dir);
}

}  // TEST_SUITE
