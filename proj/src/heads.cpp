#include "spellm/heads.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace spellm {

using nlohmann::json;

HeadStack HeadStack::init(int k, int s, int S, int d, uint64_t seed, bool use_bias) {
    if (k < 1 || s < 2 || S < 1 || d < 1) throw ContractError("HeadStack: bad dimensions");
    HeadStack st;
    st.k = k;
    st.s = s;
    st.S = S;
    st.d = d;
    st.seed = seed;
    st.use_bias = use_bias;
    // Fresh readout heads start near zero so early logits stay close to the
    // uniform distribution instead of confident noise.
    double bound = 0.1 / std::sqrt(double(d));
    SeededRng base(seed);
    st.char_heads.reserve(k);
    for (int i = 0; i < k; ++i) {
        SeededRng rng = base.child(uint64_t(i));
        DenseMatrix m(s, d);
        for (double& w : m.data) w = rng.next_uniform(-bound, bound);
        st.char_heads.push_back(std::move(m));
    }
    SeededRng rng = base.child(0x746f6b656eULL);
    st.token_head = DenseMatrix(S, d);
    for (double& w : st.token_head.data) w = rng.next_uniform(-bound, bound);
    if (use_bias) {
        st.char_bias.assign(k, std::vector<double>(s, 0.0));
        st.token_bias.assign(S, 0.0);
    }
    return st;
}

CharLogits forward_chars(const HeadStack& stack, std::span<const double> h) {
    if (int(h.size()) != stack.d) throw ContractError("forward_chars: hidden width mismatch");
    CharLogits cl;
    cl.per_head.reserve(stack.k);
    for (int i = 0; i < stack.k; ++i) {
        std::vector<double> logits = matvec(stack.char_heads[i], h);
        if (stack.use_bias)
            for (int c = 0; c < stack.s; ++c) logits[c] += stack.char_bias[i][c];
        cl.per_head.push_back(std::move(logits));
    }
    return cl;
}

std::vector<double> forward_token(const HeadStack& stack, std::span<const double> h) {
    if (int(h.size()) != stack.d) throw ContractError("forward_token: hidden width mismatch");
    std::vector<double> logits = matvec(stack.token_head, h);
    if (stack.use_bias)
        for (int t = 0; t < stack.S; ++t) logits[t] += stack.token_bias[t];
    return logits;
}

CharLogits forward_chars_counted(const HeadStack& stack, std::span<const double> h, uint64_t& macs) {
    if (int(h.size()) != stack.d) throw ContractError("forward_chars_counted: width mismatch");
    CharLogits cl;
    cl.per_head.reserve(stack.k);
    for (int i = 0; i < stack.k; ++i)
        cl.per_head.push_back(matvec_counted(stack.char_heads[i], h, macs));
    return cl;
}

std::vector<double> forward_token_counted(const HeadStack& stack, std::span<const double> h,
                                          uint64_t& macs) {
    if (int(h.size()) != stack.d) throw ContractError("forward_token_counted: width mismatch");
    return matvec_counted(stack.token_head, h, macs);
}

SpelledString decode_argmax(const CharLogits& cl) {
    SpelledString out;
    out.reserve(cl.per_head.size());
    for (const std::vector<double>& logits : cl.per_head) {
        int best = 0;
        for (int i = 1; i < int(logits.size()); ++i)
            if (logits[i] > logits[best]) best = i;
        out.push_back(best);
    }
    return out;
}

HeadEntropies head_entropies(const CharLogits& cl) {
    HeadEntropies he;
    he.per_head.reserve(cl.per_head.size());
    double sum = 0.0;
    for (const std::vector<double>& logits : cl.per_head) {
        double h = entropy(softmax(logits));
        he.per_head.push_back(h);
        sum += h;
    }
    he.mean = cl.per_head.empty() ? 0.0 : sum / double(cl.per_head.size());
    return he;
}

namespace {

void dump_weights(std::ofstream& out, const std::vector<double>& data) {
    out << "[";
    for (size_t i = 0; i < data.size(); ++i) {
        if (i) out << ",";
        out << format_f64(data[i]);
    }
    out << "]";
}

}  // namespace

void write_checkpoint(const std::string& path, const HeadStack& stack, const CharVocab& cv) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    json header = {{"format", "spellm-ckpt-v1"}, {"k", stack.k},       {"s", stack.s},
                   {"S", stack.S},               {"d", stack.d},       {"seed", stack.seed},
                   {"use_bias", stack.use_bias}, {"charset", cv.serialized()}};
    // Weights are streamed by hand so every value is a %.17g decimal.
    out << "{\"header\":" << header.dump() << ",\"char_heads\":[";
    for (int i = 0; i < stack.k; ++i) {
        if (i) out << ",";
        dump_weights(out, stack.char_heads[i].data);
    }
    out << "],\"token_head\":";
    dump_weights(out, stack.token_head.data);
    if (stack.use_bias) {
        out << ",\"char_bias\":[";
        for (int i = 0; i < stack.k; ++i) {
            if (i) out << ",";
            dump_weights(out, stack.char_bias[i]);
        }
        out << "],\"token_bias\":";
        dump_weights(out, stack.token_bias);
    }
    out << "}\n";
    if (!out) throw IoError("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what(), 1);
    }
    const json& header = doc.at("header");
    if (header.value("format", "") != "spellm-ckpt-v1")
        throw FormatVersionError("checkpoint format is not spellm-ckpt-v1: " + path);
    Checkpoint ck;
    ck.charset = CharVocab::from_serialized(header.at("charset").get<std::vector<std::string>>());
    HeadStack& st = ck.stack;
    st.k = header.at("k").get<int>();
    st.s = header.at("s").get<int>();
    st.S = header.at("S").get<int>();
    st.d = header.at("d").get<int>();
    st.seed = header.at("seed").get<uint64_t>();
    st.use_bias = header.value("use_bias", false);
    if (st.s != ck.charset.size())
        throw FormatVersionError("checkpoint s does not match charset size: " + path);
    const json& heads = doc.at("char_heads");
    if (int(heads.size()) != st.k) throw TruncatedFileError("checkpoint: missing char heads");
    for (const json& weights : heads) {
        DenseMatrix m(st.s, st.d);
        if (int(weights.size()) != st.s * st.d)
            throw TruncatedFileError("checkpoint: char head weight count mismatch");
        for (size_t i = 0; i < m.data.size(); ++i) m.data[i] = weights[i].get<double>();
        st.char_heads.push_back(std::move(m));
    }
    const json& tok = doc.at("token_head");
    if (int(tok.size()) != st.S * st.d)
        throw TruncatedFileError("checkpoint: token head weight count mismatch");
    st.token_head = DenseMatrix(st.S, st.d);
    for (size_t i = 0; i < st.token_head.data.size(); ++i)
        st.token_head.data[i] = tok[i].get<double>();
    if (st.use_bias) {
        const json& cb = doc.at("char_bias");
        st.char_bias.assign(st.k, std::vector<double>(st.s, 0.0));
        for (int i = 0; i < st.k; ++i)
            for (int c = 0; c < st.s; ++c) st.char_bias[i][c] = cb[i][c].get<double>();
        const json& tb = doc.at("token_bias");
        st.token_bias.resize(st.S);
        for (int t = 0; t < st.S; ++t) st.token_bias[t] = tb[t].get<double>();
    }
    return ck;
}

}  // namespace spellm
