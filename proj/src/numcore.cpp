#include "spellm/numcore.hpp"

#include <cmath>

namespace spellm {
namespace {

inline uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

bool is_valid_prob(const ProbVector& p, double tol) {
    double sum = 0.0;
    for (double v : p.values) {
        if (!(v >= 0.0) || !std::isfinite(v)) return false;
        sum += v;
    }
    return std::abs(sum - 1.0) <= tol;
}

SeededRng::SeededRng(uint64_t seed) : seed_(seed) {
    uint64_t x = seed;
    for (auto& s : state_) s = splitmix64(x);
    // xoshiro forbids the all-zero state
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 0x9E3779B97F4A7C15ULL;
}

uint64_t SeededRng::next_u64() {
    // xoshiro256**
    uint64_t result = rotl(state_[1] * 5, 7) * 9;
    uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double SeededRng::next_double() {
    return std::ldexp(double(next_u64() >> 11), -53);
}

double SeededRng::next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

double SeededRng::next_gaussian() {
    double acc = 0.0;
    for (int i = 0; i < 12; ++i) acc += next_double();
    return acc - 6.0;
}

int SeededRng::next_int(int bound) {
    if (bound <= 0) throw ContractError("next_int: bound must be positive");
    return int((static_cast<unsigned __int128>(next_u64()) * uint64_t(bound)) >> 64);
}

SeededRng SeededRng::child(uint64_t stream) const {
    uint64_t x = seed_ ^ (0xD1B54A32D192ED03ULL * (stream + 1));
    return SeededRng(splitmix64(x));
}

std::vector<int> shuffled_indices(int n, SeededRng& rng) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.next_int(i + 1)]);
    return idx;
}

std::vector<double> matvec(const DenseMatrix& m, std::span<const double> v) {
    if (int(v.size()) != m.cols)
        throw ContractError("matvec: vector length " + std::to_string(v.size()) +
                            " does not match cols " + std::to_string(m.cols));
    std::vector<double> out(m.rows);
    for (int r = 0; r < m.rows; ++r) {
        const double* row = m.row(r);
        double acc = 0.0;
        for (int c = 0; c < m.cols; ++c) acc += row[c] * v[c];
        out[r] = acc;
    }
    return out;
}

std::vector<double> matvec_counted(const DenseMatrix& m, std::span<const double> v, uint64_t& macs) {
    if (int(v.size()) != m.cols) throw ContractError("matvec_counted: dimension mismatch");
    std::vector<double> out(m.rows);
    for (int r = 0; r < m.rows; ++r) {
        const double* row = m.row(r);
        double acc = 0.0;
        for (int c = 0; c < m.cols; ++c) {
            acc += row[c] * v[c];
            ++macs;
        }
        out[r] = acc;
    }
    return out;
}

ProbVector softmax(std::span<const double> logits) {
    if (logits.empty()) throw ContractError("softmax: empty input");
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    ProbVector p;
    p.values.resize(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p.values[i] = std::exp(logits[i] - mx);
        sum += p.values[i];
    }
    for (double& v : p.values) v /= sum;
    return p;
}

std::vector<double> log_softmax(std::span<const double> logits) {
    if (logits.empty()) throw ContractError("log_softmax: empty input");
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    double sum = 0.0;
    for (double l : logits) sum += std::exp(l - mx);
    double lse = mx + std::log(sum);
    std::vector<double> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

double entropy(const ProbVector& p) {
    double h = 0.0;
    for (double v : p.values)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

double cross_entropy(std::span<const double> logits, std::span<const double> target) {
    if (logits.size() != target.size())
        throw ContractError("cross_entropy: logits/target length mismatch");
    std::vector<double> lsm = log_softmax(logits);
    double loss = 0.0;
    for (size_t i = 0; i < target.size(); ++i)
        if (target[i] != 0.0) loss -= target[i] * lsm[i];
    return loss;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ContractError("pearson: length mismatch");
    if (x.size() < 2) throw ContractError("pearson: need at least two points");
    size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw UndefinedCorrelationError("pearson: zero variance in input series");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace spellm
