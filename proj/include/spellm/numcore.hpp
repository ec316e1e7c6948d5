// Dense linear algebra, probability, and randomness shared by every module.
//
// All training-time math runs in f64. The PRNG is xoshiro256** seeded through
// splitmix64; uniform and gaussian draws use only integer ops, ldexp, and
// fixed-order addition (Irwin-Hall for gaussians), so identical seeds give
// identical streams on any platform.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spellm/common.hpp"

namespace spellm {

struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // row-major, rows*cols entries

    DenseMatrix() = default;
    DenseMatrix(int r, int c) : rows(r), cols(c), data(size_t(r) * c, 0.0) {}

    double& at(int r, int c) { return data[size_t(r) * cols + c]; }
    double at(int r, int c) const { return data[size_t(r) * cols + c]; }
    const double* row(int r) const { return data.data() + size_t(r) * cols; }
    double* row(int r) { return data.data() + size_t(r) * cols; }
};

// Probabilities: non-negative, summing to 1 within 1e-9.
struct ProbVector {
    std::vector<double> values;
};

bool is_valid_prob(const ProbVector& p, double tol = 1e-9);

class SeededRng {
public:
    explicit SeededRng(uint64_t seed);

    uint64_t seed() const { return seed_; }
    uint64_t next_u64();
    double next_double();                    // uniform [0, 1)
    double next_uniform(double lo, double hi);
    double next_gaussian();                  // Irwin-Hall (12 uniforms), mean 0, var 1
    int next_int(int bound);                 // uniform [0, bound)

    // Independent stream derived from (seed, stream); parallel work splits here.
    SeededRng child(uint64_t stream) const;

private:
    uint64_t seed_;
    uint64_t state_[4];
};

// Fisher-Yates over [0, n) driven by rng; deterministic given the seed.
std::vector<int> shuffled_indices(int n, SeededRng& rng);

// out[r] = sum_c m[r,c] * v[c]. Throws ContractError on dimension mismatch.
std::vector<double> matvec(const DenseMatrix& m, std::span<const double> v);

// Same result as matvec but counts every multiply-add into `macs`.
std::vector<double> matvec_counted(const DenseMatrix& m, std::span<const double> v, uint64_t& macs);

// Max-shifted softmax. Throws ContractError on empty input.
ProbVector softmax(std::span<const double> logits);

// log(softmax(logits)), max-shifted.
std::vector<double> log_softmax(std::span<const double> logits);

// Shannon entropy in nats, 0*ln 0 == 0.
double entropy(const ProbVector& p);

// -sum target_i * log softmax(logits)_i. Targets >= 0, need not sum to 1.
double cross_entropy(std::span<const double> logits, std::span<const double> target);

// Product-moment correlation. Throws UndefinedCorrelationError on zero variance,
// ContractError on length mismatch or fewer than two points.
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace spellm
