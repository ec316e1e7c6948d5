#include "spellm/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace spellm {

std::string format_f64(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_f32(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

int worker_count() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* cap = std::getenv("SPELLM_THREADS")) {
        int c = std::atoi(cap);
        if (c >= 1) n = std::min(n, c);
    }
    return n;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
    int workers = std::min(worker_count(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    int chunk = n / workers;
    auto run = [&fn](int lo, int hi) {
        for (int i = lo; i < hi; ++i) fn(i);
    };
    for (int w = 0; w < workers - 1; ++w) pool.emplace_back(run, w * chunk, (w + 1) * chunk);
    run((workers - 1) * chunk, n);
    for (auto& t : pool) t.join();
}

}  // namespace spellm
