#include "raptor/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace raptor::par {

namespace {
std::atomic<int> g_num_threads{1};
}

void set_num_threads(int n) {
    g_num_threads.store(std::max(1, n));
}

int num_threads() {
    return g_num_threads.load();
}

int hardware_threads() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    const int workers = std::min<std::size_t>(num_threads(), n == 0 ? 1 : n);
    if (workers <= 1 || n < 1024) {
        body(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int w = 1; w < workers; ++w) {
        const std::size_t begin = chunk * w;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&body, begin, end] { body(begin, end); });
    }
    body(0, std::min(n, chunk));
    for (auto& t : pool) t.join();
}

} // namespace raptor::par
