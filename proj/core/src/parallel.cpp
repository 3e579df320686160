#include "barrier/parallel.hpp"

#include <atomic>
#include <cstdlib>

namespace barrier {

namespace {
std::atomic<int> g_threads{0};
}

void set_thread_count(int k) { g_threads = k; }

int thread_count() {
    int k = g_threads.load();
    if (k > 0) return k;
    if (const char* env = std::getenv("BARRIER_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace barrier
