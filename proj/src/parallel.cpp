#include "rde/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace rde {

namespace {
std::atomic<unsigned> g_threads{0};
}

unsigned default_threads() {
    if (const unsigned t = g_threads.load()) return t;
    if (const char* env = std::getenv("RDE_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (...) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void set_default_threads(unsigned threads) { g_threads.store(threads); }

}  // namespace rde
