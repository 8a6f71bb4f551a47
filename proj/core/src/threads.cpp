#include "spckd/threads.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace spckd {
namespace {

int default_count() {
  if (const char* env = std::getenv("SPCKD_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? static_cast<int>(hw) : 1;
}

std::atomic<int> g_override{0};

}  // namespace

int thread_count() {
  const int o = g_override.load(std::memory_order_relaxed);
  if (o >= 1) return o;
  static const int def = default_count();
  return def;
}

void set_thread_count(int n) {
  g_override.store(n >= 1 ? n : 0, std::memory_order_relaxed);
}

}  // namespace spckd
