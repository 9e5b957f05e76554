#include "shadow_ode/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace shadow_ode {

namespace {

std::atomic<std::size_t> g_override{0};

std::size_t env_limit() {
  const char* env = std::getenv("SHADOW_ODE_THREADS");
  if (env == nullptr || *env == '\0') return 0;
  try {
    const long v = std::stol(env);
    return v > 0 ? static_cast<std::size_t>(v) : 0;
  } catch (const std::exception&) {
    return 0;
  }
}

}  // namespace

std::size_t worker_limit() {
  if (const std::size_t o = g_override.load(); o != 0) return o;
  if (const std::size_t e = env_limit(); e != 0) return e;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void set_worker_limit(std::size_t limit) { g_override.store(limit); }

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(worker_limit(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> failures(count);
  auto body = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) threads.emplace_back(body);
  body();
  for (auto& t : threads) t.join();
  // Lowest failing index wins so the reported error does not depend on scheduling.
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
}

}  // namespace shadow_ode
