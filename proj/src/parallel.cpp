#include "drolab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace drolab {

std::size_t thread_count() {
  if (const char* env = std::getenv("DROLAB_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
      // fall through to the hardware default
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void run_blocks(std::size_t n_blocks, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(thread_count(), n_blocks);
  if (workers <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }

  std::vector<std::exception_ptr> errors(n_blocks);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t b = next++; b < n_blocks; b = next++) {
      try {
        fn(b);
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace drolab
