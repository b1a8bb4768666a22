#include "fusemetrics/batch.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "fusemetrics/error.hpp"

namespace fusemetrics {

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers < 1) {
    throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
  }
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed = true;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();  // joins
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<metrics::MetricVector> eval_batch(std::span<const metrics::FusionTriple> triples,
                                              const metrics::VanillaWeights& w, int workers) {
  std::vector<metrics::MetricVector> out(triples.size());
  parallel_for(triples.size(), workers,
               [&](std::size_t i) { out[i] = metrics::eval_all(triples[i], w); });
  return out;
}

}  // namespace fusemetrics
