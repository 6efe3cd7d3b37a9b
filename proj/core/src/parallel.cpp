// SPDX-License-Identifier: Apache-2.0

#include "mnnca/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace mnnca {

namespace {

int env_threads() {
  if (const char* s = std::getenv("MNNCA_THREADS")) {
    const int n = std::atoi(s);
    if (n >= 1) return std::min(n, 64);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(std::min(hw, 16u));
}

std::atomic<int> g_override{0};

// Lazily started pool; the calling thread always executes chunk 0. The pool
// is intentionally leaked so process exit never joins blocked workers.
class Pool {
 public:
  static Pool& instance() {
    static Pool* pool = new Pool();
    return *pool;
  }

  void run(int chunks, const std::function<void(int)>& chunk_fn) {
    std::unique_lock<std::mutex> lock(mu_);
    ensure_workers(chunks - 1);
    chunk_fn_ = &chunk_fn;
    total_chunks_ = chunks;
    next_chunk_ = 1;
    remaining_ = chunks - 1;
    ++generation_;
    cv_work_.notify_all();
    lock.unlock();

    chunk_fn(0);

    lock.lock();
    cv_done_.wait(lock, [&] { return remaining_ == 0; });
    chunk_fn_ = nullptr;
  }

 private:
  Pool() = default;

  void ensure_workers(int needed) {
    while (int(workers_.size()) < needed) {
      workers_.emplace_back([this] { worker_loop(); });
      workers_.back().detach();
    }
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    std::unique_lock<std::mutex> lock(mu_);
    for (;;) {
      cv_work_.wait(lock, [&] { return generation_ != seen; });
      seen = generation_;
      while (chunk_fn_ != nullptr && next_chunk_ < total_chunks_) {
        const int chunk = next_chunk_++;
        const auto* fn = chunk_fn_;
        lock.unlock();
        (*fn)(chunk);
        lock.lock();
        if (--remaining_ == 0) cv_done_.notify_one();
      }
    }
  }

  std::mutex mu_;
  std::condition_variable cv_work_;
  std::condition_variable cv_done_;
  std::vector<std::thread> workers_;
  const std::function<void(int)>* chunk_fn_ = nullptr;
  int total_chunks_ = 0;
  int next_chunk_ = 0;
  int remaining_ = 0;
  std::uint64_t generation_ = 0;
};

}  // namespace

int engine_threads() {
  const int o = g_override.load(std::memory_order_relaxed);
  if (o >= 1) return o;
  static const int from_env = env_threads();
  return from_env;
}

void set_engine_threads(int n) {
  g_override.store(n < 1 ? 0 : n, std::memory_order_relaxed);
}

void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  const int threads = int(std::min<std::int64_t>(engine_threads(), n));
  if (threads <= 1) {
    fn(0, n);
    return;
  }
  const std::int64_t chunk = (n + threads - 1) / threads;
  Pool::instance().run(threads, [&](int c) {
    const std::int64_t begin = c * chunk;
    const std::int64_t end = std::min<std::int64_t>(begin + chunk, n);
    if (begin < end) fn(begin, end);
  });
}

}  // namespace mnnca
