#include "derain/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace derain {
namespace {

int read_thread_cap() {
  if (const char* env = std::getenv("DERAIN_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

thread_local bool g_in_parallel_region = false;

// Minimal persistent pool. One task at a time; run() blocks until the
// range is drained and every helper has left it. Workers claim indices
// through an atomic cursor, so each index runs exactly once.
class Pool {
 public:
  explicit Pool(int threads) {
    for (int i = 0; i < threads - 1; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      shutdown_ = true;
    }
    wake_workers_.notify_all();
    for (auto& w : workers_) w.join();
  }

  void run(int begin, int end, const std::function<void(int)>& fn) {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      task_ = &fn;
      task_end_ = end;
      cursor_.store(begin, std::memory_order_relaxed);
      ++generation_;
    }
    wake_workers_.notify_all();

    drain(fn);  // the caller participates

    std::unique_lock<std::mutex> lock(mutex_);
    done_.wait(lock, [this] { return active_ == 0; });
    task_ = nullptr;
  }

 private:
  void drain(const std::function<void(int)>& fn) {
    g_in_parallel_region = true;
    for (;;) {
      const int i = cursor_.fetch_add(1, std::memory_order_relaxed);
      if (i >= task_end_) break;
      fn(i);
    }
    g_in_parallel_region = false;
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* fn = nullptr;
      {
        std::unique_lock<std::mutex> lock(mutex_);
        wake_workers_.wait(lock, [&] {
          return shutdown_ || (task_ != nullptr && generation_ != seen);
        });
        if (shutdown_) return;
        seen = generation_;
        fn = task_;
        ++active_;
      }
      drain(*fn);
      {
        std::lock_guard<std::mutex> lock(mutex_);
        --active_;
      }
      done_.notify_one();
    }
  }

  std::mutex mutex_;
  std::condition_variable wake_workers_;
  std::condition_variable done_;
  std::vector<std::thread> workers_;
  const std::function<void(int)>* task_ = nullptr;
  int task_end_ = 0;
  std::atomic<int> cursor_{0};
  int active_ = 0;
  std::uint64_t generation_ = 0;
  bool shutdown_ = false;
};

Pool& pool() {
  static Pool instance(worker_threads());
  return instance;
}

}  // namespace

int worker_threads() {
  static const int cap = read_thread_cap();
  return cap;
}

void parallel_for(int begin, int end, const std::function<void(int)>& fn,
                  int grain) {
  const int n = end - begin;
  if (n <= 0) return;
  if (worker_threads() == 1 || n < grain || g_in_parallel_region) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  pool().run(begin, end, fn);
}

}  // namespace derain
