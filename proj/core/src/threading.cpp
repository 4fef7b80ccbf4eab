#include "stereo/threading.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace stereo {
namespace {

// Set while a thread is executing a parallel_for slice; nested calls run
// inline instead of waiting on workers that may themselves be busy.
thread_local bool tl_in_parallel = false;

std::size_t resolve_thread_count() {
  if (const char* env = std::getenv("STEREO_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Persistent pool; tasks are (begin, end) range invocations of a shared fn.
class Pool {
 public:
  Pool() : workers_(thread_count() > 1 ? thread_count() - 1 : 0) {
    for (std::size_t i = 0; i < workers_.size(); ++i) {
      workers_[i] = std::thread([this, i] { worker_loop(i + 1); });
    }
  }

  ~Pool() {
    {
      std::unique_lock<std::mutex> lk(m_);
      stop_ = true;
      ++epoch_;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  void run(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    const std::size_t parts = workers_.size() + 1;
    {
      std::unique_lock<std::mutex> lk(m_);
      fn_ = &fn;
      n_ = n;
      parts_ = parts;
      pending_ = workers_.size();
      ++epoch_;
    }
    cv_.notify_all();
    run_slice(0, parts, n, fn);
    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    fn_ = nullptr;
  }

 private:
  static void run_slice(std::size_t part, std::size_t parts, std::size_t n,
                        const std::function<void(std::size_t, std::size_t)>& fn) {
    const std::size_t chunk = (n + parts - 1) / parts;
    const std::size_t b = part * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b < e) {
      tl_in_parallel = true;
      fn(b, e);
      tl_in_parallel = false;
    }
  }

  void worker_loop(std::size_t part) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t, std::size_t)>* fn = nullptr;
      std::size_t n = 0, parts = 0;
      {
        std::unique_lock<std::mutex> lk(m_);
        cv_.wait(lk, [&] { return epoch_ != seen; });
        seen = epoch_;
        if (stop_) return;
        fn = fn_;
        n = n_;
        parts = parts_;
      }
      if (fn) run_slice(part, parts, n, *fn);
      {
        std::unique_lock<std::mutex> lk(m_);
        if (--pending_ == 0) done_cv_.notify_one();
      }
    }
  }

  std::vector<std::thread> workers_;
  std::mutex m_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t, std::size_t)>* fn_ = nullptr;
  std::size_t n_ = 0, parts_ = 0, pending_ = 0;
  std::uint64_t epoch_ = 0;
  bool stop_ = false;
};

Pool& pool() {
  static Pool p;
  return p;
}

}  // namespace

std::size_t thread_count() {
  static std::size_t n = resolve_thread_count();
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_per_thread) {
  if (n == 0) return;
  if (tl_in_parallel || thread_count() == 1 || n < 2 * min_per_thread) {
    fn(0, n);
    return;
  }
  pool().run(n, fn);
}

}  // namespace stereo
