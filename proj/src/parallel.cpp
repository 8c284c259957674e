#include "weaksep/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace weaksep {
namespace {

std::atomic<int> g_max_threads{0};
thread_local bool t_in_parallel = false;

int default_threads() {
  if (const char* env = std::getenv("WEAKSEP_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

}  // namespace

void set_max_threads(int n) { g_max_threads.store(n > 0 ? n : 0); }

int max_threads() {
  int v = g_max_threads.load();
  return v >= 1 ? v : default_threads();
}

void parallel_for(int begin, int end, const std::function<void(int)>& body) {
  int count = end - begin;
  if (count <= 0) return;
  int workers = std::min(max_threads(), count);
  if (workers <= 1 || t_in_parallel) {
    for (int i = begin; i < end; ++i) body(i);
    return;
  }

  std::atomic<int> next{begin};
  std::mutex err_mutex;
  std::exception_ptr error;
  auto work = [&]() {
    t_in_parallel = true;
    try {
      while (true) {
        int i = next.fetch_add(1);
        if (i >= end) break;
        {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (error) break;
        }
        body(i);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mutex);
      if (!error) error = std::current_exception();
    }
    t_in_parallel = false;
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace weaksep
