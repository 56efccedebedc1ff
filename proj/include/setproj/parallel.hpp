#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "setproj/grid.hpp"

namespace setproj {

/// Fixed-size pool running static block partitions of an index range.
///
/// Block boundaries depend only on the range length and the worker count, and
/// every index is handled by exactly one block, so kernels that write disjoint
/// outputs are bit-identical for any worker count. Calls made from inside a
/// running block execute inline.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t threads = 1);
  ~WorkerPool();

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t threads() const { return nthreads_; }

  /// Runs body(begin, end) over a partition of [0, n).
  void parallel_for(Index n, const std::function<void(Index, Index)>& body);

  /// Runs body(i) for each i in [0, n), one index per task.
  void for_each(Index n, const std::function<void(Index)>& body);

 private:
  void worker_loop(std::size_t id);
  void run_block(std::size_t block);

  std::size_t nthreads_;
  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(Index, Index)>* job_ = nullptr;
  Index job_n_ = 0;
  std::size_t generation_ = 0;
  std::size_t pending_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

}  // namespace setproj
