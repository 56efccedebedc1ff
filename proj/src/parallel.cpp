#include "setproj/parallel.hpp"

#include <algorithm>

namespace setproj {

namespace {
thread_local bool t_inside_pool = false;
}

WorkerPool::WorkerPool(std::size_t threads) : nthreads_(std::max<std::size_t>(1, threads)) {
  for (std::size_t id = 1; id < nthreads_; ++id) {
    workers_.emplace_back([this, id] { worker_loop(id); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& t : workers_) t.join();
}

void WorkerPool::run_block(std::size_t block) {
  const Index n = job_n_;
  const auto nb = static_cast<Index>(nthreads_);
  const Index begin = n * static_cast<Index>(block) / nb;
  const Index end = n * static_cast<Index>(block + 1) / nb;
  if (begin >= end) return;
  try {
    (*job_)(begin, end);
  } catch (...) {
    std::lock_guard lock(mutex_);
    if (!error_) error_ = std::current_exception();
  }
}

void WorkerPool::worker_loop(std::size_t id) {
  t_inside_pool = true;
  std::size_t seen = 0;
  for (;;) {
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
    }
    run_block(id);
    {
      std::lock_guard lock(mutex_);
      if (--pending_ == 0) done_.notify_one();
    }
  }
}

void WorkerPool::parallel_for(Index n, const std::function<void(Index, Index)>& body) {
  if (n <= 0) return;
  if (nthreads_ == 1 || t_inside_pool || n == 1) {
    body(0, n);
    return;
  }
  {
    std::lock_guard lock(mutex_);
    job_ = &body;
    job_n_ = n;
    error_ = nullptr;
    pending_ = nthreads_ - 1;
    ++generation_;
  }
  wake_.notify_all();
  t_inside_pool = true;
  run_block(0);
  t_inside_pool = false;
  std::unique_lock lock(mutex_);
  done_.wait(lock, [&] { return pending_ == 0; });
  job_ = nullptr;
  if (error_) std::rethrow_exception(error_);
}

void WorkerPool::for_each(Index n, const std::function<void(Index)>& body) {
  parallel_for(n, [&](Index b, Index e) {
    for (Index i = b; i < e; ++i) body(i);
  });
}

}  // namespace setproj
