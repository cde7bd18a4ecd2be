#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace roulette {

// Fixed-size pool running index-parallel loops. Work is split into
// contiguous chunks; callers reduce results in index order afterwards, so the
// outcome does not depend on the number of workers.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers = 1) : size_(workers == 0 ? 1 : workers) {
    for (std::size_t i = 1; i < size_; ++i) threads_.emplace_back([this, i] { worker_loop(i); });
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard lock(mutex_);
      stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::size_t size() const { return size_; }

  // Calls fn(i) for every i in [0, n). Rethrows the first exception.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (size_ == 1 || n < 2) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    std::unique_lock lock(mutex_);
    job_ = &fn;
    job_size_ = n;
    pending_ = size_;
    error_ = nullptr;
    ++generation_;
    lock.unlock();
    wake_.notify_all();
    run_chunk(0);
    lock.lock();
    done_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void run_chunk(std::size_t worker) {
    const std::size_t begin = job_size_ * worker / size_;
    const std::size_t end = job_size_ * (worker + 1) / size_;
    try {
      for (std::size_t i = begin; i < end; ++i) (*job_)(i);
    } catch (...) {
      std::lock_guard lock(mutex_);
      if (!error_) error_ = std::current_exception();
    }
    std::lock_guard lock(mutex_);
    if (--pending_ == 0) done_.notify_one();
  }

  void worker_loop(std::size_t worker) {
    std::size_t seen = 0;
    for (;;) {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      lock.unlock();
      run_chunk(worker);
    }
  }

  std::size_t size_;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t job_size_ = 0;
  std::size_t pending_ = 0;
  std::size_t generation_ = 0;
  std::exception_ptr error_;
  bool stop_ = false;
};

}  // namespace roulette
