#pragma once

#include <cstddef>
#include <functional>

namespace drivelab {

// Fan-out helper for independent per-index work. Results must be written to
// per-index slots; callers reduce them in index order afterwards, so the
// thread count never changes what is computed.
class WorkerPool {
 public:
  // 0 selects std::thread::hardware_concurrency().
  explicit WorkerPool(std::size_t threads = 0);

  std::size_t size() const { return threads_; }

  // Runs fn(i) for every i in [0, n). Rethrows the first exception raised.
  void for_each_index(std::size_t n, const std::function<void(std::size_t)>& fn) const;

 private:
  std::size_t threads_;
};

}  // namespace drivelab
