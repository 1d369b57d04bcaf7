#pragma once

#include <exception>
#include <mutex>

namespace attnmask {

// Sets the OpenMP team size for subsequent kernels. n <= 0 keeps the runtime default.
void set_jobs(int n);
int jobs();

// Collects the first exception thrown inside an OpenMP region so it can be
// rethrown on the calling thread once the region ends.
class ExceptionSlot {
 public:
  template <typename F>
  void run(F&& f) noexcept {
    try {
      f();
    } catch (...) {
      std::lock_guard lock(mutex_);
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mutex_;
  std::exception_ptr error_;
};

}  // namespace attnmask
