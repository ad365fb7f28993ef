#pragma once

#include <exception>
#include <mutex>

namespace potts_abc::detail {

/// Carries the first exception thrown inside an OpenMP loop body out of the
/// parallel region, where it would otherwise terminate the program.
class ParallelErrors {
public:
  template <class F>
  void run(F&& body) noexcept {
    try {
      body();
    } catch (...) {
      std::lock_guard lock(mutex_);
      if (!first_) first_ = std::current_exception();
    }
  }

  void rethrow() const {
    if (first_) std::rethrow_exception(first_);
  }

private:
  std::mutex mutex_;
  std::exception_ptr first_;
};

}  // namespace potts_abc::detail
