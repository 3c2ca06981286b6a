#pragma once

// Thin RAII wrapper over FFTW. Plans are created once per length and shared;
// plan creation is serialised, execution is thread-safe (new-array execute).

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

namespace qoct::detail {

class FftPlanCache {
 public:
  static FftPlanCache& instance() {
    static FftPlanCache cache;
    return cache;
  }

  fftw_plan forward(std::size_t n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second.get();
    std::vector<std::complex<double>> scratch(n);
    auto* data = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), data, data, FFTW_FORWARD,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(n, PlanPtr(plan));
    return plan;
  }

 private:
  struct PlanDeleter {
    void operator()(fftw_plan p) const { fftw_destroy_plan(p); }
  };
  using PlanPtr = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDeleter>;

  std::mutex mutex_;
  std::map<std::size_t, PlanPtr> plans_;
};

/// In place: x[n] <- sum_j x[j] exp(-2 pi i j n / N).
inline void fft_forward(std::vector<std::complex<double>>& x) {
  fftw_plan plan = FftPlanCache::instance().forward(x.size());
  auto* data = reinterpret_cast<fftw_complex*>(x.data());
  fftw_execute_dft(plan, data, data);
}

}  // namespace qoct::detail
