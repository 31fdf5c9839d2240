#pragma once

// Real-input FFT backed by FFTW. Plans are cached per length; planning is
// serialized because the FFTW planner is not thread-safe, execution is not.

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace neuroadapt::fft {

namespace detail {

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using PlanPtr = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct BufferDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

inline fftw_plan r2c_plan(std::size_t n) {
  static std::map<std::size_t, PlanPtr> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second.get();
  std::unique_ptr<double, BufferDeleter> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  std::unique_ptr<fftw_complex, BufferDeleter> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));
  PlanPtr plan(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
  return cache.emplace(n, std::move(plan)).first->second.get();
}

}  // namespace detail

/// Non-negative-frequency half of the DFT of `x` (length n/2 + 1), unnormalized.
inline std::vector<std::complex<double>> rfft(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  fftw_plan plan = detail::r2c_plan(n);
  std::unique_ptr<double, detail::BufferDeleter> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  std::unique_ptr<fftw_complex, detail::BufferDeleter> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));
  std::copy(x.begin(), x.end(), in.get());
  fftw_execute_dft_r2c(plan, in.get(), out.get());
  std::vector<std::complex<double>> result(n / 2 + 1);
  for (std::size_t k = 0; k < result.size(); ++k) result[k] = {out.get()[k][0], out.get()[k][1]};
  return result;
}

}  // namespace neuroadapt::fft
