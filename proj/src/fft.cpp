// Copyright 2026 The melstream Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

namespace melstream::dsp::detail {
namespace {

// FFTW_UNALIGNED keeps the chosen codelets independent of buffer alignment,
// which keeps results bit-identical across call sites.
constexpr unsigned kPlanFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;

struct Plans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

std::mutex& planner_mutex() {
  static std::mutex mu;
  return mu;
}

const Plans& plans_for(std::size_t n) {
  static std::map<std::size_t, Plans> cache;
  std::lock_guard lock(planner_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> real(n);
  std::vector<std::complex<double>> cplx(n / 2 + 1);
  auto* c = reinterpret_cast<fftw_complex*>(cplx.data());
  Plans p;
  p.forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), real.data(), c, kPlanFlags);
  p.inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n), c, real.data(),
                                   kPlanFlags | FFTW_DESTROY_INPUT);
  return cache.emplace(n, p).first->second;
}

}  // namespace

void rfft(std::size_t n, const double* in, std::complex<double>* out) {
  const Plans& p = plans_for(n);
  // r2c plans never modify their input.
  fftw_execute_dft_r2c(p.forward, const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void irfft(std::size_t n, const std::complex<double>* in, double* out) {
  const Plans& p = plans_for(n);
  thread_local std::vector<std::complex<double>> scratch;
  scratch.assign(in, in + n / 2 + 1);
  fftw_execute_dft_c2r(p.inverse, reinterpret_cast<fftw_complex*>(scratch.data()), out);
}

}  // namespace melstream::dsp::detail
