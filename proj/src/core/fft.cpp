// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

#include "common.hpp"

namespace mbss::dsp {

namespace {
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

struct FftwState {
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
  double* real = nullptr;
  fftw_complex* cplx = nullptr;
};
}  // namespace

RealFft::RealFft(std::size_t n) : n_(n) {
  MBSS_CHECK(n >= 2 && n % 2 == 0, UsageError,
             "FFT size must be even and >= 2");
  auto* st = new FftwState;
  st->real = fftw_alloc_real(n);
  st->cplx = fftw_alloc_complex(n / 2 + 1);
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    st->fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), st->real, st->cplx,
                                   FFTW_ESTIMATE);
    st->inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), st->cplx, st->real,
                                   FFTW_ESTIMATE);
  }
  MBSS_CHECK(st->fwd && st->inv, NumericError, "FFTW plan creation failed");
  impl_ = st;
}

RealFft::~RealFft() {
  auto* st = static_cast<FftwState*>(impl_);
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    fftw_destroy_plan(st->fwd);
    fftw_destroy_plan(st->inv);
  }
  fftw_free(st->real);
  fftw_free(st->cplx);
  delete st;
}

std::vector<std::complex<double>> RealFft::forward(
    const std::vector<double>& x) {
  MBSS_CHECK(x.size() == n_, UsageError, "FFT input length mismatch");
  auto* st = static_cast<FftwState*>(impl_);
  std::memcpy(st->real, x.data(), n_ * sizeof(double));
  fftw_execute(st->fwd);
  std::vector<std::complex<double>> out(num_bins());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = {st->cplx[k][0], st->cplx[k][1]};
  return out;
}

std::vector<double> RealFft::inverse(
    const std::vector<std::complex<double>>& bins) {
  MBSS_CHECK(bins.size() == num_bins(), UsageError, "FFT bin count mismatch");
  auto* st = static_cast<FftwState*>(impl_);
  for (std::size_t k = 0; k < bins.size(); ++k) {
    st->cplx[k][0] = bins[k].real();
    st->cplx[k][1] = bins[k].imag();
  }
  fftw_execute(st->inv);
  std::vector<double> out(n_);
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = st->real[i] * scale;
  return out;
}

}  // namespace mbss::dsp
