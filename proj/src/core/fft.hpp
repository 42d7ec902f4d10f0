// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_FFT_HPP
#define MBSS_CORE_FFT_HPP

#include <complex>
#include <cstddef>
#include <vector>

namespace mbss::dsp {

// Real-to-complex FFT of a fixed size, backed by FFTW. Instances own their
// plans and buffers; create one per thread. Plan creation/destruction is
// serialized internally (FFTW planning is not thread-safe).
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t size() const { return n_; }
  std::size_t num_bins() const { return n_ / 2 + 1; }

  // x: n real samples -> n/2+1 unnormalized DFT bins.
  std::vector<std::complex<double>> forward(const std::vector<double>& x);

  // bins: n/2+1 -> n real samples; includes the 1/n normalization so
  // inverse(forward(x)) == x.
  std::vector<double> inverse(const std::vector<std::complex<double>>& bins);

 private:
  std::size_t n_;
  void* impl_;
};

}  // namespace mbss::dsp

#endif  // MBSS_CORE_FFT_HPP
