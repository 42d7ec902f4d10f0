// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "stft.hpp"

#include <algorithm>
#include <cmath>

#include "fft.hpp"

namespace mbss::dsp {

Window window_from_string(const std::string& name) {
  if (name == "hann") return Window::hann;
  if (name == "rect") return Window::rect;
  throw UsageError("unknown window: " + name);
}

std::string to_string(Window w) {
  return w == Window::hann ? "hann" : "rect";
}

void StftConfig::validate() const {
  MBSS_CHECK(frame_len >= 2 && frame_len % 2 == 0, UsageError,
             "frame_len must be even and >= 2");
  MBSS_CHECK(hop > 0 && hop <= frame_len, UsageError,
             "hop must be in (0, frame_len]");
  MBSS_CHECK(frame_len % hop == 0, UsageError,
             "frame_len must be a multiple of hop");
  if (window == Window::hann)
    // Periodic Hann overlap-adds to a constant only when frames overlap.
    MBSS_CHECK(frame_len / hop >= 2, UsageError,
               "hann window requires hop <= frame_len/2 for overlap-add");
}

std::vector<double> StftConfig::window_samples() const {
  std::vector<double> w(frame_len, 1.0);
  if (window == Window::hann) {
    for (std::size_t n = 0; n < frame_len; ++n)
      w[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / frame_len);
  }
  return w;
}

std::size_t stft_num_frames(std::size_t length, const StftConfig& cfg) {
  MBSS_CHECK(length >= cfg.frame_len, DataError,
             "signal shorter than one analysis frame");
  return (length - cfg.frame_len) / cfg.hop + 1;
}

ComplexSpectrogram stft(const std::vector<double>& x, const StftConfig& cfg,
                        int sample_rate) {
  cfg.validate();
  MBSS_CHECK(sample_rate > 0, UsageError, "sample rate must be positive");
  const std::size_t num_frames = stft_num_frames(x.size(), cfg);
  const std::vector<double> win = cfg.window_samples();

  RealFft fft(cfg.frame_len);
  ComplexSpectrogram spec;
  spec.frame_len = cfg.frame_len;
  spec.hop = cfg.hop;
  spec.window = cfg.window;
  spec.sample_rate = sample_rate;
  spec.bins.resize(static_cast<Eigen::Index>(num_frames),
                   static_cast<Eigen::Index>(fft.num_bins()));

  std::vector<double> frame(cfg.frame_len);
  for (std::size_t t = 0; t < num_frames; ++t) {
    const std::size_t start = t * cfg.hop;
    for (std::size_t n = 0; n < cfg.frame_len; ++n)
      frame[n] = x[start + n] * win[n];
    const auto bins = fft.forward(frame);
    for (std::size_t f = 0; f < bins.size(); ++f)
      spec.bins(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f)) =
          bins[f];
  }
  return spec;
}

std::vector<double> istft(const ComplexSpectrogram& spec) {
  const StftConfig cfg = spec.config();
  cfg.validate();
  MBSS_CHECK(spec.num_bins() == cfg.frame_len / 2 + 1, DataError,
             "bin count inconsistent with frame_len");
  const std::size_t num_frames = spec.num_frames();
  MBSS_CHECK(num_frames >= 1, DataError, "empty spectrogram");

  const std::vector<double> win = cfg.window_samples();
  const std::size_t out_len = (num_frames - 1) * cfg.hop + cfg.frame_len;
  std::vector<double> out(out_len, 0.0);
  std::vector<double> norm(out_len, 0.0);

  RealFft fft(cfg.frame_len);
  std::vector<std::complex<double>> bins(spec.num_bins());
  for (std::size_t t = 0; t < num_frames; ++t) {
    for (std::size_t f = 0; f < bins.size(); ++f)
      bins[f] = spec.bins(static_cast<Eigen::Index>(t),
                          static_cast<Eigen::Index>(f));
    const std::vector<double> frame = fft.inverse(bins);
    const std::size_t start = t * cfg.hop;
    for (std::size_t n = 0; n < cfg.frame_len; ++n) {
      out[start + n] += frame[n] * win[n];
      norm[start + n] += win[n] * win[n];
    }
  }
  // Clamp the normalizer so boundary samples (tiny window energy) fade out
  // instead of amplifying inconsistent masked/filtered spectra.
  double level = 0.0;
  for (double v : norm) level = std::max(level, v);
  const double denom_floor = 1e-2 * level;
  for (std::size_t i = 0; i < out_len; ++i)
    if (norm[i] > 1e-12) out[i] /= std::max(norm[i], denom_floor);
  return out;
}

RealMatrix magnitude(const ComplexSpectrogram& spec) {
  return spec.bins.cwiseAbs();
}

RealMatrix log_magnitude(const ComplexSpectrogram& spec, double floor) {
  MBSS_CHECK(floor > 0.0, UsageError, "log floor must be positive");
  RealMatrix out = spec.bins.cwiseAbs();
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    double* p = out.data() + i;
    *p = std::log(std::max(*p, floor));
  }
  return out;
}

}  // namespace mbss::dsp
