// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_STFT_HPP
#define MBSS_CORE_STFT_HPP

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"

namespace mbss::dsp {

enum class Window { hann, rect };

Window window_from_string(const std::string& name);
std::string to_string(Window w);

// Analysis/synthesis configuration. The default (8 kHz, 256/64, Hann) is the
// 32 ms / 8 ms setting used throughout the pipeline.
struct StftConfig {
  std::size_t frame_len = 256;
  std::size_t hop = 64;
  Window window = Window::hann;

  // Throws UsageError when hop does not divide frame_len or the window does
  // not overlap-add to a constant at this hop.
  void validate() const;

  std::vector<double> window_samples() const;
};

using SpecMatrix =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic,
                  Eigen::RowMajor>;
using RealMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// T x F complex STFT of one channel.
struct ComplexSpectrogram {
  SpecMatrix bins;  // T rows, F columns
  std::size_t frame_len = 0;
  std::size_t hop = 0;
  Window window = Window::hann;
  int sample_rate = 0;

  std::size_t num_frames() const { return static_cast<std::size_t>(bins.rows()); }
  std::size_t num_bins() const { return static_cast<std::size_t>(bins.cols()); }
  double bin_hz(std::size_t f) const {
    return static_cast<double>(f) * sample_rate / static_cast<double>(frame_len);
  }
  StftConfig config() const { return {frame_len, hop, window}; }
};

// Frame count for a signal of length L: floor((L - frame_len)/hop) + 1.
std::size_t stft_num_frames(std::size_t length, const StftConfig& cfg);

ComplexSpectrogram stft(const std::vector<double>& x, const StftConfig& cfg,
                        int sample_rate);

// Weighted overlap-add synthesis with the analysis window and per-sample
// window-energy normalization. Reconstructs the interior of the analyzed
// signal exactly; the first and last frame_len - hop samples are boundary.
std::vector<double> istft(const ComplexSpectrogram& spec);

RealMatrix magnitude(const ComplexSpectrogram& spec);

// ln(max(|bins|, floor)).
RealMatrix log_magnitude(const ComplexSpectrogram& spec, double floor = 1e-8);

}  // namespace mbss::dsp

#endif  // MBSS_CORE_STFT_HPP
