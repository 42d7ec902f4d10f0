// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_WAVE_HPP
#define MBSS_CORE_WAVE_HPP

#include <cstddef>
#include <utility>
#include <vector>

#include "common.hpp"

namespace mbss::dsp {

// Time-domain audio, M channels of equal length.
struct MultichannelWave {
  std::vector<std::vector<double>> samples;  // [channel][sample]
  int sample_rate = 0;

  MultichannelWave() = default;
  MultichannelWave(std::size_t channels, std::size_t length, int rate)
      : samples(channels, std::vector<double>(length, 0.0)), sample_rate(rate) {
    validate();
  }
  MultichannelWave(std::vector<std::vector<double>> s, int rate)
      : samples(std::move(s)), sample_rate(rate) {
    validate();
  }

  std::size_t num_channels() const { return samples.size(); }
  std::size_t length() const { return samples.empty() ? 0 : samples[0].size(); }

  void validate() const {
    MBSS_CHECK(sample_rate > 0, UsageError, "sample rate must be positive");
    MBSS_CHECK(!samples.empty(), UsageError, "wave needs at least one channel");
    for (const auto& ch : samples)
      MBSS_CHECK(ch.size() == samples[0].size(), DataError,
                 "all channels must have equal length");
  }
};

inline double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

}  // namespace mbss::dsp

#endif  // MBSS_CORE_WAVE_HPP
