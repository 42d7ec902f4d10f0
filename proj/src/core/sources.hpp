// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_SOURCES_HPP
#define MBSS_CORE_SOURCES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"

namespace mbss::room {

// Pool of dry single-channel sources for corpus generation. With no
// directory configured the pool synthesizes speech-like signals: pulse-train
// "vowels" shaped by formant resonators plus amplitude-modulated noise
// "consonants", with a distinct pitch per pool speaker.
class DrySourcePool {
 public:
  // Synthetic pool of the given size.
  DrySourcePool(std::size_t num_speakers, int sample_rate);

  // Pool backed by WAV files (channel 0 of each file, one speaker per file).
  DrySourcePool(const std::string& wav_dir, int sample_rate);

  std::size_t num_speakers() const { return num_speakers_; }
  int sample_rate() const { return sample_rate_; }

  // Utterance for pool speaker `speaker`; synthetic utterances vary with
  // `utterance_seed` and last roughly `duration_s` seconds.
  std::vector<double> utterance(std::size_t speaker,
                                std::uint64_t utterance_seed,
                                double duration_s) const;

 private:
  std::size_t num_speakers_ = 0;
  int sample_rate_ = 8000;
  std::vector<std::vector<double>> file_sources_;  // empty for synthetic pool
  std::vector<double> pitches_hz_;                 // synthetic pool only
};

}  // namespace mbss::room

#endif  // MBSS_CORE_SOURCES_HPP
