// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "sources.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "wav_io.hpp"

namespace mbss::room {

namespace {

// Two-pole resonator, in place.
void resonate(std::vector<double>& x, double freq_hz, double bw_hz, int fs) {
  const double r = std::exp(-kPi * bw_hz / fs);
  const double a1 = -2.0 * r * std::cos(2.0 * kPi * freq_hz / fs);
  const double a2 = r * r;
  // Unity gain at the resonance peak, approximately.
  const double g = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * 2.0 * kPi * freq_hz / fs) + r * r);
  double y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    const double y = g * v - a1 * y1 - a2 * y2;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

void apply_fade(std::vector<double>& seg, std::size_t ramp) {
  ramp = std::min(ramp, seg.size() / 2);
  for (std::size_t i = 0; i < ramp; ++i) {
    const double g = 0.5 - 0.5 * std::cos(kPi * i / ramp);
    seg[i] *= g;
    seg[seg.size() - 1 - i] *= g;
  }
}

// Per-speaker resonance bands, so pool speakers occupy distinct parts of
// the spectrum and mixtures stay sparse in time-frequency.
struct VoiceProfile {
  double f0;
  double formant1, formant2;
  double fricative;
};

std::vector<double> vowel_segment(Rng& rng, const VoiceProfile& voice, int fs,
                                  std::size_t len) {
  std::vector<double> seg(len, 0.0);
  // Glottal-like pulse train with slight jitter.
  double phase = rng.uniform(0.0, 1.0);
  for (std::size_t i = 0; i < len; ++i) {
    phase += voice.f0 * (1.0 + 0.01 * std::sin(2.0 * kPi * 4.0 * i / fs)) / fs;
    if (phase >= 1.0) {
      phase -= 1.0;
      seg[i] = 1.0;
    }
  }
  std::vector<double> shaped = seg;
  resonate(shaped, voice.formant1 * rng.uniform(0.9, 1.1),
           rng.uniform(60.0, 120.0), fs);
  std::vector<double> f2 = seg;
  resonate(f2, voice.formant2 * rng.uniform(0.92, 1.08),
           rng.uniform(80.0, 160.0), fs);
  for (std::size_t i = 0; i < len; ++i) shaped[i] += 0.6 * f2[i];
  // Syllable-like envelope.
  const double mod_hz = rng.uniform(2.5, 5.0);
  const double mod_phase = rng.uniform(0.0, 2.0 * kPi);
  for (std::size_t i = 0; i < len; ++i)
    shaped[i] *= 0.55 + 0.45 * std::sin(2.0 * kPi * mod_hz * i / fs + mod_phase);
  apply_fade(shaped, fs / 100);
  return shaped;
}

std::vector<double> consonant_segment(Rng& rng, const VoiceProfile& voice,
                                      int fs, std::size_t len) {
  std::vector<double> seg(len);
  for (double& v : seg) v = rng.normal();
  resonate(seg, voice.fricative * rng.uniform(0.9, 1.1),
           rng.uniform(250.0, 450.0), fs);
  // Amplitude modulation gives a rough fricative envelope.
  const double mod_hz = rng.uniform(8.0, 20.0);
  for (std::size_t i = 0; i < len; ++i)
    seg[i] *= 0.6 + 0.4 * std::sin(2.0 * kPi * mod_hz * i / fs);
  apply_fade(seg, fs / 200);
  return seg;
}

}  // namespace

DrySourcePool::DrySourcePool(std::size_t num_speakers, int sample_rate)
    : num_speakers_(num_speakers), sample_rate_(sample_rate) {
  MBSS_CHECK(num_speakers >= 1, UsageError, "pool needs >= 1 speaker");
  MBSS_CHECK(sample_rate > 0, UsageError, "sample rate must be positive");
  // Log-spaced pitches keep the speakers spectrally distinct.
  pitches_hz_.resize(num_speakers);
  for (std::size_t s = 0; s < num_speakers; ++s) {
    const double t = num_speakers == 1
                         ? 0.5
                         : static_cast<double>(s) / (num_speakers - 1);
    pitches_hz_[s] = 95.0 * std::pow(310.0 / 95.0, t);
  }
}

DrySourcePool::DrySourcePool(const std::string& wav_dir, int sample_rate)
    : sample_rate_(sample_rate) {
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(wav_dir))
    if (entry.path().extension() == ".wav") paths.push_back(entry.path());
  std::sort(paths.begin(), paths.end());
  MBSS_CHECK(!paths.empty(), DataError, "no .wav files in pool dir " + wav_dir);
  for (const auto& p : paths) {
    auto wave = dsp::read_wav(p.string());
    MBSS_CHECK(wave.sample_rate == sample_rate, DataError,
               "pool file sample rate mismatch: " + p.string());
    file_sources_.push_back(std::move(wave.samples[0]));
  }
  num_speakers_ = file_sources_.size();
}

std::vector<double> DrySourcePool::utterance(std::size_t speaker,
                                             std::uint64_t utterance_seed,
                                             double duration_s) const {
  MBSS_CHECK(speaker < num_speakers_, UsageError, "speaker index out of range");
  if (!file_sources_.empty()) {
    const auto& src = file_sources_[speaker];
    const std::size_t want =
        static_cast<std::size_t>(duration_s * sample_rate_);
    const std::size_t len = std::min(want, src.size());
    MBSS_CHECK(len > 0, DataError, "empty pool source");
    std::size_t offset = 0;
    if (src.size() > len) {
      Rng rng(utterance_seed);
      offset = rng.next_index(src.size() - len + 1);
    }
    return {src.begin() + offset, src.begin() + offset + len};
  }

  Rng rng(utterance_seed ^ (0x9e3779b97f4a7c15ull * (speaker + 1)));
  const std::size_t total =
      static_cast<std::size_t>(duration_s * sample_rate_);
  std::vector<double> out;
  out.reserve(total + sample_rate_ / 2);

  // Deterministic per-speaker voice: pitch and resonance bands spread over
  // the pool so different speakers occupy different spectral regions.
  Rng voice_rng(0xabcdef12ull + 977ull * speaker);
  VoiceProfile voice;
  voice.f0 = pitches_hz_[speaker] * rng.uniform(0.97, 1.03);
  voice.formant1 = voice_rng.uniform(280.0, 850.0);
  voice.formant2 = voice_rng.uniform(1000.0, 2600.0);
  voice.fricative = voice_rng.uniform(1400.0, 3300.0);

  while (out.size() < total) {
    const double kind = rng.uniform();
    std::vector<double> seg;
    if (kind < 0.5) {
      const auto len = static_cast<std::size_t>(
          rng.uniform(0.12, 0.35) * sample_rate_);
      seg = vowel_segment(rng, voice, sample_rate_, len);
    } else if (kind < 0.72) {
      const auto len = static_cast<std::size_t>(
          rng.uniform(0.06, 0.18) * sample_rate_);
      seg = consonant_segment(rng, voice, sample_rate_, len);
    } else {
      seg.assign(static_cast<std::size_t>(rng.uniform(0.04, 0.16) *
                                          sample_rate_),
                 0.0);
    }
    out.insert(out.end(), seg.begin(), seg.end());
  }
  out.resize(total);

  double peak = 0.0;
  for (double v : out) peak = std::max(peak, std::fabs(v));
  MBSS_CHECK(peak > 0.0, NumericError, "synthesized utterance is silent");
  for (double& v : out) v *= 0.5 / peak;
  return out;
}

}  // namespace mbss::room
