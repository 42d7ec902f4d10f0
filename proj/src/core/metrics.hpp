// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_METRICS_HPP
#define MBSS_CORE_METRICS_HPP

#include <vector>

#include "beamformer.hpp"
#include "geometry.hpp"
#include "stft.hpp"
#include "wave.hpp"

namespace mbss::eval {

// Scale-invariant projection SDR: the estimate is least-squares projected
// onto the reference by a single scalar and the ratio of target to residual
// energy is reported in dB, capped at +/-100.
double sdr(const std::vector<double>& estimate,
           const std::vector<double>& reference);

// Projection SDR with a short-distortion-filter allowance: per STFT bin the
// reference is scaled by its least-squares complex gain before the residual
// is measured. This plays the role of bss_eval's distortion filter; plain
// scalar projection scores any reverberation-structure change (e.g. a
// beamformer output) as pure distortion. Absolute values are still not
// comparable with bss_eval tables.
double filtered_sdr(const std::vector<double>& estimate,
                    const std::vector<double>& reference,
                    std::size_t filter_window = 2048);

inline constexpr double kSdrCapDb = 100.0;

struct SpeakerSdr {
  double input_db = 0.0;
  double output_db = 0.0;
  double improvement_db = 0.0;  // output - input
};

struct SdrReport {
  std::vector<SpeakerSdr> speakers;
  double mean_improvement_db = 0.0;
  // Improvements sorted descending (the "top-k" view).
  std::vector<double> ranked_improvements_db;
};

// Outputs may be longer/shorter than references by the synthesis edge; all
// comparisons are made over the common prefix.
SdrReport evaluate_mixture(const std::vector<std::vector<double>>& outputs,
                           const std::vector<std::vector<double>>& references,
                           const std::vector<double>& mixture_ref_channel);

// Ideal ratio masks mask_c = |S_c| / max(sum |S_c'|, floor).
std::vector<dsp::RealMatrix> irm_masks(
    const std::vector<dsp::ComplexSpectrogram>& reference_specs,
    double denom_floor = 1e-12);

// Oracle ideal-ratio-mask outputs: masks applied to the mixture spectrogram
// (noisy phase), resynthesized.
std::vector<std::vector<double>> irm_baseline(
    const dsp::ComplexSpectrogram& mixture_spec,
    const std::vector<dsp::ComplexSpectrogram>& reference_specs,
    double denom_floor = 1e-12);

// Oracle beam pick: per speaker, the beam whose waveform has the largest SDR
// against that speaker's reference.
std::vector<std::size_t> mbbf_oracle(
    const std::vector<std::vector<double>>& beam_waveforms,
    const std::vector<std::vector<double>>& references);

// IRM applied to each speaker's oracle-picked beam. beam_specs holds the
// mixture in beam domain; per_source_beam_specs[c][b] the (reverberant)
// source images in beam domain.
std::vector<std::vector<double>> mbirm_baseline(
    const std::vector<dsp::ComplexSpectrogram>& beam_specs,
    const std::vector<std::vector<dsp::ComplexSpectrogram>>& per_source_beam_specs,
    const std::vector<std::size_t>& chosen_beams);

// MVDR weights for one frequency: w = R^-1 d / (d^H R^-1 d) with diagonal
// loading 1e-3 tr(R)/M. Distortionless by construction.
bf::CVec mvdr_weights(const bf::CMat& noise_cov, const bf::CVec& steering,
                      double loading_scale = 1e-3);

// Oracle MVDR per speaker: steering from the known source direction, noise
// covariance from the mixture of the remaining speakers' images.
std::vector<std::vector<double>> oracle_mvdr(
    const dsp::MultichannelWave& mixture,
    const std::vector<dsp::MultichannelWave>& source_images,
    const std::vector<Vec3>& source_directions, const ArrayGeometry& geometry,
    const dsp::StftConfig& cfg);

}  // namespace mbss::eval

#endif  // MBSS_CORE_METRICS_HPP
