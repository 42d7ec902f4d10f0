// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_BEAMFORMER_HPP
#define MBSS_CORE_BEAMFORMER_HPP

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geometry.hpp"
#include "stft.hpp"
#include "wave.hpp"

namespace mbss::bf {

using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Far-field plane-wave steering vector for a unit arrival direction. Element
// m is exp(+j 2*pi*f (u . p_m) / c); a mic at the origin has gain 1.
CVec steering_vector(const ArrayGeometry& geometry, const Vec3& arrival_unit,
                     double freq_hz, double speed_of_sound = 343.0);

// Azimuth convenience overload (elevation 0).
CVec steering_vector(const ArrayGeometry& geometry, double azimuth_deg,
                     double freq_hz, double speed_of_sound = 343.0);

// Second-order directivity target a0 + a1 cos(psi) + a2 cos^2(psi), built
// from its two null angles and normalized to unity at psi = 0.
struct SecondOrderTarget {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0;
  double null_a_deg = 90.0, null_b_deg = 150.0;

  static SecondOrderTarget from_nulls(double null_a_deg, double null_b_deg);
  double response(double angle_from_look_deg) const;
};

struct BeamDesignParams {
  std::vector<double> freq_grid_hz;   // design frequencies
  SecondOrderTarget target;
  double wng_floor_db = -15.0;        // white-noise-gain floor
  double angle_step_deg = 5.0;        // fitting grid resolution
  double speed_of_sound = 343.0;

  // 64 log-spaced frequencies in [100, 3900] Hz.
  static std::vector<double> default_freq_grid(double lo_hz = 100.0,
                                               double hi_hz = 3900.0,
                                               std::size_t count = 64);
};

// Per-frequency regularized least-squares fit of the beam response to the
// rotated target on the angle grid, subject to a distortionless constraint
// at the look azimuth. Diagonal loading is increased until the white-noise
// gain reaches the configured floor. Returns F x M weights.
CMat design_beam(const ArrayGeometry& geometry, double look_azimuth_deg,
                 const BeamDesignParams& params);

struct BeamformerBank {
  ArrayGeometry geometry;
  std::vector<double> freq_grid_hz;
  std::vector<double> look_azimuths_deg;
  std::vector<CMat> weights;  // per beam: F x M
  SecondOrderTarget target;
  double wng_floor_db = -15.0;
  std::string config_hash;

  std::size_t num_beams() const { return weights.size(); }
  std::size_t num_mics() const { return geometry.num_mics(); }
};

BeamformerBank design_bank(const ArrayGeometry& geometry,
                           const BeamDesignParams& params,
                           std::size_t num_beams = 12);

// 20*log10 |w^H d(theta, f)| per grid angle, capped below at -80 dB.
std::vector<double> beampattern(const BeamformerBank& bank,
                                std::size_t beam_index, double freq_hz,
                                const std::vector<double>& angle_grid_deg);

// Beam b output at (t,f): sum_m conj(w_{b,f,m}) X_m(t,f). Weights are taken
// from the nearest design frequency for each STFT bin.
std::vector<dsp::ComplexSpectrogram> apply_bank(
    const BeamformerBank& bank, const dsp::MultichannelWave& mixture,
    const dsp::StftConfig& cfg);

// Single-beam application, reused by oracle baselines.
dsp::ComplexSpectrogram apply_beam(
    const BeamformerBank& bank, std::size_t beam_index,
    const std::vector<dsp::ComplexSpectrogram>& channel_specs);

void save_bank(const std::string& path, const BeamformerBank& bank);
BeamformerBank load_bank(const std::string& path);

}  // namespace mbss::bf

#endif  // MBSS_CORE_BEAMFORMER_HPP
