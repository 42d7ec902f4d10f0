// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_CONFIG_HPP
#define MBSS_CORE_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "adan.hpp"
#include "beamformer.hpp"
#include "geometry.hpp"
#include "stft.hpp"

namespace mbss::pipeline {

struct CorpusParams {
  std::size_t count = 20;
  std::size_t speakers = 2;
  std::uint64_t seed = 7;
  double min_separation_deg = 0.0;
  double duration_s = 1.5;
  std::size_t pool_speakers = 8;
  std::string dry_pool_dir;  // empty: synthetic pool
  int max_image_order = 6;
  std::size_t rir_len = 4096;
  std::string out_dir = "corpus";
};

struct TrainingParams {
  std::size_t steps = 2000;
  double step_size = 0.02;
  std::size_t batch_size = 4;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
};

struct SeparateParams {
  std::size_t num_speakers = 2;
  bool affinity_on_log = false;  // Pearson on log magnitudes instead of linear
  std::uint64_t cluster_seed = 17;
};

struct BankParams {
  std::size_t num_beams = 12;
  double freq_lo_hz = 100.0;
  double freq_hi_hz = 3900.0;
  std::size_t freq_count = 64;
  double wng_floor_db = -15.0;
  double target_null_a_deg = 90.0;
  double target_null_b_deg = 150.0;
};

struct GeometryParams {
  double ring_radius_m = 0.0425;
  std::size_t num_ring_mics = 6;
};

struct PipelineConfig {
  int sample_rate = 8000;
  dsp::StftConfig stft{256, 64, dsp::Window::hann};
  GeometryParams geometry;
  BankParams bank;
  adan::ModelHyper model;
  std::uint64_t model_init_seed = 11;
  TrainingParams training;
  CorpusParams corpus;
  SeparateParams separate;
  std::vector<std::string> systems = {"proposed", "proposed_oracle", "mbbf",
                                      "irm",      "mbirm",           "omvdr"};

  void validate() const;

  ArrayGeometry make_geometry() const;
  bf::BeamDesignParams make_bank_params() const;

  // FNV-1a hash of the cross-stage fields (sample rate, stft, geometry,
  // bank, model), hex-encoded. Embedded in every artifact.
  std::string config_hash() const;

  static PipelineConfig from_json_text(const std::string& text);
  static PipelineConfig from_file(const std::string& path);
  std::string to_json_text() const;
};

}  // namespace mbss::pipeline

#endif  // MBSS_CORE_CONFIG_HPP
