// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_PIPELINE_HPP
#define MBSS_CORE_PIPELINE_HPP

#include <optional>
#include <string>
#include <vector>

#include "adan.hpp"
#include "beamformer.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "metrics.hpp"

namespace mbss::pipeline {

// One separation candidate: output e of beam b.
struct Candidate {
  std::size_t beam = 0;
  std::size_t output = 0;
  dsp::RealMatrix magnitude;        // T x F
  std::vector<double> waveform;
};

struct SeparationOutcome {
  std::vector<Candidate> candidates;       // all E*B
  std::vector<std::size_t> chosen;         // C candidate indices
  std::vector<int> labels;                 // cluster label per candidate (-1 dropped)
  std::vector<double> scores;              // quality score per candidate
  bool used_oracle = false;
};

// Full single-mixture separation: beam bank, per-beam network outputs,
// post-selection (blind spectral clustering or oracle when references are
// provided).
SeparationOutcome separate_mixture(
    const PipelineConfig& config, const bf::BeamformerBank& bank,
    const adan::EmbeddingModel& model, const dsp::MultichannelWave& mixture,
    const std::vector<std::vector<double>>& references_for_oracle = {});

// Pipeline commands. All artifacts embed the config hash; loading an
// artifact with a different hash is a DataError.

void cmd_gen_corpus(const PipelineConfig& config, const std::string& out_dir);

void cmd_design_beams(const PipelineConfig& config,
                      const std::string& bank_path,
                      const std::string& pattern_csv_dir);

void cmd_train(const PipelineConfig& config, const std::string& manifest_path,
               const std::string& bank_path, const std::string& ckpt_path,
               const std::string& loss_csv_path);

void cmd_separate(const PipelineConfig& config, const std::string& bank_path,
                  const std::string& ckpt_path, const std::string& mixture_wav,
                  const std::vector<std::string>& reference_wavs,
                  bool oracle_select, const std::string& out_dir);

void cmd_evaluate(const PipelineConfig& config, const std::string& manifest_path,
                  const std::string& bank_path, const std::string& ckpt_path,
                  const std::vector<std::string>& systems,
                  const std::string& out_csv, const std::string& summary_csv);

// Per-system per-speaker rows of an evaluation, as written to the CSV.
struct EvalRow {
  std::string system;
  std::size_t utterance = 0;
  std::size_t num_speakers = 0;
  std::size_t speaker = 0;
  double input_sdr_db = 0.0;
  double output_sdr_db = 0.0;
  double improvement_db = 0.0;
};

// Library entry used by cmd_evaluate and the acceptance suite.
std::vector<EvalRow> evaluate_corpus(const PipelineConfig& config,
                                     const std::string& manifest_path,
                                     const bf::BeamformerBank& bank,
                                     const adan::EmbeddingModel* model,
                                     const std::vector<std::string>& systems);

double mean_improvement(const std::vector<EvalRow>& rows,
                        const std::string& system);

// Training-set construction: per speaker, the beam with the largest
// beam-domain SNR; duplicate beams within a mixture are merged.
std::vector<adan::TrainItem> build_train_items(const PipelineConfig& config,
                                               const bf::BeamformerBank& bank,
                                               const std::string& manifest_path);

}  // namespace mbss::pipeline

#endif  // MBSS_CORE_PIPELINE_HPP
