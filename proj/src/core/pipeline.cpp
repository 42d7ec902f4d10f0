// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "post_select.hpp"
#include "wav_io.hpp"

namespace mbss::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void verify_hash(const std::string& artifact_hash, const std::string& expected,
                 const std::string& what) {
  MBSS_CHECK(artifact_hash == expected, DataError,
             what + " was produced with a different configuration (hash " +
                 artifact_hash + ", expected " + expected + ")");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

Eigen::VectorXd flatten(const dsp::RealMatrix& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

// Best output-to-reference bijection by total SDR; used when the blind
// selection has no speaker correspondence.
std::vector<std::size_t> best_assignment(
    const std::vector<std::vector<double>>& outputs,
    const std::vector<std::vector<double>>& references) {
  const std::size_t C = references.size();
  std::vector<std::size_t> perm(C), best(C);
  std::iota(perm.begin(), perm.end(), 0);
  best = perm;
  double best_total = -1e300;
  do {
    double total = 0.0;
    for (std::size_t c = 0; c < C; ++c)
      total += eval::filtered_sdr(outputs[perm[c]], references[c]);
    if (total > best_total) {
      best_total = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

struct BeamDomain {
  std::vector<dsp::ComplexSpectrogram> mixture_beams;
  // per source, per beam
  std::vector<std::vector<dsp::ComplexSpectrogram>> source_beams;
};

BeamDomain beam_domain(const bf::BeamformerBank& bank, const CorpusEntry& entry,
                       const dsp::StftConfig& cfg) {
  BeamDomain bd;
  bd.mixture_beams = bf::apply_bank(bank, entry.mixture, cfg);
  for (const auto& img : entry.source_images)
    bd.source_beams.push_back(bf::apply_bank(bank, img, cfg));
  return bd;
}

}  // namespace

SeparationOutcome separate_mixture(
    const PipelineConfig& config, const bf::BeamformerBank& bank,
    const adan::EmbeddingModel& model, const dsp::MultichannelWave& mixture,
    const std::vector<std::vector<double>>& references_for_oracle) {
  const std::size_t C = config.separate.num_speakers;
  const auto beams = bf::apply_bank(bank, mixture, config.stft);

  SeparationOutcome outcome;
  for (std::size_t b = 0; b < beams.size(); ++b) {
    const auto sep = adan::separate_beam(model, beams[b], C);
    for (std::size_t e = 0; e < sep.magnitudes.size(); ++e) {
      Candidate cand;
      cand.beam = b;
      cand.output = e;
      cand.magnitude = sep.magnitudes[e];
      cand.waveform = sep.waveforms[e];
      outcome.candidates.push_back(std::move(cand));
    }
  }
  MBSS_CHECK(outcome.candidates.size() >= C, NumericError,
             "fewer candidates than speakers");

  outcome.scores.reserve(outcome.candidates.size());
  for (const auto& cand : outcome.candidates)
    outcome.scores.push_back(post::quality_score(cand.magnitude));

  if (!references_for_oracle.empty()) {
    std::vector<std::vector<double>> waves;
    for (const auto& cand : outcome.candidates) waves.push_back(cand.waveform);
    outcome.chosen = post::oracle_select(waves, references_for_oracle);
    outcome.used_oracle = true;
    outcome.labels.assign(outcome.candidates.size(), -1);
    return outcome;
  }

  // Blind path: Pearson affinity over candidate magnitudes, spectral
  // clustering into C+1 groups, per-cluster quality pick.
  std::vector<dsp::RealMatrix> affinity_inputs;
  for (const auto& cand : outcome.candidates) {
    if (config.separate.affinity_on_log) {
      dsp::RealMatrix lm = cand.magnitude;
      for (Eigen::Index i = 0; i < lm.size(); ++i)
        lm.data()[i] = std::log(std::max(lm.data()[i], model.hyper().log_floor));
      affinity_inputs.push_back(std::move(lm));
    } else {
      affinity_inputs.push_back(cand.magnitude);
    }
  }
  const auto aff = post::pearson_affinity(affinity_inputs);
  const auto kept_labels = post::spectral_cluster(
      aff.affinity, C + 1, config.separate.cluster_seed);

  outcome.labels.assign(outcome.candidates.size(), -1);
  std::vector<double> kept_scores;
  for (std::size_t i = 0; i < aff.kept.size(); ++i) {
    outcome.labels[aff.kept[i]] = kept_labels[i];
    kept_scores.push_back(outcome.scores[aff.kept[i]]);
  }
  const auto chosen_kept =
      post::select_outputs(aff.kept.size(), C, kept_scores, kept_labels);
  for (std::size_t idx : chosen_kept) outcome.chosen.push_back(aff.kept[idx]);
  return outcome;
}

void cmd_gen_corpus(const PipelineConfig& config, const std::string& out_dir) {
  build_corpus(config, out_dir.empty() ? config.corpus.out_dir : out_dir);
}

void cmd_design_beams(const PipelineConfig& config,
                      const std::string& bank_path,
                      const std::string& pattern_csv_dir) {
  config.validate();
  auto bank = bf::design_bank(config.make_geometry(),
                              config.make_bank_params(), config.bank.num_beams);
  bank.config_hash = config.config_hash();
  save_bank(bank_path, bank);

  if (pattern_csv_dir.empty()) return;
  fs::create_directories(pattern_csv_dir);
  std::vector<double> grid;
  for (int a = 0; a < 360; ++a) grid.push_back(a);
  const std::vector<double> freqs = {500.0, 1000.0, 2000.0, 3000.0};
  for (std::size_t b = 0; b < bank.num_beams(); ++b) {
    char name[64];
    std::snprintf(name, sizeof(name), "beam_%02zu.csv", b);
    std::ofstream csv(fs::path(pattern_csv_dir) / name, std::ios::trunc);
    MBSS_CHECK(csv.good(), DataError, "cannot write beampattern CSV");
    csv << "angle_deg";
    for (double f : freqs) csv << ",gain_db_" << static_cast<int>(f) << "hz";
    csv << "\n";
    std::vector<std::vector<double>> gains;
    for (double f : freqs) gains.push_back(bf::beampattern(bank, b, f, grid));
    for (std::size_t a = 0; a < grid.size(); ++a) {
      csv << grid[a];
      for (std::size_t fi = 0; fi < freqs.size(); ++fi)
        csv << "," << fmt(gains[fi][a]);
      csv << "\n";
    }
  }
}

std::vector<adan::TrainItem> build_train_items(const PipelineConfig& config,
                                               const bf::BeamformerBank& bank,
                                               const std::string& manifest_path) {
  const auto records = read_manifest(manifest_path);
  MBSS_CHECK(!records.empty(), DataError, "empty corpus manifest");
  const std::string hash = config.config_hash();

  std::vector<adan::TrainItem> items;
  for (const auto& record : records) {
    if (!record.config_hash.empty()) verify_hash(record.config_hash, hash, "corpus");
    const CorpusEntry entry = load_entry(manifest_path, record);
    const std::size_t C = entry.source_images.size();
    const BeamDomain bd = beam_domain(bank, entry, config.stft);

    // Per-speaker, per-beam SNR on the reverberant beam-domain references.
    std::vector<std::size_t> best_beam(C, 0);
    for (std::size_t c = 0; c < C; ++c) {
      double best_snr = -1e300;
      for (std::size_t b = 0; b < bank.num_beams(); ++b) {
        const double sig = bd.source_beams[c][b].bins.squaredNorm();
        double noise = 1e-30;
        for (std::size_t c2 = 0; c2 < C; ++c2)
          if (c2 != c) noise += bd.source_beams[c2][b].bins.squaredNorm();
        const double snr = sig / noise;
        if (snr > best_snr) {
          best_snr = snr;
          best_beam[c] = b;
        }
      }
    }
    std::vector<std::size_t> beams = best_beam;
    std::sort(beams.begin(), beams.end());
    beams.erase(std::unique(beams.begin(), beams.end()), beams.end());

    for (std::size_t b : beams) {
      adan::TrainItem item;
      item.features =
          adan::make_features(bd.mixture_beams[b], config.model.log_floor);
      item.mixture_magnitude = flatten(dsp::magnitude(bd.mixture_beams[b]));
      for (std::size_t c = 0; c < C; ++c)
        item.reference_magnitudes.push_back(
            flatten(dsp::magnitude(bd.source_beams[c][b])));
      items.push_back(std::move(item));
    }
  }
  return items;
}

void cmd_train(const PipelineConfig& config, const std::string& manifest_path,
               const std::string& bank_path, const std::string& ckpt_path,
               const std::string& loss_csv_path) {
  config.validate();
  const std::string hash = config.config_hash();
  const auto bank = bf::load_bank(bank_path);
  verify_hash(bank.config_hash, hash, "beamformer bank");

  const auto items = build_train_items(config, bank, manifest_path);

  adan::EmbeddingModel model(config.model, config.model_init_seed);
  model.config_hash = hash;
  adan::TrainConfig tc;
  tc.steps = config.training.steps;
  tc.step_size = config.training.step_size;
  tc.batch_size = config.training.batch_size;
  tc.clip_norm = config.training.clip_norm;
  tc.seed = config.training.seed;
  const auto losses = adan::train(model, items, tc);

  save_checkpoint(ckpt_path, model);
  if (!loss_csv_path.empty()) {
    std::ofstream csv(loss_csv_path, std::ios::trunc);
    MBSS_CHECK(csv.good(), DataError, "cannot write loss CSV " + loss_csv_path);
    csv << "step,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i)
      csv << i << "," << fmt(losses[i]) << "\n";
  }
}

void cmd_separate(const PipelineConfig& config, const std::string& bank_path,
                  const std::string& ckpt_path, const std::string& mixture_wav,
                  const std::vector<std::string>& reference_wavs,
                  bool oracle_select, const std::string& out_dir) {
  config.validate();
  const std::string hash = config.config_hash();
  const auto bank = bf::load_bank(bank_path);
  verify_hash(bank.config_hash, hash, "beamformer bank");
  const auto model = adan::load_checkpoint(ckpt_path);
  verify_hash(model.config_hash, hash, "model checkpoint");

  const auto mixture = dsp::read_wav(mixture_wav);
  MBSS_CHECK(mixture.sample_rate == config.sample_rate, DataError,
             "mixture sample rate does not match the configuration");

  std::vector<std::vector<double>> references;
  if (oracle_select) {
    MBSS_CHECK(!reference_wavs.empty(), UsageError,
               "oracle selection requires reference files");
    for (const auto& path : reference_wavs)
      references.push_back(dsp::read_wav(path).samples[room::kReferenceMic]);
  }

  const auto outcome =
      separate_mixture(config, bank, model, mixture, references);

  fs::create_directories(out_dir);
  json report;
  report["config_hash"] = hash;
  report["mixture"] = mixture_wav;
  report["oracle_select"] = outcome.used_oracle;
  json cands = json::array();
  for (std::size_t i = 0; i < outcome.candidates.size(); ++i) {
    cands.push_back({{"beam", outcome.candidates[i].beam},
                     {"output", outcome.candidates[i].output},
                     {"label", outcome.labels[i]},
                     {"score", outcome.scores[i]}});
  }
  report["candidates"] = cands;
  report["chosen"] = outcome.chosen;

  for (std::size_t c = 0; c < outcome.chosen.size(); ++c) {
    char name[64];
    std::snprintf(name, sizeof(name), "output_%zu.wav", c);
    const auto& wf = outcome.candidates[outcome.chosen[c]].waveform;
    dsp::MultichannelWave wave(1, wf.size(), config.sample_rate);
    wave.samples[0] = wf;
    dsp::write_wav((fs::path(out_dir) / name).string(), wave);
    report["output_paths"].push_back(name);
  }
  std::ofstream rep(fs::path(out_dir) / "selection_report.json",
                    std::ios::trunc);
  MBSS_CHECK(rep.good(), DataError, "cannot write selection report");
  rep << report.dump(2) << "\n";
}

std::vector<EvalRow> evaluate_corpus(const PipelineConfig& config,
                                     const std::string& manifest_path,
                                     const bf::BeamformerBank& bank,
                                     const adan::EmbeddingModel* model,
                                     const std::vector<std::string>& systems) {
  const auto records = read_manifest(manifest_path);
  MBSS_CHECK(!records.empty(), DataError, "empty corpus manifest");
  const std::string hash = config.config_hash();

  std::vector<EvalRow> rows;
  for (std::size_t u = 0; u < records.size(); ++u) {
    const auto& record = records[u];
    if (!record.config_hash.empty()) verify_hash(record.config_hash, hash, "corpus");
    const CorpusEntry entry = load_entry(manifest_path, record);
    const std::size_t C = entry.source_images.size();

    std::vector<std::vector<double>> references;
    for (std::size_t c = 0; c < C; ++c) references.push_back(entry.reference(c));
    const auto& mix_ref = entry.mixture.samples[room::kReferenceMic];

    // Beam domain is shared by mbbf/mbirm and the proposed systems.
    BeamDomain bd;
    std::vector<std::vector<double>> beam_waves;
    const bool needs_beams =
        std::any_of(systems.begin(), systems.end(), [](const std::string& s) {
          return s == "mbbf" || s == "mbirm" || s == "proposed" ||
                 s == "proposed_oracle";
        });
    if (needs_beams) {
      bd = beam_domain(bank, entry, config.stft);
      for (const auto& spec : bd.mixture_beams)
        beam_waves.push_back(dsp::istft(spec));
    }

    auto emit = [&](const std::string& system,
                    const std::vector<std::vector<double>>& outputs) {
      const auto report = eval::evaluate_mixture(outputs, references, mix_ref);
      for (std::size_t c = 0; c < C; ++c) {
        EvalRow row;
        row.system = system;
        row.utterance = u;
        row.num_speakers = C;
        row.speaker = c;
        row.input_sdr_db = report.speakers[c].input_db;
        row.output_sdr_db = report.speakers[c].output_db;
        row.improvement_db = report.speakers[c].improvement_db;
        rows.push_back(row);
      }
    };

    for (const auto& system : systems) {
      if (system == "reference") {
        emit(system, references);
      } else if (system == "irm") {
        std::vector<dsp::ComplexSpectrogram> ref_specs;
        for (std::size_t c = 0; c < C; ++c)
          ref_specs.push_back(
              dsp::stft(references[c], config.stft, config.sample_rate));
        const auto mix_spec =
            dsp::stft(mix_ref, config.stft, config.sample_rate);
        emit(system, eval::irm_baseline(mix_spec, ref_specs));
      } else if (system == "mbbf") {
        const auto chosen = eval::mbbf_oracle(beam_waves, references);
        std::vector<std::vector<double>> outputs;
        for (std::size_t c = 0; c < C; ++c)
          outputs.push_back(beam_waves[chosen[c]]);
        emit(system, outputs);
      } else if (system == "mbirm") {
        const auto chosen = eval::mbbf_oracle(beam_waves, references);
        emit(system,
             eval::mbirm_baseline(bd.mixture_beams, bd.source_beams, chosen));
      } else if (system == "omvdr") {
        MBSS_CHECK(record.source_positions.size() == C, DataError,
                   "manifest lacks source positions needed for omvdr");
        std::vector<Vec3> dirs;
        for (const auto& p : record.source_positions)
          dirs.push_back((p - record.array_center).normalized());
        emit(system, eval::oracle_mvdr(entry.mixture, entry.source_images,
                                       dirs, bank.geometry, config.stft));
      } else if (system == "proposed" || system == "proposed_oracle") {
        MBSS_CHECK(model != nullptr, UsageError,
                   "system '" + system + "' needs a model checkpoint");
        PipelineConfig local = config;
        local.separate.num_speakers = C;
        const bool oracle = system == "proposed_oracle";
        const auto outcome = separate_mixture(
            local, bank, *model, entry.mixture,
            oracle ? references : std::vector<std::vector<double>>{});
        std::vector<std::vector<double>> outputs;
        if (oracle) {
          for (std::size_t c = 0; c < C; ++c)
            outputs.push_back(
                outcome.candidates[outcome.chosen[c]].waveform);
        } else {
          // Blind selection has no speaker correspondence; align by the
          // best bijection before scoring.
          std::vector<std::vector<double>> unordered;
          for (std::size_t idx : outcome.chosen)
            unordered.push_back(outcome.candidates[idx].waveform);
          const auto assign = best_assignment(unordered, references);
          for (std::size_t c = 0; c < C; ++c)
            outputs.push_back(unordered[assign[c]]);
        }
        emit(system, outputs);
      } else {
        throw UsageError("unknown system '" + system + "'");
      }
    }
  }
  return rows;
}

double mean_improvement(const std::vector<EvalRow>& rows,
                        const std::string& system) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& row : rows) {
    if (row.system != system) continue;
    sum += row.improvement_db;
    ++count;
  }
  MBSS_CHECK(count > 0, UsageError, "no rows for system " + system);
  return sum / static_cast<double>(count);
}

void cmd_evaluate(const PipelineConfig& config, const std::string& manifest_path,
                  const std::string& bank_path, const std::string& ckpt_path,
                  const std::vector<std::string>& systems,
                  const std::string& out_csv, const std::string& summary_csv) {
  config.validate();
  const std::string hash = config.config_hash();
  const auto bank = bf::load_bank(bank_path);
  verify_hash(bank.config_hash, hash, "beamformer bank");

  std::optional<adan::EmbeddingModel> model;
  const bool needs_model =
      std::any_of(systems.begin(), systems.end(), [](const std::string& s) {
        return s == "proposed" || s == "proposed_oracle";
      });
  if (needs_model) {
    MBSS_CHECK(!ckpt_path.empty(), UsageError,
               "evaluation of the proposed system needs a checkpoint");
    model = adan::load_checkpoint(ckpt_path);
    verify_hash(model->config_hash, hash, "model checkpoint");
  }

  const auto rows = evaluate_corpus(config, manifest_path, bank,
                                    model ? &*model : nullptr, systems);

  std::ofstream csv(out_csv, std::ios::trunc);
  MBSS_CHECK(csv.good(), DataError, "cannot write " + out_csv);
  csv << "system,utterance,num_speakers,speaker,input_sdr_db,output_sdr_db,"
         "improvement_db\n";
  for (const auto& row : rows)
    csv << row.system << "," << row.utterance << "," << row.num_speakers << ","
        << row.speaker << "," << fmt(row.input_sdr_db) << ","
        << fmt(row.output_sdr_db) << "," << fmt(row.improvement_db) << "\n";

  if (summary_csv.empty()) return;
  std::ofstream sum(summary_csv, std::ios::trunc);
  MBSS_CHECK(sum.good(), DataError, "cannot write " + summary_csv);
  sum << "system,num_speakers,utterances,mean_improvement_db";
  std::size_t max_c = 0;
  for (const auto& row : rows) max_c = std::max(max_c, row.num_speakers);
  for (std::size_t k = 1; k <= max_c; ++k) sum << ",top" << k << "_db";
  sum << "\n";

  for (const auto& system : systems) {
    // Rank improvements inside each utterance, then average per rank.
    std::vector<std::vector<double>> per_utt;
    for (const auto& row : rows) {
      if (row.system != system) continue;
      if (row.utterance >= per_utt.size()) per_utt.resize(row.utterance + 1);
      per_utt[row.utterance].push_back(row.improvement_db);
    }
    std::vector<double> rank_sums(max_c, 0.0);
    std::vector<std::size_t> rank_counts(max_c, 0);
    double total = 0.0;
    std::size_t count = 0, utts = 0;
    for (auto& imps : per_utt) {
      if (imps.empty()) continue;
      ++utts;
      std::sort(imps.begin(), imps.end(), std::greater<double>());
      for (std::size_t k = 0; k < imps.size(); ++k) {
        rank_sums[k] += imps[k];
        ++rank_counts[k];
        total += imps[k];
        ++count;
      }
    }
    if (count == 0) continue;
    sum << system << "," << max_c << "," << utts << ","
        << fmt(total / static_cast<double>(count));
    for (std::size_t k = 0; k < max_c; ++k) {
      sum << ",";
      if (rank_counts[k] > 0)
        sum << fmt(rank_sums[k] / static_cast<double>(rank_counts[k]));
    }
    sum << "\n";
  }
}

}  // namespace mbss::pipeline
