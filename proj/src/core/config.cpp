// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "config.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace mbss::pipeline {

using nlohmann::json;

namespace {

// Pull a field if present, rejecting unknown keys elsewhere via audit().
template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

void audit(const json& j, std::initializer_list<const char*> known,
           const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    MBSS_CHECK(ok, UsageError, "unknown config field '" + key + "' in " + where);
  }
}

std::string canonical_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void PipelineConfig::validate() const {
  MBSS_CHECK(sample_rate > 0, UsageError, "sample_rate must be positive");
  stft.validate();
  MBSS_CHECK(geometry.ring_radius_m > 0.0, UsageError, "ring radius must be > 0");
  MBSS_CHECK(geometry.num_ring_mics >= 1, UsageError, "need ring mics");
  MBSS_CHECK(bank.num_beams >= 2, UsageError, "need >= 2 beams");
  MBSS_CHECK(bank.freq_count >= 2, UsageError, "need >= 2 design frequencies");
  MBSS_CHECK(bank.freq_lo_hz > 0.0 && bank.freq_hi_hz > bank.freq_lo_hz &&
                 bank.freq_hi_hz <= sample_rate / 2.0,
             UsageError, "bank frequency range must lie in (0, fs/2]");
  MBSS_CHECK(model.num_bins == stft.frame_len / 2 + 1, UsageError,
             "model num_bins must equal frame_len/2 + 1");
  MBSS_CHECK(model.embedding_dim >= 2, UsageError, "embedding_dim must be >= 2");
  MBSS_CHECK(model.num_anchors >= model.num_salient + 1, UsageError,
             "need at least G+1 anchors");
  MBSS_CHECK(corpus.speakers >= 1, UsageError, "corpus speakers must be >= 1");
  MBSS_CHECK(separate.num_speakers >= 2, UsageError,
             "separation needs >= 2 speakers");
  MBSS_CHECK(training.batch_size >= 1, UsageError, "batch_size must be >= 1");
}

ArrayGeometry PipelineConfig::make_geometry() const {
  return ArrayGeometry::circular(geometry.ring_radius_m,
                                 geometry.num_ring_mics);
}

bf::BeamDesignParams PipelineConfig::make_bank_params() const {
  bf::BeamDesignParams p;
  p.freq_grid_hz = bf::BeamDesignParams::default_freq_grid(
      bank.freq_lo_hz, bank.freq_hi_hz, bank.freq_count);
  p.target = bf::SecondOrderTarget::from_nulls(bank.target_null_a_deg,
                                               bank.target_null_b_deg);
  p.wng_floor_db = bank.wng_floor_db;
  return p;
}

std::string PipelineConfig::config_hash() const {
  // Canonical text of the cross-stage contract fields only.
  std::ostringstream s;
  s << "sr=" << sample_rate << ";stft=" << stft.frame_len << "," << stft.hop
    << "," << dsp::to_string(stft.window)
    << ";geom=" << canonical_number(geometry.ring_radius_m) << ","
    << geometry.num_ring_mics << ";bank=" << bank.num_beams << ","
    << canonical_number(bank.freq_lo_hz) << ","
    << canonical_number(bank.freq_hi_hz) << "," << bank.freq_count << ","
    << canonical_number(bank.wng_floor_db) << ","
    << canonical_number(bank.target_null_a_deg) << ","
    << canonical_number(bank.target_null_b_deg) << ";model="
    << model.embedding_dim << "," << model.num_anchors << ","
    << model.num_salient << "," << (model.recurrent ? 1 : 0) << ","
    << canonical_number(model.log_floor) << "," << model.num_bins << ",";
  for (std::size_t u : model.layer_units) s << u << "+";

  const std::string text = s.str();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config parse error: ") + e.what());
  }

  PipelineConfig cfg;
  try {
    audit(j, {"sample_rate", "stft", "geometry", "bank", "model", "training",
              "corpus", "separate", "evaluate"},
          "top level");
    get_to(j, "sample_rate", cfg.sample_rate);
    if (j.contains("stft")) {
      const auto& s = j["stft"];
      audit(s, {"frame_len", "hop", "window"}, "stft");
      get_to(s, "frame_len", cfg.stft.frame_len);
      get_to(s, "hop", cfg.stft.hop);
      if (s.contains("window"))
        cfg.stft.window = dsp::window_from_string(s["window"].get<std::string>());
      cfg.model.num_bins = cfg.stft.frame_len / 2 + 1;
    }
    if (j.contains("geometry")) {
      const auto& g = j["geometry"];
      audit(g, {"ring_radius_m", "num_ring_mics"}, "geometry");
      get_to(g, "ring_radius_m", cfg.geometry.ring_radius_m);
      get_to(g, "num_ring_mics", cfg.geometry.num_ring_mics);
    }
    if (j.contains("bank")) {
      const auto& b = j["bank"];
      audit(b, {"num_beams", "freq_lo_hz", "freq_hi_hz", "freq_count",
                "wng_floor_db", "target_nulls_deg"},
            "bank");
      get_to(b, "num_beams", cfg.bank.num_beams);
      get_to(b, "freq_lo_hz", cfg.bank.freq_lo_hz);
      get_to(b, "freq_hi_hz", cfg.bank.freq_hi_hz);
      get_to(b, "freq_count", cfg.bank.freq_count);
      get_to(b, "wng_floor_db", cfg.bank.wng_floor_db);
      if (b.contains("target_nulls_deg")) {
        const auto nulls = b["target_nulls_deg"].get<std::vector<double>>();
        MBSS_CHECK(nulls.size() == 2, UsageError,
                   "target_nulls_deg needs two angles");
        cfg.bank.target_null_a_deg = nulls[0];
        cfg.bank.target_null_b_deg = nulls[1];
      }
    }
    if (j.contains("model")) {
      const auto& m = j["model"];
      audit(m, {"embedding_dim", "num_anchors", "layers", "recurrent",
                "num_salient", "log_floor", "init_seed"},
            "model");
      get_to(m, "embedding_dim", cfg.model.embedding_dim);
      get_to(m, "num_anchors", cfg.model.num_anchors);
      get_to(m, "layers", cfg.model.layer_units);
      get_to(m, "recurrent", cfg.model.recurrent);
      get_to(m, "num_salient", cfg.model.num_salient);
      get_to(m, "log_floor", cfg.model.log_floor);
      get_to(m, "init_seed", cfg.model_init_seed);
    }
    if (j.contains("training")) {
      const auto& t = j["training"];
      audit(t, {"steps", "step_size", "batch_size", "clip_norm", "seed"},
            "training");
      get_to(t, "steps", cfg.training.steps);
      get_to(t, "step_size", cfg.training.step_size);
      get_to(t, "batch_size", cfg.training.batch_size);
      get_to(t, "clip_norm", cfg.training.clip_norm);
      get_to(t, "seed", cfg.training.seed);
    }
    if (j.contains("corpus")) {
      const auto& c = j["corpus"];
      audit(c, {"count", "speakers", "seed", "min_separation_deg", "duration_s",
                "pool_speakers", "dry_pool_dir", "max_image_order", "rir_len",
                "out_dir"},
            "corpus");
      get_to(c, "count", cfg.corpus.count);
      get_to(c, "speakers", cfg.corpus.speakers);
      get_to(c, "seed", cfg.corpus.seed);
      get_to(c, "min_separation_deg", cfg.corpus.min_separation_deg);
      get_to(c, "duration_s", cfg.corpus.duration_s);
      get_to(c, "pool_speakers", cfg.corpus.pool_speakers);
      get_to(c, "dry_pool_dir", cfg.corpus.dry_pool_dir);
      get_to(c, "max_image_order", cfg.corpus.max_image_order);
      get_to(c, "rir_len", cfg.corpus.rir_len);
      get_to(c, "out_dir", cfg.corpus.out_dir);
    }
    if (j.contains("separate")) {
      const auto& s = j["separate"];
      audit(s, {"num_speakers", "affinity_on_log", "cluster_seed"}, "separate");
      get_to(s, "num_speakers", cfg.separate.num_speakers);
      get_to(s, "affinity_on_log", cfg.separate.affinity_on_log);
      get_to(s, "cluster_seed", cfg.separate.cluster_seed);
    }
    if (j.contains("evaluate")) {
      const auto& e = j["evaluate"];
      audit(e, {"systems"}, "evaluate");
      get_to(e, "systems", cfg.systems);
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("config type error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  MBSS_CHECK(in.good(), UsageError, "cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string PipelineConfig::to_json_text() const {
  json j;
  j["sample_rate"] = sample_rate;
  j["stft"] = {{"frame_len", stft.frame_len},
               {"hop", stft.hop},
               {"window", dsp::to_string(stft.window)}};
  j["geometry"] = {{"ring_radius_m", geometry.ring_radius_m},
                   {"num_ring_mics", geometry.num_ring_mics}};
  j["bank"] = {{"num_beams", bank.num_beams},
               {"freq_lo_hz", bank.freq_lo_hz},
               {"freq_hi_hz", bank.freq_hi_hz},
               {"freq_count", bank.freq_count},
               {"wng_floor_db", bank.wng_floor_db},
               {"target_nulls_deg",
                std::vector<double>{bank.target_null_a_deg,
                                    bank.target_null_b_deg}}};
  j["model"] = {{"embedding_dim", model.embedding_dim},
                {"num_anchors", model.num_anchors},
                {"layers", model.layer_units},
                {"recurrent", model.recurrent},
                {"num_salient", model.num_salient},
                {"log_floor", model.log_floor},
                {"init_seed", model_init_seed}};
  j["training"] = {{"steps", training.steps},
                   {"step_size", training.step_size},
                   {"batch_size", training.batch_size},
                   {"clip_norm", training.clip_norm},
                   {"seed", training.seed}};
  j["corpus"] = {{"count", corpus.count},
                 {"speakers", corpus.speakers},
                 {"seed", corpus.seed},
                 {"min_separation_deg", corpus.min_separation_deg},
                 {"duration_s", corpus.duration_s},
                 {"pool_speakers", corpus.pool_speakers},
                 {"dry_pool_dir", corpus.dry_pool_dir},
                 {"max_image_order", corpus.max_image_order},
                 {"rir_len", corpus.rir_len},
                 {"out_dir", corpus.out_dir}};
  j["separate"] = {{"num_speakers", separate.num_speakers},
                   {"affinity_on_log", separate.affinity_on_log},
                   {"cluster_seed", separate.cluster_seed}};
  j["evaluate"] = {{"systems", systems}};
  return j.dump(2);
}

}  // namespace mbss::pipeline
