// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "corpus.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sources.hpp"
#include "wav_io.hpp"

namespace mbss::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

std::string build_corpus(const PipelineConfig& config,
                         const std::string& out_dir) {
  config.validate();
  const auto& cp = config.corpus;
  fs::create_directories(out_dir);

  const ArrayGeometry geometry = config.make_geometry();
  const std::string hash = config.config_hash();

  room::DrySourcePool pool =
      cp.dry_pool_dir.empty()
          ? room::DrySourcePool(cp.pool_speakers, config.sample_rate)
          : room::DrySourcePool(cp.dry_pool_dir, config.sample_rate);
  MBSS_CHECK(pool.num_speakers() >= cp.speakers, UsageError,
             "dry source pool smaller than the per-mixture speaker count");

  const std::string manifest_path =
      (fs::path(out_dir) / "manifest.jsonl").string();
  std::ofstream manifest(manifest_path, std::ios::trunc);
  MBSS_CHECK(manifest.good(), DataError, "cannot write " + manifest_path);

  room::SceneConstraints constraints;
  constraints.num_speakers = cp.speakers;
  constraints.min_separation_deg = cp.min_separation_deg;

  for (std::size_t idx = 0; idx < cp.count; ++idx) {
    const std::uint64_t mix_seed = cp.seed + 1000003ull * idx;
    Rng rng(mix_seed);

    // Distinct pool speakers for this mixture.
    std::vector<std::size_t> speakers;
    while (speakers.size() < cp.speakers) {
      const std::size_t s = rng.next_index(pool.num_speakers());
      bool dup = false;
      for (std::size_t prev : speakers) dup |= prev == s;
      if (!dup) speakers.push_back(s);
    }
    std::vector<std::vector<double>> dry;
    dry.reserve(cp.speakers);
    for (std::size_t c = 0; c < cp.speakers; ++c)
      dry.push_back(pool.utterance(speakers[c], rng.raw(),
                                   cp.duration_s * rng.uniform(0.9, 1.1)));

    room::SceneSpec scene = room::sample_scene(rng.raw(), constraints, geometry);
    scene.room.max_image_order = cp.max_image_order;
    auto sample = room::generate_mixture(dry, scene, geometry,
                                         config.sample_rate, mix_seed,
                                         cp.rir_len);

    char name[64];
    std::snprintf(name, sizeof(name), "mix_%04zu.wav", idx);
    dsp::write_wav((fs::path(out_dir) / name).string(), sample.mixture);

    json rec;
    rec["mixture_path"] = name;
    json ref_paths = json::array();
    for (std::size_t c = 0; c < cp.speakers; ++c) {
      char ref_name[64];
      std::snprintf(ref_name, sizeof(ref_name), "mix_%04zu_src%zu.wav", idx, c);
      dsp::write_wav((fs::path(out_dir) / ref_name).string(),
                     sample.source_images[c]);
      ref_paths.push_back(ref_name);
    }
    rec["reference_paths"] = ref_paths;
    rec["azimuths_deg"] = sample.source_azimuths_deg;
    rec["snrs_db"] = sample.mixing_snrs_db;
    rec["seed"] = mix_seed;
    rec["room"] = {{"dims",
                    {scene.room.dims.x, scene.room.dims.y, scene.room.dims.z}},
                   {"absorption", scene.room.absorption}};
    rec["array_center"] = {scene.room.array_center.x, scene.room.array_center.y,
                           scene.room.array_center.z};
    json positions = json::array();
    for (const auto& p : scene.room.source_positions)
      positions.push_back({p.x, p.y, p.z});
    rec["source_positions"] = positions;
    rec["config_hash"] = hash;
    manifest << rec.dump() << "\n";
  }
  MBSS_CHECK(manifest.good(), DataError, "write failed for " + manifest_path);
  return manifest_path;
}

std::vector<ManifestRecord> read_manifest(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  MBSS_CHECK(in.good(), DataError, "cannot open manifest " + manifest_path);

  std::vector<ManifestRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(std::string("manifest parse error: ") + e.what());
    }
    try {
      ManifestRecord r;
      r.mixture_path = rec.at("mixture_path").get<std::string>();
      r.reference_paths =
          rec.at("reference_paths").get<std::vector<std::string>>();
      r.azimuths_deg = rec.at("azimuths_deg").get<std::vector<double>>();
      r.snrs_db = rec.at("snrs_db").get<std::vector<double>>();
      r.seed = rec.at("seed").get<std::uint64_t>();
      const auto dims = rec.at("room").at("dims").get<std::vector<double>>();
      MBSS_CHECK(dims.size() == 3, DataError, "room dims must have 3 entries");
      r.room_dims = {dims[0], dims[1], dims[2]};
      r.absorption = rec.at("room").at("absorption").get<double>();
      if (rec.contains("array_center")) {
        const auto ac = rec["array_center"].get<std::vector<double>>();
        r.array_center = {ac[0], ac[1], ac[2]};
      }
      if (rec.contains("source_positions")) {
        for (const auto& p :
             rec["source_positions"].get<std::vector<std::vector<double>>>())
          r.source_positions.push_back({p[0], p[1], p[2]});
      }
      if (rec.contains("config_hash"))
        r.config_hash = rec["config_hash"].get<std::string>();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(std::string("manifest field error: ") + e.what());
    }
  }
  return records;
}

CorpusEntry load_entry(const std::string& manifest_path,
                       const ManifestRecord& record) {
  const fs::path base = fs::path(manifest_path).parent_path();
  CorpusEntry entry;
  entry.record = record;
  entry.mixture = dsp::read_wav((base / record.mixture_path).string());
  for (const auto& ref : record.reference_paths)
    entry.source_images.push_back(dsp::read_wav((base / ref).string()));
  for (const auto& img : entry.source_images)
    MBSS_CHECK(img.length() == entry.mixture.length() &&
                   img.num_channels() == entry.mixture.num_channels(),
               DataError, "reference/mixture shape mismatch in corpus");
  return entry;
}

}  // namespace mbss::pipeline
