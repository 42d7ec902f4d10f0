// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_CORPUS_HPP
#define MBSS_CORE_CORPUS_HPP

#include <string>
#include <vector>

#include "config.hpp"
#include "room.hpp"

namespace mbss::pipeline {

struct ManifestRecord {
  std::string mixture_path;                 // relative to the manifest dir
  std::vector<std::string> reference_paths; // M-channel source image files
  std::vector<double> azimuths_deg;
  std::vector<double> snrs_db;
  std::uint64_t seed = 0;
  Vec3 room_dims;
  double absorption = 0.0;
  Vec3 array_center;                        // absolute, meters
  std::vector<Vec3> source_positions;       // absolute, meters
  std::string config_hash;
};

// Generate `count` mixtures into out_dir and write manifest.jsonl. Returns
// the manifest path. Deterministic for a fixed config.
std::string build_corpus(const PipelineConfig& config,
                         const std::string& out_dir);

std::vector<ManifestRecord> read_manifest(const std::string& manifest_path);

// Loaded mixture plus its per-source image waves.
struct CorpusEntry {
  dsp::MultichannelWave mixture;
  std::vector<dsp::MultichannelWave> source_images;
  ManifestRecord record;

  std::vector<double> reference(std::size_t c) const {
    return source_images[c].samples[room::kReferenceMic];
  }
};

CorpusEntry load_entry(const std::string& manifest_path,
                       const ManifestRecord& record);

}  // namespace mbss::pipeline

#endif  // MBSS_CORE_CORPUS_HPP
