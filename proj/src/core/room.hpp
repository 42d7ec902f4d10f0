// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_ROOM_HPP
#define MBSS_CORE_ROOM_HPP

#include <cstdint>
#include <vector>

#include "geometry.hpp"
#include "wave.hpp"

namespace mbss::room {

// Shoebox room with uniform wall absorption.
struct RoomSpec {
  Vec3 dims;                          // length, width, height (m)
  double absorption = 0.3;            // in (0, 1]
  Vec3 array_center;                  // absolute position (m)
  std::vector<Vec3> source_positions; // absolute positions (m)
  int max_image_order = 6;
  double speed_of_sound = 343.0;

  void validate() const;
};

// Scene drawn by sample_scene: room plus derived per-source metadata.
struct SceneSpec {
  RoomSpec room;
  std::vector<double> source_azimuths_deg;  // relative to array center
  std::vector<double> mixing_snrs_db;       // first speaker fixed at 0
};

struct MixtureSample {
  dsp::MultichannelWave mixture;
  // Per-source reverberant images at every mic (scaled, truncated); the
  // single-channel references used for scoring are channel kReferenceMic.
  std::vector<dsp::MultichannelWave> source_images;
  std::vector<double> source_azimuths_deg;
  std::vector<double> mixing_snrs_db;
  RoomSpec room;
  std::uint64_t seed = 0;

  std::vector<double> reference(std::size_t c) const;
};

// Center mic of ArrayGeometry::circular.
inline constexpr std::size_t kReferenceMic = 0;

// Image-method room impulse response for one source, all mics. Taps are
// placed with an 81-tap Hann-windowed sinc at the exact fractional delay;
// amplitude per image is r^order / (4*pi*d) with r = sqrt(1 - absorption).
std::vector<std::vector<double>> image_method_rir(const RoomSpec& room,
                                                  std::size_t source_index,
                                                  const ArrayGeometry& geometry,
                                                  std::size_t rir_len,
                                                  int sample_rate);

// Per-channel linear convolution dry * rir, truncated to len(dry).
dsp::MultichannelWave render_source(const std::vector<double>& dry,
                                    const std::vector<std::vector<double>>& rir,
                                    int sample_rate);

struct SceneConstraints {
  std::size_t num_speakers = 2;
  // No 30-degree sector may contain more than this many sources.
  double sector_deg = 30.0;
  std::size_t max_per_sector = 2;
  // Optional extra constraint: minimum pairwise angular separation.
  double min_separation_deg = 0.0;
  // Speakers sit at conversational distance from the array.
  double min_source_distance_m = 0.5;
  double max_source_distance_m = 2.5;
  std::size_t rejection_budget = 10000;
};

// Draw room dimensions, absorption, array and source placements from the
// corpus generation ranges. Deterministic given the seed.
SceneSpec sample_scene(std::uint64_t seed, const SceneConstraints& constraints,
                       const ArrayGeometry& geometry);

// Render each dry source into the room, scale non-reference speakers to
// their mixing SNR (measured on reference-mic energy relative to speaker 1),
// truncate to the shortest image and sum. If scene.mixing_snrs_db is empty,
// SNRs are drawn from the seed in [-2.5, 2.5] dB.
MixtureSample generate_mixture(const std::vector<std::vector<double>>& dry_sources,
                               const SceneSpec& scene,
                               const ArrayGeometry& geometry, int sample_rate,
                               std::uint64_t seed, std::size_t rir_len = 4096);

// True when no sliding sector of the given width contains more than
// max_per_sector of the azimuths.
bool sector_constraint_holds(const std::vector<double>& azimuths_deg,
                             double sector_deg, std::size_t max_per_sector);

}  // namespace mbss::room

#endif  // MBSS_CORE_ROOM_HPP
