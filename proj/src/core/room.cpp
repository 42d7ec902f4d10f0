// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "room.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "fft.hpp"

namespace mbss::room {

namespace {

constexpr int kSincHalfWidth = 40;  // 81-tap interpolation kernel

// Accumulate amplitude * sinc interpolated at fractional delay (in samples).
void add_tap(std::vector<double>& rir, double delay, double amplitude) {
  const int center = static_cast<int>(std::lround(delay));
  for (int i = center - kSincHalfWidth; i <= center + kSincHalfWidth; ++i) {
    if (i < 0 || i >= static_cast<int>(rir.size())) continue;
    const double t = i - delay;
    double sinc = 1.0;
    if (t != 0.0) sinc = std::sin(kPi * t) / (kPi * t);
    // Hann taper over the kernel support, centered on the exact delay.
    const double u = t / (kSincHalfWidth + 1);
    const double taper = 0.5 + 0.5 * std::cos(kPi * u);
    rir[i] += amplitude * sinc * taper;
  }
}

// Mirrored source coordinate along one axis: n reflections against the pair
// of walls at 0 and room_dim.
double image_coord(double src, double room_dim, int n) {
  if (n % 2 == 0) return n * room_dim + src;
  return n * room_dim + (room_dim - src);
}

double wrap_deg(double a) {
  a = std::fmod(a, 360.0);
  if (a < 0.0) a += 360.0;
  return a;
}

}  // namespace

void RoomSpec::validate() const {
  MBSS_CHECK(dims.x > 0 && dims.y > 0 && dims.z > 0, UsageError,
             "room dimensions must be positive");
  MBSS_CHECK(absorption > 0.0 && absorption <= 1.0, UsageError,
             "absorption must be in (0, 1]");
  MBSS_CHECK(max_image_order >= 0, UsageError, "image order must be >= 0");
  MBSS_CHECK(speed_of_sound > 0.0, UsageError, "speed of sound must be > 0");
  MBSS_CHECK(!source_positions.empty(), UsageError, "room needs >= 1 source");
  auto inside = [&](const Vec3& p) {
    return p.x > 0 && p.x < dims.x && p.y > 0 && p.y < dims.y && p.z > 0 &&
           p.z < dims.z;
  };
  MBSS_CHECK(inside(array_center), UsageError, "array center outside room");
  for (const auto& s : source_positions)
    MBSS_CHECK(inside(s), UsageError, "source position outside room");
}

std::vector<double> MixtureSample::reference(std::size_t c) const {
  MBSS_CHECK(c < source_images.size(), UsageError, "reference index out of range");
  return source_images[c].samples[kReferenceMic];
}

std::vector<std::vector<double>> image_method_rir(const RoomSpec& room,
                                                  std::size_t source_index,
                                                  const ArrayGeometry& geometry,
                                                  std::size_t rir_len,
                                                  int sample_rate) {
  room.validate();
  geometry.validate();
  MBSS_CHECK(source_index < room.source_positions.size(), UsageError,
             "source index out of range");
  MBSS_CHECK(sample_rate > 0, UsageError, "sample rate must be positive");

  const Vec3 src = room.source_positions[source_index];
  const double reflect_mag = std::sqrt(1.0 - room.absorption);
  const int order = room.max_image_order;
  const double fs = sample_rate;
  const double c = room.speed_of_sound;

  // rir_len must at least cover the farthest direct-path tap.
  double max_direct = 0.0;
  for (const auto& rel : geometry.mic_positions) {
    const Vec3 mic = room.array_center + rel;
    max_direct = std::max(max_direct, (src - mic).norm());
  }
  MBSS_CHECK(static_cast<double>(rir_len) >
                 max_direct / c * fs + kSincHalfWidth,
             DataError, "rir_len too short for the direct path");

  std::vector<std::vector<double>> rir(geometry.num_mics(),
                                       std::vector<double>(rir_len, 0.0));
  for (std::size_t m = 0; m < geometry.num_mics(); ++m) {
    const Vec3 mic = room.array_center + geometry.mic_positions[m];
    for (int nx = -order; nx <= order; ++nx) {
      const double ix = image_coord(src.x, room.dims.x, nx);
      for (int ny = -order; ny <= order; ++ny) {
        const double iy = image_coord(src.y, room.dims.y, ny);
        for (int nz = -order; nz <= order; ++nz) {
          const double iz = image_coord(src.z, room.dims.z, nz);
          const Vec3 image{ix, iy, iz};
          const double d = (image - mic).norm();
          const int reflections = std::abs(nx) + std::abs(ny) + std::abs(nz);
          const double amp =
              std::pow(reflect_mag, reflections) / (4.0 * kPi * d);
          if (amp == 0.0) continue;
          const double delay = d / c * fs;
          if (delay - kSincHalfWidth >= static_cast<double>(rir_len)) continue;
          add_tap(rir[m], delay, amp);
        }
      }
    }
  }
  return rir;
}

dsp::MultichannelWave render_source(const std::vector<double>& dry,
                                    const std::vector<std::vector<double>>& rir,
                                    int sample_rate) {
  MBSS_CHECK(!dry.empty() && !rir.empty() && !rir[0].empty(), UsageError,
             "render_source needs non-empty inputs");
  const std::size_t out_len = dry.size();
  const std::size_t taps = rir[0].size();

  // FFT convolution; the full linear result is truncated to len(dry).
  std::size_t n = 1;
  while (n < out_len + taps - 1) n <<= 1;
  dsp::RealFft fft(n);

  std::vector<double> padded_dry(n, 0.0);
  std::copy(dry.begin(), dry.end(), padded_dry.begin());
  const auto dry_spec = fft.forward(padded_dry);

  dsp::MultichannelWave out(rir.size(), out_len, sample_rate);
  std::vector<double> padded_rir(n);
  for (std::size_t m = 0; m < rir.size(); ++m) {
    MBSS_CHECK(rir[m].size() == taps, DataError, "ragged RIR matrix");
    std::fill(padded_rir.begin(), padded_rir.end(), 0.0);
    std::copy(rir[m].begin(), rir[m].end(), padded_rir.begin());
    auto spec = fft.forward(padded_rir);
    for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= dry_spec[k];
    const auto conv = fft.inverse(spec);
    std::copy(conv.begin(), conv.begin() + out_len, out.samples[m].begin());
  }
  return out;
}

bool sector_constraint_holds(const std::vector<double>& azimuths_deg,
                             double sector_deg, std::size_t max_per_sector) {
  // Slide a sector anchored at each azimuth; this covers all extrema.
  for (double anchor : azimuths_deg) {
    std::size_t count = 0;
    for (double a : azimuths_deg) {
      const double diff = wrap_deg(a - anchor);
      if (diff <= sector_deg + 1e-12) ++count;
    }
    if (count > max_per_sector) return false;
  }
  return true;
}

SceneSpec sample_scene(std::uint64_t seed, const SceneConstraints& constraints,
                       const ArrayGeometry& geometry) {
  MBSS_CHECK(constraints.num_speakers >= 1, UsageError, "need >= 1 speaker");
  geometry.validate();
  Rng rng(seed);

  double array_radius = 0.0;
  for (const auto& p : geometry.mic_positions)
    array_radius = std::max(array_radius, p.norm());
  const double wall_margin = 0.05;
  const double array_margin = array_radius + wall_margin;

  for (std::size_t attempt = 0; attempt < constraints.rejection_budget;
       ++attempt) {
    SceneSpec scene;
    scene.room.dims = {rng.uniform(1.0, 10.0), rng.uniform(1.0, 10.0),
                       rng.uniform(2.5, 4.0)};
    scene.room.absorption = rng.uniform(0.2, 0.5);
    const Vec3& dims = scene.room.dims;
    // Rooms too small to hold the array plus the talker ring are redrawn.
    if (dims.x <= 2 * (array_margin + constraints.min_source_distance_m) ||
        dims.y <= 2 * (array_margin + constraints.min_source_distance_m))
      continue;
    scene.room.array_center = {
        rng.uniform(array_margin, dims.x - array_margin),
        rng.uniform(array_margin, dims.y - array_margin),
        rng.uniform(1.0, std::min(2.0, dims.z - wall_margin))};

    bool ok = true;
    for (std::size_t c = 0; c < constraints.num_speakers && ok; ++c) {
      bool placed = false;
      for (int tries = 0; tries < 100; ++tries) {
        // Draw direction and conversational distance around the array.
        const double az = rng.uniform(0.0, 360.0);
        const double dist = rng.uniform(constraints.min_source_distance_m,
                                        constraints.max_source_distance_m);
        const Vec3 pos =
            scene.room.array_center +
            azimuth_unit(az) * dist +
            Vec3{0.0, 0.0, rng.uniform(-0.3, 0.6)};
        if (pos.x <= wall_margin || pos.x >= dims.x - wall_margin ||
            pos.y <= wall_margin || pos.y >= dims.y - wall_margin ||
            pos.z <= wall_margin || pos.z >= dims.z - wall_margin)
          continue;

        std::vector<double> az_so_far = scene.source_azimuths_deg;
        az_so_far.push_back(az);
        if (!sector_constraint_holds(az_so_far, constraints.sector_deg,
                                     constraints.max_per_sector))
          continue;
        if (constraints.min_separation_deg > 0.0) {
          bool separated = true;
          for (double prev : scene.source_azimuths_deg) {
            double diff = std::fabs(wrap_deg(az - prev));
            diff = std::min(diff, 360.0 - diff);
            if (diff < constraints.min_separation_deg) separated = false;
          }
          if (!separated) continue;
        }
        scene.room.source_positions.push_back(pos);
        scene.source_azimuths_deg.push_back(az);
        placed = true;
        break;
      }
      if (!placed) ok = false;
    }
    if (!ok) continue;

    scene.mixing_snrs_db.assign(constraints.num_speakers, 0.0);
    for (std::size_t c = 1; c < constraints.num_speakers; ++c)
      scene.mixing_snrs_db[c] = rng.uniform(-2.5, 2.5);
    scene.room.validate();
    return scene;
  }
  throw NumericError("sample_scene: rejection budget exhausted");
}

MixtureSample generate_mixture(const std::vector<std::vector<double>>& dry_sources,
                               const SceneSpec& scene,
                               const ArrayGeometry& geometry, int sample_rate,
                               std::uint64_t seed, std::size_t rir_len) {
  const std::size_t num_sources = dry_sources.size();
  MBSS_CHECK(num_sources >= 1, UsageError, "need >= 1 dry source");
  MBSS_CHECK(scene.room.source_positions.size() == num_sources, UsageError,
             "scene source count mismatch");
  for (const auto& dry : dry_sources)
    MBSS_CHECK(dsp::energy(dry) > 0.0, DataError,
               "silent dry source cannot be SNR-scaled");

  std::vector<double> snrs = scene.mixing_snrs_db;
  if (snrs.empty()) {
    Rng rng(seed);
    snrs.assign(num_sources, 0.0);
    for (std::size_t c = 1; c < num_sources; ++c)
      snrs[c] = rng.uniform(-2.5, 2.5);
  }
  MBSS_CHECK(snrs.size() == num_sources, UsageError, "SNR count mismatch");

  std::vector<dsp::MultichannelWave> images;
  images.reserve(num_sources);
  std::size_t min_len = SIZE_MAX;
  for (std::size_t c = 0; c < num_sources; ++c) {
    const auto rir =
        image_method_rir(scene.room, c, geometry, rir_len, sample_rate);
    images.push_back(render_source(dry_sources[c], rir, sample_rate));
    min_len = std::min(min_len, images.back().length());
  }

  // Truncate to the shortest image so the mixture is fully overlapped.
  for (auto& img : images)
    for (auto& ch : img.samples) ch.resize(min_len);

  // Scale non-reference speakers to the drawn SNR, measured on the
  // reference-mic energy relative to speaker 1.
  const double ref_energy = dsp::energy(images[0].samples[kReferenceMic]);
  MBSS_CHECK(ref_energy > 0.0, DataError, "reference speaker image is silent");
  for (std::size_t c = 1; c < num_sources; ++c) {
    const double e = dsp::energy(images[c].samples[kReferenceMic]);
    MBSS_CHECK(e > 0.0, DataError, "speaker image is silent");
    // mixing SNR of speaker c relative to speaker 1: 10*log10(Ec/E1) = snr.
    const double gain = std::sqrt(ref_energy / e *
                                  std::pow(10.0, snrs[c] / 10.0));
    for (auto& ch : images[c].samples)
      for (double& v : ch) v *= gain;
  }

  MixtureSample sample;
  sample.mixture =
      dsp::MultichannelWave(geometry.num_mics(), min_len, sample_rate);
  for (const auto& img : images)
    for (std::size_t m = 0; m < geometry.num_mics(); ++m)
      for (std::size_t i = 0; i < min_len; ++i)
        sample.mixture.samples[m][i] += img.samples[m][i];

  sample.source_images = std::move(images);
  sample.source_azimuths_deg = scene.source_azimuths_deg;
  sample.mixing_snrs_db = snrs;
  sample.room = scene.room;
  sample.seed = seed;
  return sample;
}

}  // namespace mbss::room
