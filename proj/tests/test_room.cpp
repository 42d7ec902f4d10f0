// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "common.hpp"
#include "room.hpp"
#include "sources.hpp"

using namespace mbss;
using namespace mbss::room;

namespace {

// Independent image enumeration for the oracle: mirrored positions are built
// by composing explicit single-wall reflections instead of the closed-form
// lattice, and taps are placed with a locally written interpolation kernel.
struct OracleImage {
  Vec3 pos;
  int reflections;
};

double reflect_low(double v) { return -v; }
double reflect_high(double v, double dim) { return 2.0 * dim - v; }

std::vector<OracleImage> oracle_first_order_images(const Vec3& src,
                                                   const Vec3& dims) {
  std::vector<OracleImage> images;
  for (int ax : {-1, 0, 1}) {
    for (int ay : {-1, 0, 1}) {
      for (int az : {-1, 0, 1}) {
        Vec3 p = src;
        int refl = 0;
        if (ax == -1) { p.x = reflect_low(p.x); ++refl; }
        if (ax == +1) { p.x = reflect_high(p.x, dims.x); ++refl; }
        if (ay == -1) { p.y = reflect_low(p.y); ++refl; }
        if (ay == +1) { p.y = reflect_high(p.y, dims.y); ++refl; }
        if (az == -1) { p.z = reflect_low(p.z); ++refl; }
        if (az == +1) { p.z = reflect_high(p.z, dims.z); ++refl; }
        images.push_back({p, refl});
      }
    }
  }
  return images;
}

std::vector<double> oracle_rir(const RoomSpec& room, const Vec3& mic_abs,
                               std::size_t rir_len, int fs) {
  const double r = std::sqrt(1.0 - room.absorption);
  std::vector<double> rir(rir_len, 0.0);
  for (const auto& img :
       oracle_first_order_images(room.source_positions[0], room.dims)) {
    const double d = (img.pos - mic_abs).norm();
    const double amp = std::pow(r, img.reflections) / (4.0 * kPi * d);
    const double delay = d / room.speed_of_sound * fs;
    const int center = static_cast<int>(std::lround(delay));
    for (int i = center - 40; i <= center + 40; ++i) {
      if (i < 0 || i >= static_cast<int>(rir_len)) continue;
      const double t = i - delay;
      const double sinc = t == 0.0 ? 1.0 : std::sin(kPi * t) / (kPi * t);
      const double win = 0.5 + 0.5 * std::cos(kPi * t / 41.0);
      rir[i] += amp * sinc * win;
    }
  }
  return rir;
}

RoomSpec basic_room() {
  RoomSpec room;
  room.dims = {6.0, 5.0, 3.0};
  room.absorption = 0.36;
  room.array_center = {2.5, 2.0, 1.5};
  room.source_positions = {{4.0, 3.5, 1.7}};
  room.max_image_order = 1;
  return room;
}

}  // namespace

TEST_CASE("direct path lands at the exact sample with 1/(4 pi d) amplitude") {
  RoomSpec room;
  room.dims = {20.0, 20.0, 10.0};
  room.absorption = 0.3;
  room.array_center = {5.0, 5.0, 2.0};
  room.source_positions = {{5.0 + 3.43, 5.0, 2.0}};  // 3.43 m -> 80 samples
  room.max_image_order = 0;

  ArrayGeometry mono;
  mono.mic_positions = {{0.0, 0.0, 0.0}};
  const auto rir = image_method_rir(room, 0, mono, 512, 8000);

  const auto peak = std::max_element(rir[0].begin(), rir[0].end());
  CHECK(std::distance(rir[0].begin(), peak) == 80);
  CHECK(*peak == doctest::Approx(1.0 / (4.0 * kPi * 3.43)).epsilon(1e-9));
}

TEST_CASE("order-1 RIR matches the brute-force image enumeration oracle") {
  const RoomSpec room = basic_room();
  const auto geometry = ArrayGeometry::circular();
  const auto rir = image_method_rir(room, 0, geometry, 1024, 8000);

  for (std::size_t m = 0; m < geometry.num_mics(); ++m) {
    const Vec3 mic_abs = room.array_center + geometry.mic_positions[m];
    const auto expected = oracle_rir(room, mic_abs, 1024, 8000);
    double max_abs = 0.0;
    for (double v : expected) max_abs = std::max(max_abs, std::fabs(v));
    for (std::size_t i = 0; i < expected.size(); ++i)
      CHECK(std::fabs(rir[m][i] - expected[i]) <= 1e-9 * max_abs);
  }
}

TEST_CASE("full absorption leaves only the direct path") {
  RoomSpec room = basic_room();
  room.absorption = 1.0;
  room.max_image_order = 3;
  ArrayGeometry mono;
  mono.mic_positions = {{0.0, 0.0, 0.0}};
  const auto with_walls = image_method_rir(room, 0, mono, 2048, 8000);

  room.max_image_order = 0;
  const auto direct = image_method_rir(room, 0, mono, 2048, 8000);
  for (std::size_t i = 0; i < with_walls[0].size(); ++i)
    CHECK(with_walls[0][i] == doctest::Approx(direct[0][i]).epsilon(1e-12));
}

TEST_CASE("direct-path delay law holds for 100 random geometries") {
  Rng rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    RoomSpec room;
    room.dims = {rng.uniform(4.0, 10.0), rng.uniform(4.0, 10.0),
                 rng.uniform(2.5, 4.0)};
    room.absorption = rng.uniform(0.2, 0.5);
    room.array_center = {rng.uniform(1.0, room.dims.x - 1.0),
                         rng.uniform(1.0, room.dims.y - 1.0),
                         rng.uniform(1.0, room.dims.z - 1.0)};
    room.source_positions = {{rng.uniform(0.5, room.dims.x - 0.5),
                              rng.uniform(0.5, room.dims.y - 0.5),
                              rng.uniform(0.5, room.dims.z - 0.5)}};
    const double d = (room.source_positions[0] - room.array_center).norm();
    if (d < 0.4) continue;
    room.max_image_order = 0;

    ArrayGeometry mono;
    mono.mic_positions = {{0.0, 0.0, 0.0}};
    const auto rir = image_method_rir(room, 0, mono, 4096, 8000);
    const auto peak = std::max_element(rir[0].begin(), rir[0].end());
    const long idx = std::distance(rir[0].begin(), peak);
    const long expected = std::lround(8000.0 * d / 343.0);
    CHECK(std::labs(idx - expected) <= 1);
  }
}

TEST_CASE("RIR energy does not increase with absorption") {
  RoomSpec room = basic_room();
  room.max_image_order = 4;
  ArrayGeometry mono;
  mono.mic_positions = {{0.0, 0.0, 0.0}};

  room.absorption = 0.2;
  const auto lively = image_method_rir(room, 0, mono, 4096, 8000);
  room.absorption = 0.5;
  const auto damped = image_method_rir(room, 0, mono, 4096, 8000);
  CHECK(dsp::energy(damped[0]) <= dsp::energy(lively[0]));
}

TEST_CASE("unit-impulse RIR replicates the dry signal") {
  std::vector<std::vector<double>> rir(3, std::vector<double>(16, 0.0));
  for (auto& ch : rir) ch[0] = 1.0;
  const std::vector<double> dry{0.5, -0.25, 0.125, 0.9, -0.3};
  const auto out = render_source(dry, rir, 8000);
  REQUIRE(out.num_channels() == 3);
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t i = 0; i < dry.size(); ++i)
      CHECK(out.samples[ch][i] == doctest::Approx(dry[i]).epsilon(1e-12));
}

TEST_CASE("delayed-impulse RIR shifts the dry signal") {
  std::vector<std::vector<double>> rir(1, std::vector<double>(16, 0.0));
  rir[0][3] = 1.0;
  const std::vector<double> dry{1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
  const auto out = render_source(dry, rir, 8000);
  for (std::size_t i = 0; i < dry.size(); ++i) {
    const double expected = i >= 3 ? dry[i - 3] : 0.0;
    CHECK(out.samples[0][i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("render_source matches the naive convolution oracle") {
  Rng rng(99);
  std::vector<double> dry(64);
  for (double& v : dry) v = rng.normal();
  std::vector<std::vector<double>> rir(2, std::vector<double>(8));
  for (auto& ch : rir)
    for (double& v : ch) v = rng.normal();

  const auto out = render_source(dry, rir, 8000);
  for (std::size_t ch = 0; ch < 2; ++ch) {
    for (std::size_t i = 0; i < dry.size(); ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < rir[ch].size(); ++k)
        if (i >= k) acc += dry[i - k] * rir[ch][k];
      CHECK(std::fabs(out.samples[ch][i] - acc) <= 1e-12);
    }
  }
}

TEST_CASE("two co-located speakers are always accepted") {
  SceneConstraints cons;
  cons.num_speakers = 2;
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 17ull}) {
    const auto scene = sample_scene(seed, cons, ArrayGeometry::circular());
    CHECK(scene.source_azimuths_deg.size() == 2);
    CHECK(scene.mixing_snrs_db[0] == 0.0);
    CHECK(std::fabs(scene.mixing_snrs_db[1]) <= 2.5);
  }
}

TEST_CASE("sector constraint helper flags three sources within 30 degrees") {
  CHECK(sector_constraint_holds({10.0, 20.0, 200.0}, 30.0, 2));
  CHECK_FALSE(sector_constraint_holds({10.0, 20.0, 25.0}, 30.0, 2));
  // Wraparound window
  CHECK_FALSE(sector_constraint_holds({355.0, 5.0, 15.0}, 30.0, 2));
}

TEST_CASE("sampled 4-speaker scenes satisfy the angular constraint") {
  SceneConstraints cons;
  cons.num_speakers = 4;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto scene = sample_scene(seed, cons, ArrayGeometry::circular());
    CHECK(sector_constraint_holds(scene.source_azimuths_deg, 30.0, 2));
  }
}

TEST_CASE("scene sampling is deterministic") {
  SceneConstraints cons;
  cons.num_speakers = 3;
  const auto a = sample_scene(77, cons, ArrayGeometry::circular());
  const auto b = sample_scene(77, cons, ArrayGeometry::circular());
  CHECK(a.room.dims.x == b.room.dims.x);
  CHECK(a.room.absorption == b.room.absorption);
  REQUIRE(a.source_azimuths_deg.size() == b.source_azimuths_deg.size());
  for (std::size_t i = 0; i < a.source_azimuths_deg.size(); ++i) {
    CHECK(a.source_azimuths_deg[i] == b.source_azimuths_deg[i]);
    CHECK(a.room.source_positions[i].x == b.room.source_positions[i].x);
  }
}

TEST_CASE("minimum separation constraint is honored") {
  SceneConstraints cons;
  cons.num_speakers = 2;
  cons.min_separation_deg = 90.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto scene = sample_scene(seed, cons, ArrayGeometry::circular());
    double diff = std::fabs(scene.source_azimuths_deg[0] -
                            scene.source_azimuths_deg[1]);
    diff = std::fmod(diff, 360.0);
    diff = std::min(diff, 360.0 - diff);
    CHECK(diff >= 90.0);
  }
}

TEST_CASE("zero-SNR draw equalizes reference-mic energies") {
  const auto geometry = ArrayGeometry::circular();
  DrySourcePool pool(4, 8000);
  const std::vector<std::vector<double>> dry{pool.utterance(0, 5, 1.0),
                                             pool.utterance(3, 6, 1.0)};
  SceneConstraints cons;
  cons.num_speakers = 2;
  auto scene = sample_scene(123, cons, geometry);
  scene.mixing_snrs_db = {0.0, 0.0};

  const auto sample = generate_mixture(dry, scene, geometry, 8000, 9, 2048);
  const double e0 = dsp::energy(sample.reference(0));
  const double e1 = dsp::energy(sample.reference(1));
  CHECK(std::fabs(e0 - e1) <= 1e-9 * e0);
}

TEST_CASE("mixture equals the sum of source images exactly") {
  const auto geometry = ArrayGeometry::circular();
  DrySourcePool pool(4, 8000);
  const std::vector<std::vector<double>> dry{pool.utterance(0, 1, 0.8),
                                             pool.utterance(2, 2, 0.9)};
  SceneConstraints cons;
  cons.num_speakers = 2;
  const auto scene = sample_scene(321, cons, geometry);
  const auto sample = generate_mixture(dry, scene, geometry, 8000, 11, 2048);

  const std::size_t len = sample.mixture.length();
  CHECK(len == std::min(dry[0].size(), dry[1].size()));
  for (std::size_t m = 0; m < sample.mixture.num_channels(); ++m) {
    double max_abs = 0.0;
    for (double v : sample.mixture.samples[m])
      max_abs = std::max(max_abs, std::fabs(v));
    for (std::size_t i = 0; i < len; ++i) {
      const double sum = sample.source_images[0].samples[m][i] +
                         sample.source_images[1].samples[m][i];
      CHECK(std::fabs(sample.mixture.samples[m][i] - sum) <= 1e-12 * max_abs);
    }
  }
}

TEST_CASE("identical dry sources at identical positions double the image") {
  const auto geometry = ArrayGeometry::circular();
  DrySourcePool pool(2, 8000);
  const auto dry = pool.utterance(0, 7, 0.6);

  SceneConstraints cons;
  cons.num_speakers = 2;
  auto scene = sample_scene(55, cons, geometry);
  scene.room.source_positions[1] = scene.room.source_positions[0];
  scene.source_azimuths_deg[1] = scene.source_azimuths_deg[0];
  scene.mixing_snrs_db = {0.0, 0.0};

  const auto sample = generate_mixture({dry, dry}, scene, geometry, 8000, 3, 2048);
  for (std::size_t m = 0; m < sample.mixture.num_channels(); ++m)
    for (std::size_t i = 0; i < sample.mixture.length(); ++i)
      CHECK(sample.mixture.samples[m][i] ==
            doctest::Approx(2.0 * sample.source_images[0].samples[m][i])
                .epsilon(1e-9));
}

TEST_CASE("silent dry source raises an energy error") {
  const auto geometry = ArrayGeometry::circular();
  DrySourcePool pool(2, 8000);
  SceneConstraints cons;
  cons.num_speakers = 2;
  const auto scene = sample_scene(8, cons, geometry);
  const std::vector<std::vector<double>> dry{pool.utterance(0, 1, 0.5),
                                             std::vector<double>(4000, 0.0)};
  CHECK_THROWS_AS(generate_mixture(dry, scene, geometry, 8000, 1, 2048),
                  DataError);
}

TEST_CASE("source outside the room is a geometry error") {
  RoomSpec room = basic_room();
  room.source_positions[0] = {100.0, 1.0, 1.0};
  ArrayGeometry mono;
  mono.mic_positions = {{0.0, 0.0, 0.0}};
  CHECK_THROWS_AS(image_method_rir(room, 0, mono, 1024, 8000), UsageError);
}

TEST_CASE("too-short RIR buffer is a length error") {
  const RoomSpec room = basic_room();
  ArrayGeometry mono;
  mono.mic_positions = {{0.0, 0.0, 0.0}};
  CHECK_THROWS_AS(image_method_rir(room, 0, mono, 16, 8000), DataError);
}

TEST_CASE("synthetic pool utterances are deterministic and distinct") {
  DrySourcePool pool(4, 8000);
  const auto a = pool.utterance(1, 33, 1.0);
  const auto b = pool.utterance(1, 33, 1.0);
  const auto c = pool.utterance(2, 33, 1.0);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.size() == 8000);
}
