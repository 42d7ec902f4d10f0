// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "common.hpp"
#include "stft.hpp"
#include "wav_io.hpp"

using namespace mbss;
using namespace mbss::dsp;

namespace {

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (double& v : x) v = rng.normal() * 0.3;
  return x;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("stft frame count and bin count") {
  StftConfig cfg{256, 64, Window::hann};
  auto spec = stft(white_noise(8000, 1), cfg, 8000);
  CHECK(spec.num_frames() == 122);
  CHECK(spec.num_bins() == 129);
}

TEST_CASE("stft rejects input shorter than one frame") {
  StftConfig cfg{256, 64, Window::hann};
  CHECK_THROWS_AS(stft(std::vector<double>(200, 0.1), cfg, 8000), DataError);
}

TEST_CASE("constant input concentrates energy in bin 0 (rect window)") {
  StftConfig cfg{256, 64, Window::rect};
  auto spec = stft(std::vector<double>(1024, 0.7), cfg, 8000);
  for (std::size_t t = 0; t < spec.num_frames(); ++t) {
    CHECK(std::abs(spec.bins(t, 0)) == doctest::Approx(0.7 * 256).epsilon(1e-12));
    for (std::size_t f = 1; f < spec.num_bins(); ++f)
      CHECK(std::abs(spec.bins(t, f)) < 1e-9);
  }
}

TEST_CASE("Parseval holds per frame") {
  StftConfig cfg{256, 64, Window::hann};
  const auto x = white_noise(2048, 7);
  const auto spec = stft(x, cfg, 8000);
  const auto win = cfg.window_samples();
  for (std::size_t t = 0; t < spec.num_frames(); ++t) {
    double time_energy = 0.0;
    for (std::size_t n = 0; n < cfg.frame_len; ++n) {
      const double v = x[t * cfg.hop + n] * win[n];
      time_energy += v * v;
    }
    double freq_energy = std::norm(spec.bins(t, 0)) +
                         std::norm(spec.bins(t, spec.num_bins() - 1));
    for (std::size_t f = 1; f + 1 < spec.num_bins(); ++f)
      freq_energy += 2.0 * std::norm(spec.bins(t, f));
    freq_energy /= cfg.frame_len;
    CHECK(std::abs(freq_energy - time_energy) <= 1e-9 * time_energy);
  }
}

TEST_CASE("istft reconstructs the interior of the signal") {
  StftConfig cfg{256, 64, Window::hann};
  const auto x = white_noise(4000, 3);
  const auto y = istft(stft(x, cfg, 8000));
  const std::size_t edge = cfg.frame_len - cfg.hop;
  double err = 0.0, ref = 0.0;
  for (std::size_t i = edge; i < y.size() - edge; ++i) {
    err += (y[i] - x[i]) * (y[i] - x[i]);
    ref += x[i] * x[i];
  }
  CHECK(std::sqrt(err / ref) <= 1e-6);
}

TEST_CASE("istft of an all-zero spectrogram is silence") {
  StftConfig cfg{256, 64, Window::hann};
  auto spec = stft(white_noise(2000, 5), cfg, 8000);
  spec.bins.setZero();
  for (double v : istft(spec)) CHECK(v == 0.0);
}

TEST_CASE("unit mask keeps the round trip exact") {
  StftConfig cfg{256, 64, Window::hann};
  const auto x = white_noise(3000, 11);
  auto spec = stft(x, cfg, 8000);
  spec.bins *= std::complex<double>(1.0, 0.0);
  const auto y = istft(spec);
  const std::size_t edge = cfg.frame_len - cfg.hop;
  for (std::size_t i = edge; i < y.size() - edge; ++i)
    CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-9));
}

TEST_CASE("non-overlapping hann config is rejected") {
  StftConfig cfg{256, 256, Window::hann};
  CHECK_THROWS_AS(cfg.validate(), UsageError);
  StftConfig bad_hop{256, 96, Window::hann};  // 96 does not divide 256
  CHECK_THROWS_AS(bad_hop.validate(), UsageError);
}

TEST_CASE("log magnitude values") {
  StftConfig cfg{256, 64, Window::rect};
  ComplexSpectrogram spec;
  spec.frame_len = 256;
  spec.hop = 64;
  spec.window = Window::rect;
  spec.sample_rate = 8000;
  spec.bins.resize(1, 129);
  spec.bins.setZero();
  spec.bins(0, 0) = {1.0, 0.0};
  spec.bins(0, 1) = {std::exp(1.0), 0.0};
  spec.bins(0, 2) = {0.0, std::exp(2.0)};

  const auto lm = log_magnitude(spec, 1e-8);
  CHECK(lm(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(lm(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lm(0, 2) == doctest::Approx(2.0).epsilon(1e-12));
  // Zero magnitude hits the floor.
  CHECK(lm(0, 3) == doctest::Approx(std::log(1e-8)).epsilon(1e-12));
  CHECK(lm(0, 3) == doctest::Approx(-18.4207).epsilon(1e-4));
  for (Eigen::Index i = 0; i < lm.size(); ++i) {
    CHECK(std::isfinite(lm.data()[i]));
    CHECK(lm.data()[i] >= std::log(1e-8) - 1e-12);
  }
}

TEST_CASE("log magnitude is monotone in |bin|") {
  Rng rng(23);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(0.0, 2.0), b = rng.uniform(0.0, 2.0);
    ComplexSpectrogram s;
    s.frame_len = 4;
    s.hop = 2;
    s.sample_rate = 8000;
    s.bins.resize(1, 3);
    s.bins.setZero();
    s.bins(0, 0) = {a, 0.0};
    s.bins(0, 1) = {b, 0.0};
    const auto lm = log_magnitude(s, 1e-8);
    if (a <= b)
      CHECK(lm(0, 0) <= lm(0, 1) + 1e-15);
    else
      CHECK(lm(0, 0) >= lm(0, 1) - 1e-15);
  }
}

TEST_CASE("float32 wav round trip is bit exact for 7 channels") {
  MultichannelWave wave(7, 500, 8000);
  Rng rng(42);
  for (auto& ch : wave.samples)
    for (double& v : ch) v = rng.uniform(-0.9, 0.9);
  // float32 storage: compare against the float-rounded original
  for (auto& ch : wave.samples)
    for (double& v : ch) v = static_cast<float>(v);

  const auto path = temp_file("mbss_test_f32.wav");
  write_wav(path.string(), wave, WavCodec::float32);
  const auto back = read_wav(path.string());
  REQUIRE(back.num_channels() == 7);
  REQUIRE(back.length() == 500);
  CHECK(back.sample_rate == 8000);
  for (std::size_t ch = 0; ch < 7; ++ch)
    for (std::size_t i = 0; i < 500; ++i)
      CHECK(back.samples[ch][i] == wave.samples[ch][i]);
  std::filesystem::remove(path);
}

TEST_CASE("pcm16 full-scale sine is within one quantization step") {
  MultichannelWave wave(1, 800, 8000);
  for (std::size_t i = 0; i < 800; ++i)
    wave.samples[0][i] = 0.999 * std::sin(2.0 * kPi * 440.0 * i / 8000.0);

  const auto path = temp_file("mbss_test_pcm16.wav");
  write_wav(path.string(), wave, WavCodec::pcm16);
  const auto back = read_wav(path.string());
  for (std::size_t i = 0; i < 800; ++i)
    CHECK(std::fabs(back.samples[0][i] - wave.samples[0][i]) <= 1.0 / 32768.0);
  std::filesystem::remove(path);
}

TEST_CASE("truncated wav file raises a format error") {
  MultichannelWave wave(2, 300, 8000);
  const auto path = temp_file("mbss_test_trunc.wav");
  write_wav(path.string(), wave, WavCodec::float32);

  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size / 2);
  CHECK_THROWS_AS(read_wav(path.string()), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("malformed header raises a format error") {
  const auto path = temp_file("mbss_test_bad.wav");
  std::ofstream(path) << "definitely not riff data, padded to some length";
  CHECK_THROWS_AS(read_wav(path.string()), DataError);
  std::filesystem::remove(path);
}
