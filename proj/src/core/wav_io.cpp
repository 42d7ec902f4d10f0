// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace mbss::dsp {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

template <typename T>
T read_le(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError(std::string("wav: truncated while reading ") + what);
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

struct FourCC {
  char c[4];
  bool is(const char* s) const { return std::memcmp(c, s, 4) == 0; }
};

FourCC read_fourcc(std::istream& in, const char* what) {
  FourCC f{};
  in.read(f.c, 4);
  if (!in) throw DataError(std::string("wav: truncated while reading ") + what);
  return f;
}

}  // namespace

MultichannelWave read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  MBSS_CHECK(in.good(), DataError, "wav: cannot open " + path);

  if (!read_fourcc(in, "RIFF id").is("RIFF"))
    throw DataError("wav: not a RIFF file: " + path);
  read_le<std::uint32_t>(in, "RIFF size");
  if (!read_fourcc(in, "WAVE id").is("WAVE"))
    throw DataError("wav: not a WAVE file: " + path);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::vector<char> data;

  while (in.peek() != EOF) {
    const FourCC id = read_fourcc(in, "chunk id");
    const auto size = read_le<std::uint32_t>(in, "chunk size");
    if (id.is("fmt ")) {
      MBSS_CHECK(size >= 16, DataError, "wav: fmt chunk too small");
      format = read_le<std::uint16_t>(in, "format tag");
      channels = read_le<std::uint16_t>(in, "channel count");
      rate = read_le<std::uint32_t>(in, "sample rate");
      read_le<std::uint32_t>(in, "byte rate");
      read_le<std::uint16_t>(in, "block align");
      bits = read_le<std::uint16_t>(in, "bits per sample");
      in.seekg(size - 16 + (size & 1), std::ios::cur);
      have_fmt = true;
    } else if (id.is("data")) {
      data.resize(size);
      in.read(data.data(), size);
      if (!in) throw DataError("wav: truncated data chunk in " + path);
      if (size & 1) in.seekg(1, std::ios::cur);
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
      if (!in) throw DataError("wav: truncated chunk in " + path);
    }
  }

  MBSS_CHECK(have_fmt, DataError, "wav: missing fmt chunk in " + path);
  MBSS_CHECK(!data.empty(), DataError, "wav: missing data chunk in " + path);
  MBSS_CHECK(channels >= 1, DataError, "wav: zero channels in " + path);
  MBSS_CHECK(rate > 0, DataError, "wav: zero sample rate in " + path);

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  MBSS_CHECK(pcm16 || f32, DataError,
             "wav: unsupported codec (only PCM16 and float32): " + path);

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * channels;
  const std::size_t num_frames = data.size() / frame_bytes;

  MultichannelWave wave(channels, num_frames, static_cast<int>(rate));
  const char* p = data.data();
  for (std::size_t i = 0; i < num_frames; ++i) {
    for (std::size_t ch = 0; ch < channels; ++ch) {
      if (pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        wave.samples[ch][i] = v / 32768.0;
        p += 2;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        wave.samples[ch][i] = v;
        p += 4;
      }
    }
  }
  return wave;
}

void write_wav(const std::string& path, const MultichannelWave& wave,
               WavCodec codec) {
  wave.validate();
  const std::size_t channels = wave.num_channels();
  const std::size_t frames = wave.length();
  const std::uint16_t bits = codec == WavCodec::pcm16 ? 16 : 32;
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(frames * channels * (bits / 8));
  const bool f32 = codec == WavCodec::float32;
  // float32 files carry a fact chunk (frame count) per the WAVE spec.
  const std::uint32_t riff_size = 4 + 24 + (f32 ? 12 : 0) + 8 + data_bytes;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  MBSS_CHECK(out.good(), DataError, "wav: cannot write " + path);

  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, riff_size);
  out.write("WAVE", 4);

  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, f32 ? kFormatFloat : kFormatPcm);
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(wave.sample_rate));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(
                                   wave.sample_rate * channels * (bits / 8)));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  write_le<std::uint16_t>(out, bits);

  if (f32) {
    out.write("fact", 4);
    write_le<std::uint32_t>(out, 4);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(frames));
  }

  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const double v = wave.samples[ch][i];
      if (f32) {
        write_le<float>(out, static_cast<float>(v));
      } else {
        const double scaled = std::round(v * 32768.0);
        const auto q = static_cast<std::int16_t>(
            std::clamp(scaled, -32768.0, 32767.0));
        write_le<std::int16_t>(out, q);
      }
    }
  }
  MBSS_CHECK(out.good(), DataError, "wav: write failed for " + path);
}

}  // namespace mbss::dsp
