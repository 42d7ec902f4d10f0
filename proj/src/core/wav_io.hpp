// Copyright 2026 mbss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef MBSS_CORE_WAV_IO_HPP
#define MBSS_CORE_WAV_IO_HPP

#include <string>

#include "wave.hpp"

namespace mbss::dsp {

enum class WavCodec { pcm16, float32 };

// RIFF/WAVE reader for PCM16 and IEEE float32, any channel count. Unknown
// chunks are skipped; malformed or truncated files raise DataError.
MultichannelWave read_wav(const std::string& path);

void write_wav(const std::string& path, const MultichannelWave& wave,
               WavCodec codec = WavCodec::float32);

}  // namespace mbss::dsp

#endif  // MBSS_CORE_WAV_IO_HPP
