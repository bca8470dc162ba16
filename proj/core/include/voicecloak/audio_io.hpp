// Copyright (c) 2026 The VoiceCloak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VOICECLOAK_AUDIO_IO_HPP_
#define VOICECLOAK_AUDIO_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <vector>

namespace voicecloak::audio {

inline constexpr int kCanonicalSampleRate = 16000;

// Mono time-domain signal.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kCanonicalSampleRate;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Reads a mono RIFF/WAVE file. PCM 16-bit samples are scaled by 1/32768,
// IEEE float 32-bit samples are taken as-is. Anything else (other bit
// depths, multiple channels, compressed formats) raises FormatError naming
// the offending header field.
Waveform read_wav(const std::filesystem::path& path);

// Writes 16-bit PCM mono. Samples are clamped to [-1, 1 - 1/32768] and
// rounded to the nearest integer step.
void write_wav(const std::filesystem::path& path, const Waveform& w);

// In-memory form of write_wav/read_wav: returns samples exactly as they
// would read back from a 16-bit file.
std::vector<double> quantize_pcm16(const std::vector<double>& samples);

// Linear interpolation between neighbouring input samples.
Waveform resample_linear(const Waveform& w, int target_rate);

// Adds zero-mean white Gaussian noise rescaled so that the realized SNR
// equals `target_snr_db` exactly.
Waveform add_gaussian_noise(const Waveform& w, double target_snr_db,
                            std::uint64_t seed);

inline constexpr double kDefaultNoiseSnrDb = 32.0;

}  // namespace voicecloak::audio

#endif  // VOICECLOAK_AUDIO_IO_HPP_
