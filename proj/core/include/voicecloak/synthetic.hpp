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

#ifndef VOICECLOAK_SYNTHETIC_HPP_
#define VOICECLOAK_SYNTHETIC_HPP_

#include <array>
#include <cstdint>
#include <string>

#include "voicecloak/audio_io.hpp"
#include "voicecloak/encoder.hpp"
#include "voicecloak/metrics.hpp"

namespace voicecloak::synthetic {

// Voice-like source-filter parameters. A speaker is a glottal pulse train
// at `f0` mixed with breath noise, shaped by three resonances.
struct SpeakerProfile {
  double f0 = 120.0;
  std::array<double, 3> formants{500.0, 1500.0, 2500.0};
  std::array<double, 3> bandwidths{80.0, 120.0, 160.0};
  double breathiness = 0.2;  // noise share of the source
  double level = 0.08;       // target RMS
};

SpeakerProfile make_speaker(std::uint64_t seed);

// Stationary white background noise at this SNR, standing in for the
// noise floor of a real recording.
inline constexpr double kDefaultNoiseFloorSnrDb = 35.0;

// One utterance of `seconds` at 16 kHz. The seed controls per-utterance
// variation (small pitch/formant drift, syllable envelope, noise draws).
audio::Waveform synthesize_utterance(const SpeakerProfile& speaker, double seconds,
                                     std::uint64_t seed,
                                     double noise_floor_snr_db = kDefaultNoiseFloorSnrDb);

// Speaker seeds at or above this value are reserved for the calibration
// corpus of calibrated_random_encoder.
inline constexpr std::uint64_t kCalibrationSeedBase = 0xCA1B0000ULL;

struct CalibrationCorpus {
  std::size_t speakers = 20;
  std::size_t utterances_per_speaker = 2;
  double seconds = 2.0;
};

// init_random(cfg, seed) followed by center_embeddings over a synthetic
// corpus whose speakers are drawn from kCalibrationSeedBase + i.
encoder::WeightStore calibrated_random_encoder(const encoder::EncoderConfig& cfg, std::uint64_t seed,
                                               const CalibrationCorpus& corpus = {});

// Utterance `utterance` of speaker `speaker` in the corpus identified by
// `corpus_seed`. Speaker s of corpus c is make_speaker(c * 1000 + s).
audio::Waveform corpus_utterance(std::uint64_t corpus_seed, std::size_t speaker, std::size_t utterance,
                                 double seconds);

// "spk03-utt01". The speaker part is what metrics::speaker_of returns.
std::string utterance_key(std::size_t speaker, std::size_t utterance);

// Utterance 0 of every speaker enrolls; every other utterance is tested
// once against its own speaker and once against a seeded impostor
// enrollment, so targets and nontargets are balanced.
metrics::TrialList balanced_trials(std::size_t speakers, std::size_t utterances, std::uint64_t seed);

}  // namespace voicecloak::synthetic

#endif  // VOICECLOAK_SYNTHETIC_HPP_
