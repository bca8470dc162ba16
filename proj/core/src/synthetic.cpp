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

#include "voicecloak/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <vector>

#include "voicecloak/error.hpp"
#include "voicecloak/spectral.hpp"

namespace voicecloak::synthetic {

SpeakerProfile make_speaker(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  SpeakerProfile p;
  p.f0 = uniform(85.0, 260.0);
  p.formants = {uniform(300.0, 900.0), uniform(1000.0, 2300.0), uniform(2400.0, 3800.0)};
  p.bandwidths = {uniform(50.0, 140.0), uniform(70.0, 200.0), uniform(100.0, 300.0)};
  p.breathiness = uniform(0.05, 0.5);
  p.level = uniform(0.04, 0.12);
  return p;
}

audio::Waveform synthesize_utterance(const SpeakerProfile& speaker, double seconds, std::uint64_t seed,
                                     double noise_floor_snr_db) {
  if (!(seconds > 0.0)) throw InvalidArgument("synthesize_utterance: duration must be positive");
  constexpr double kRate = audio::kCanonicalSampleRate;
  const auto n = static_cast<std::size_t>(std::lround(seconds * kRate));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const double f0 = speaker.f0 * uniform(0.95, 1.05);
  const double vibrato_rate = uniform(3.0, 6.0);
  const double syllable_rate = uniform(3.0, 5.0);
  const double syllable_phase = uniform(0.0, 2.0 * std::numbers::pi);
  std::array<double, 3> formants{};
  for (std::size_t i = 0; i < 3; ++i) formants[i] = speaker.formants[i] * uniform(0.97, 1.03);

  // Source: band-limited-ish pulse train (sum of harmonics with 1/k
  // rolloff) plus breath noise, under a syllabic envelope.
  std::vector<double> source(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kRate;
    const double inst_f0 = f0 * (1.0 + 0.02 * std::sin(2.0 * std::numbers::pi * vibrato_rate * t));
    phase += 2.0 * std::numbers::pi * inst_f0 / kRate;
    double voiced = 0.0;
    for (int k = 1; k * inst_f0 < 0.45 * kRate && k <= 40; ++k) voiced += std::sin(k * phase) / k;
    const double envelope = 0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * syllable_rate * t + syllable_phase);
    source[i] = envelope * ((1.0 - speaker.breathiness) * voiced + speaker.breathiness * normal(rng));
  }

  // Parallel two-pole resonators.
  std::vector<double> out(n, 0.0);
  for (std::size_t r = 0; r < 3; ++r) {
    const double radius = std::exp(-std::numbers::pi * speaker.bandwidths[r] / kRate);
    const double theta = 2.0 * std::numbers::pi * formants[r] / kRate;
    const double a1 = 2.0 * radius * std::cos(theta);
    const double a2 = -radius * radius;
    const double gain = (1.0 - radius) / (1.0 + r);
    double y1 = 0.0, y2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double y = gain * source[i] + a1 * y1 + a2 * y2;
      out[i] += y;
      y2 = y1;
      y1 = y;
    }
  }

  double energy = 0.0;
  for (double v : out) energy += v * v;
  const double rms = std::sqrt(energy / static_cast<double>(n));
  const double scale = rms > 0.0 ? speaker.level / rms : 0.0;
  audio::Waveform w;
  w.sample_rate = audio::kCanonicalSampleRate;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = out[i] * scale;
  if (std::isfinite(noise_floor_snr_db)) {
    w = audio::add_gaussian_noise(w, noise_floor_snr_db, seed ^ 0x9E3779B97F4A7C15ULL);
  }
  for (double& v : w.samples) v = std::clamp(v, -1.0, 1.0);
  return w;
}

encoder::WeightStore calibrated_random_encoder(const encoder::EncoderConfig& cfg, std::uint64_t seed,
                                               const CalibrationCorpus& corpus) {
  const auto raw = encoder::init_random(cfg, seed);
  const Matrix mel = spectral::mel_matrix(spectral::StftConfig{}.fft_size, cfg.n_mels, audio::kCanonicalSampleRate);
  std::vector<spectral::MelFeatures> feats;
  for (std::size_t s = 0; s < corpus.speakers; ++s) {
    const auto speaker = make_speaker(kCalibrationSeedBase + s);
    for (std::size_t u = 0; u < corpus.utterances_per_speaker; ++u) {
      const auto w = synthesize_utterance(speaker, corpus.seconds, kCalibrationSeedBase + 1000 * s + u);
      feats.push_back(spectral::log_mel(spectral::stft(w).magnitude, mel));
    }
  }
  return encoder::center_embeddings(raw, feats);
}

audio::Waveform corpus_utterance(std::uint64_t corpus_seed, std::size_t speaker, std::size_t utterance,
                                 double seconds) {
  const std::uint64_t speaker_seed = corpus_seed * 1000 + speaker;
  return synthesize_utterance(make_speaker(speaker_seed), seconds, speaker_seed * 1000 + utterance + 1);
}

std::string utterance_key(std::size_t speaker, std::size_t utterance) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "spk%02zu-utt%02zu", speaker, utterance);
  return buf;
}

metrics::TrialList balanced_trials(std::size_t speakers, std::size_t utterances, std::uint64_t seed) {
  if (speakers < 2 || utterances < 2) {
    throw InvalidArgument("balanced_trials: need at least 2 speakers and 2 utterances per speaker");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> other(1, speakers - 1);
  metrics::TrialList tl;
  for (std::size_t s = 0; s < speakers; ++s) {
    for (std::size_t u = 1; u < utterances; ++u) {
      const std::string test = utterance_key(s, u);
      tl.trials.push_back({utterance_key(s, 0), test, true});
      const std::size_t impostor = (s + other(rng)) % speakers;
      tl.trials.push_back({utterance_key(impostor, 0), test, false});
    }
  }
  return tl;
}

}  // namespace voicecloak::synthetic
