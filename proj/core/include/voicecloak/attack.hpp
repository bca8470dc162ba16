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

#ifndef VOICECLOAK_ATTACK_HPP_
#define VOICECLOAK_ATTACK_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "voicecloak/audio_io.hpp"
#include "voicecloak/encoder.hpp"
#include "voicecloak/matrix.hpp"
#include "voicecloak/spectral.hpp"

namespace voicecloak::attack {

// How a sign step leaves a stationary point of the cosine loss (see
// ascent_direction).
struct StationaryEscape {
  int power_iterations = 10;
  std::uint64_t seed = 0;
};

// L-infinity sign-gradient attack parameters. Defaults: epsilon 0.02,
// 50 iterations of step 0.0004 (so iterations * alpha == epsilon).
struct AttackConfig {
  double epsilon = 0.02;
  double alpha = 0.0004;
  int iterations = 50;
  bool clamp_nonnegative = true;
  StationaryEscape escape;

  void validate() const;
};

struct AttackResult {
  Matrix adv_magnitude;
  // Loss at x~_0 .. x~_I.
  std::vector<double> loss_trajectory;
  // Loss at the final adversarial magnitude (magnitude domain).
  double delta_cosd_final = -1.0;
};

// -1, 0 or +1 per entry.
Matrix sign_matrix(const Matrix& g);

// Projects x_tilde onto [x - epsilon, x + epsilon], then onto [0, inf)
// when clamp_nonnegative is set.
Matrix clip_linf(const Matrix& x_tilde, const Matrix& x, double epsilon,
                 bool clamp_nonnegative = true);

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;  // dL / d magnitude
};

// What the attack pushes away from: the mel filterbank, the encoder and
// the reference embedding extracted once from the clean magnitude.
struct AttackTarget {
  const Matrix& mel;
  const encoder::WeightStore& weights;
  encoder::Embedding reference;
};

// Embedding of a magnitude spectrogram: forward(log_mel(magnitude)).
encoder::Embedding embed_magnitude(const Matrix& magnitude, const Matrix& mel,
                                   const encoder::WeightStore& ws);

// Cosine loss between the reference and the embedding of x_tilde, and its
// exact gradient with respect to x_tilde.
LossAndGrad loss_and_grad(const Matrix& x_tilde, const AttackTarget& target);

// Direction followed by the sign steps. Equals loss_and_grad except at a
// stationary point of the cosine loss, i.e. when the embedding is parallel
// to the reference. That always holds at x~_0 = x, where the exact
// gradient is zero and the Hessian is J^T P J / |e|^2 (J the Jacobian of
// the embedding, P the projector orthogonal to e). There the returned
// direction is J^T u for the leading eigenvector u of P J J^T P, found by
// power iteration from a seeded probe; its sign pattern is the steepest
// second-order ascent direction. With zero power iterations the seeded
// probe itself is used.
struct AscentDirection {
  double loss = 0.0;
  Matrix grad;
  bool stationary = false;
};

AscentDirection ascent_direction(const Matrix& x_tilde, const AttackTarget& target,
                                 const StationaryEscape& escape = {});

// Single step: x + epsilon * sign(ascent direction at x).
AttackResult fgsm(const Matrix& x, const AttackTarget& target, double epsilon,
                  bool clamp_nonnegative = true, const StationaryEscape& escape = {});

// cfg.iterations projected sign steps of size cfg.alpha starting at x.
AttackResult ifgsm(const Matrix& x, const AttackTarget& target, const AttackConfig& cfg);

enum class Method { kFgsm, kIfgsm, kGaussian };

std::string to_string(Method m);
Method parse_method(const std::string& s);

struct ProtectOptions {
  AttackConfig attack;
  double target_snr_db = audio::kDefaultNoiseSnrDb;
  std::uint64_t seed = 0;
  spectral::StftConfig stft;
  // Round the output to the PCM16 grid before SNR and delta_cosd are measured.
  bool quantize_output = false;
};

struct ProtectionReport {
  Method method = Method::kIfgsm;
  double snr_db = 0.0;
  // Recomputed from the resynthesized waveform.
  double delta_cosd = -1.0;
  // Loss at the adversarial magnitude before resynthesis (attacks only).
  std::optional<double> magnitude_delta_cosd;
  std::vector<double> loss_trajectory;
  AttackConfig attack;
  double target_snr_db = audio::kDefaultNoiseSnrDb;

  std::string to_json() const;
};

struct Protected {
  audio::Waveform waveform;
  ProtectionReport report;
  std::optional<AttackResult> attack;
};

// STFT -> attack on the magnitude -> iSTFT with the original phase. The
// gaussian method adds time-domain noise instead. Input must be 16 kHz.
Protected protect_utterance(const audio::Waveform& w, const encoder::WeightStore& ws,
                            Method method, const ProtectOptions& options);

}  // namespace voicecloak::attack

#endif  // VOICECLOAK_ATTACK_HPP_
