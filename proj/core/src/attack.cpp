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

#include "voicecloak/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"
#include "voicecloak/error.hpp"
#include "voicecloak/metrics.hpp"

namespace voicecloak::attack {

void AttackConfig::validate() const {
  if (!std::isfinite(epsilon) || epsilon < 0.0) throw InvalidArgument("AttackConfig: epsilon must be >= 0");
  if (iterations < 0) throw InvalidArgument("AttackConfig: iterations must be >= 0");
  if (!std::isfinite(alpha) || alpha < 0.0) throw InvalidArgument("AttackConfig: alpha must be >= 0");
  if (iterations > 1 && !(alpha > 0.0)) throw InvalidArgument("AttackConfig: alpha must be > 0");
  if (escape.power_iterations < 0) throw InvalidArgument("AttackConfig: escape power iterations must be >= 0");
  if (alpha > epsilon) {
    throw InvalidArgument("AttackConfig: alpha (" + std::to_string(alpha) + ") exceeds epsilon (" +
                          std::to_string(epsilon) + ")");
  }
}

Matrix sign_matrix(const Matrix& g) {
  Matrix s(g.rows(), g.cols());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double v = g.data()[i];
    s.data()[i] = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  }
  return s;
}

Matrix clip_linf(const Matrix& x_tilde, const Matrix& x, double epsilon, bool clamp_nonnegative) {
  require_same_shape(x_tilde, x, "clip_linf");
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    double v = std::min(std::max(x_tilde.data()[i], orig - epsilon), orig + epsilon);
    if (clamp_nonnegative) v = std::max(v, 0.0);
    out.data()[i] = v;
  }
  return out;
}

encoder::Embedding embed_magnitude(const Matrix& magnitude, const Matrix& mel, const encoder::WeightStore& ws) {
  return encoder::forward(spectral::log_mel(magnitude, mel), ws).embedding;
}

LossAndGrad loss_and_grad(const Matrix& x_tilde, const AttackTarget& target) {
  const auto feat = spectral::log_mel(x_tilde, target.mel);
  const auto fwd = encoder::forward(feat, target.weights);
  LossAndGrad out;
  out.loss = encoder::cosine_loss(target.reference, fwd.embedding);
  const auto grad_embedding = encoder::cosine_loss_grad(target.reference, fwd.embedding);
  const Matrix grad_feat = encoder::backward(fwd.cache, grad_embedding);
  out.grad = spectral::log_mel_backward(grad_feat, x_tilde, target.mel);
  return out;
}

namespace {

// sin of the angle between e and e~ below which the pair counts as
// parallel.
constexpr double kStationarySine = 1e-8;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Unit vector orthogonal to `reference`; `v` is modified in place. Returns
// false when nothing is left after projection.
bool project_orthogonal(std::vector<double>& v, const encoder::Embedding& reference) {
  const double proj = dot(v, reference.values) / dot(reference.values, reference.values);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= proj * reference.values[i];
  const double norm = std::sqrt(dot(v, v));
  if (!(norm > 0.0)) return false;
  for (double& x : v) x /= norm;
  return true;
}

Matrix pullback(const encoder::ForwardCache& cache, const std::vector<double>& u, const Matrix& x_tilde,
                const Matrix& mel) {
  return spectral::log_mel_backward(encoder::backward(cache, u), x_tilde, mel);
}

double loss_at(const Matrix& x_tilde, const AttackTarget& target) {
  return encoder::cosine_loss(target.reference, embed_magnitude(x_tilde, target.mel, target.weights));
}

}  // namespace

AscentDirection ascent_direction(const Matrix& x_tilde, const AttackTarget& target,
                                 const StationaryEscape& escape) {
  const auto feat = spectral::log_mel(x_tilde, target.mel);
  const auto fwd = encoder::forward(feat, target.weights);
  AscentDirection out;
  out.loss = encoder::cosine_loss(target.reference, fwd.embedding);
  auto grad_embedding = encoder::cosine_loss_grad(target.reference, fwd.embedding);

  // |dL/de~| = sin(angle) / |e~|.
  const double sine = std::sqrt(dot(grad_embedding, grad_embedding) * dot(fwd.embedding.values, fwd.embedding.values));
  if (sine >= kStationarySine) {
    out.grad = pullback(fwd.cache, grad_embedding, x_tilde, target.mel);
    return out;
  }

  out.stationary = true;
  std::mt19937_64 rng(escape.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> u(target.reference.dim());
  for (double& v : u) v = normal(rng);
  project_orthogonal(u, target.reference);
  for (int k = 0; k < escape.power_iterations; ++k) {
    const Matrix v = pullback(fwd.cache, u, x_tilde, target.mel);
    auto next = encoder::jvp(fwd.cache, spectral::log_mel_jvp(x_tilde, target.mel, v));
    if (!project_orthogonal(next, target.reference)) break;
    u = std::move(next);
  }
  out.grad = pullback(fwd.cache, u, x_tilde, target.mel);
  return out;
}

AttackResult fgsm(const Matrix& x, const AttackTarget& target, double epsilon, bool clamp_nonnegative,
                  const StationaryEscape& escape) {
  if (!std::isfinite(epsilon) || epsilon < 0.0) throw InvalidArgument("fgsm: epsilon must be >= 0");
  const auto lg = ascent_direction(x, target, escape);
  const Matrix s = sign_matrix(lg.grad);

  AttackResult r;
  r.adv_magnitude = Matrix(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = x.data()[i] + epsilon * s.data()[i];
    if (clamp_nonnegative) v = std::max(v, 0.0);
    r.adv_magnitude.data()[i] = v;
  }
  r.loss_trajectory = {lg.loss, loss_at(r.adv_magnitude, target)};
  r.delta_cosd_final = r.loss_trajectory.back();
  return r;
}

AttackResult ifgsm(const Matrix& x, const AttackTarget& target, const AttackConfig& cfg) {
  cfg.validate();
  AttackResult r;
  r.adv_magnitude = x;
  for (int i = 0; i < cfg.iterations; ++i) {
    const auto lg = ascent_direction(r.adv_magnitude, target, cfg.escape);
    r.loss_trajectory.push_back(lg.loss);
    const Matrix s = sign_matrix(lg.grad);
    Matrix stepped(x.rows(), x.cols());
    for (std::size_t k = 0; k < x.size(); ++k) {
      stepped.data()[k] = r.adv_magnitude.data()[k] + cfg.alpha * s.data()[k];
    }
    r.adv_magnitude = clip_linf(stepped, x, cfg.epsilon, cfg.clamp_nonnegative);
  }
  r.loss_trajectory.push_back(loss_at(r.adv_magnitude, target));
  r.delta_cosd_final = r.loss_trajectory.back();
  return r;
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kFgsm:
      return "fgsm";
    case Method::kIfgsm:
      return "ifgsm";
    case Method::kGaussian:
      return "gaussian";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  if (s == "fgsm") return Method::kFgsm;
  if (s == "ifgsm") return Method::kIfgsm;
  if (s == "gaussian") return Method::kGaussian;
  throw InvalidArgument("unknown method '" + s + "' (expected fgsm, ifgsm or gaussian)");
}

std::string ProtectionReport::to_json() const {
  nlohmann::json j;
  j["method"] = attack::to_string(method);
  if (std::isfinite(snr_db)) {
    j["snr_db"] = snr_db;
  } else {
    j["snr_db"] = "inf";
  }
  j["delta_cosd"] = delta_cosd;
  j["magnitude_delta_cosd"] = magnitude_delta_cosd ? nlohmann::json(*magnitude_delta_cosd) : nlohmann::json();
  j["loss_trajectory"] = loss_trajectory;
  if (method == Method::kGaussian) {
    j["target_snr_db"] = target_snr_db;
  } else {
    j["epsilon"] = attack.epsilon;
    j["alpha"] = attack.alpha;
    j["iterations"] = attack.iterations;
    j["clamp_nonnegative"] = attack.clamp_nonnegative;
  }
  return j.dump(2);
}

Protected protect_utterance(const audio::Waveform& w, const encoder::WeightStore& ws, Method method,
                            const ProtectOptions& options) {
  if (w.sample_rate != audio::kCanonicalSampleRate) {
    throw InvalidArgument("protect_utterance: input must be resampled to 16000 Hz first (got " +
                          std::to_string(w.sample_rate) + ")");
  }
  if (method != Method::kGaussian) options.attack.validate();

  const auto spec = spectral::stft(w, options.stft);
  const Matrix mel = spectral::mel_matrix(options.stft.fft_size, ws.config().n_mels, audio::kCanonicalSampleRate);
  const AttackTarget target{mel, ws, embed_magnitude(spec.magnitude, mel, ws)};

  Protected out;
  out.report.method = method;
  out.report.attack = options.attack;
  out.report.target_snr_db = options.target_snr_db;
  switch (method) {
    case Method::kGaussian:
      out.waveform = audio::add_gaussian_noise(w, options.target_snr_db, options.seed);
      break;
    case Method::kFgsm:
      out.attack = fgsm(spec.magnitude, target, options.attack.epsilon, options.attack.clamp_nonnegative,
                        options.attack.escape);
      break;
    case Method::kIfgsm:
      out.attack = ifgsm(spec.magnitude, target, options.attack);
      break;
  }
  if (out.attack) {
    out.waveform = spectral::istft(out.attack->adv_magnitude, spec.phase, options.stft, w.samples.size());
    out.report.loss_trajectory = out.attack->loss_trajectory;
    out.report.magnitude_delta_cosd = out.attack->delta_cosd_final;
  }

  if (options.quantize_output) out.waveform.samples = audio::quantize_pcm16(out.waveform.samples);
  out.report.snr_db = metrics::snr_db(w, out.waveform);
  const auto reanalyzed = spectral::stft(out.waveform, options.stft);
  out.report.delta_cosd = metrics::delta_cosd(target.reference, embed_magnitude(reanalyzed.magnitude, mel, ws));
  return out;
}

}  // namespace voicecloak::attack
