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

#ifndef VOICECLOAK_ENCODER_HPP_
#define VOICECLOAK_ENCODER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "voicecloak/matrix.hpp"
#include "voicecloak/spectral.hpp"

namespace voicecloak::encoder {

// Layer layout of the speaker encoder. Each conv layer is 3x3, stride 1,
// zero "same" padding, followed by ReLU; layers listed in `pool_after`
// are followed by 2x2 average pooling (odd trailing rows/columns are
// dropped). The final feature map goes through temporal mean+std pooling
// and a linear map to `embed_dim`.
struct EncoderConfig {
  std::vector<std::size_t> conv_channels{8, 16, 16};
  std::vector<std::size_t> pool_after{0, 1};
  std::size_t embed_dim = 128;
  std::size_t n_mels = spectral::kDefaultMels;

  void validate() const;

  bool pools_after(std::size_t layer) const;
  // Smallest frame count that keeps one time step after all pooling.
  std::size_t min_frames() const;
  // Width of the statistics vector fed to the linear map (2 * C * F').
  std::size_t stats_dim() const;

  std::string to_json() const;
  static EncoderConfig from_json(const std::string& text);

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t numel() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline constexpr int kWeightFormatVersion = 1;

// Immutable-after-construction set of encoder parameters. Tensor names:
// conv<i>.weight [out, in, 3, 3], conv<i>.bias [out], embed.weight
// [embed_dim, stats_dim], embed.bias [embed_dim].
class WeightStore {
 public:
  WeightStore(EncoderConfig config, std::map<std::string, Tensor> tensors);

  const EncoderConfig& config() const { return config_; }
  const std::map<std::string, Tensor>& tensors() const { return tensors_; }
  const Tensor& get(const std::string& name) const;
  Tensor& mutable_get(const std::string& name);
  int format_version() const { return kWeightFormatVersion; }

  friend bool operator==(const WeightStore&, const WeightStore&) = default;

 private:
  EncoderConfig config_;
  std::map<std::string, Tensor> tensors_;
};

// Expected name -> shape table for a config, in file order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> parameter_layout(
    const EncoderConfig& cfg);

// He-scaled uniform kernels (bound sqrt(6 / fan_in)), zero biases.
WeightStore init_random(const EncoderConfig& cfg, std::uint64_t seed);

// File layout: 8-byte little-endian header length, UTF-8 JSON header
// (format, version, config, tensor manifest with byte offsets), then a
// contiguous blob of little-endian float64 values.
void save_weights(const WeightStore& ws, const std::filesystem::path& path);
WeightStore load_weights(const std::filesystem::path& path);

struct Embedding {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  friend bool operator==(const Embedding&, const Embedding&) = default;
};

// Feature map [channels x time x freq].
struct FeatureMap {
  std::size_t channels = 0;
  std::size_t time = 0;
  std::size_t freq = 0;
  std::vector<double> values;

  double& at(std::size_t c, std::size_t t, std::size_t f) {
    return values[(c * time + t) * freq + f];
  }
  double at(std::size_t c, std::size_t t, std::size_t f) const {
    return values[(c * time + t) * freq + f];
  }
};

// Everything backward needs from one forward pass. Single use.
struct ForwardCache {
  const WeightStore* weights = nullptr;
  std::size_t input_frames = 0;
  std::vector<FeatureMap> layer_inputs;      // input of each conv layer
  std::vector<FeatureMap> pre_activations;   // conv output before ReLU
  std::vector<double> final_features;        // [time x (C * F)] after last layer
  std::size_t final_time = 0;
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct ForwardResult {
  Embedding embedding;
  ForwardCache cache;
};

// Gradient accumulators with the same names and shapes as the weights.
using ParameterGradients = std::map<std::string, Tensor>;

ForwardResult forward(const spectral::MelFeatures& feat, const WeightStore& ws);

// Gradient of <grad_embedding, embedding> with respect to the input
// features, [frames x n_mels]. When `param_grads` is non-null the weight
// gradients are accumulated into it as well.
Matrix backward(const ForwardCache& cache, const std::vector<double>& grad_embedding,
                ParameterGradients* param_grads = nullptr);

// Forward-mode derivative of the embedding along `tangent` (shaped like
// the input features) at the point recorded in `cache`.
std::vector<double> jvp(const ForwardCache& cache, const Matrix& tangent);

// Returns a copy of `ws` whose embed.bias makes the mean embedding of
// `corpus` zero: bias = -W * mean(pooled statistics). Random encoders
// otherwise map every utterance into a narrow cone (ReLU statistics are
// all positive), which leaves cosine scores nearly constant.
WeightStore center_embeddings(const WeightStore& ws, const std::vector<spectral::MelFeatures>& corpus);

// Zero-initialized accumulators for `ws`.
ParameterGradients zero_gradients(const WeightStore& ws);

inline constexpr double kMinNorm = 1e-12;

// -(e . e_tilde) / (|e| |e_tilde|), clamped to [-1, 1].
double cosine_loss(const Embedding& e, const Embedding& e_tilde);

// dL/de_tilde with e held fixed.
std::vector<double> cosine_loss_grad(const Embedding& e, const Embedding& e_tilde);

// Plain cosine similarity (higher = more similar).
double cosine_similarity(const Embedding& a, const Embedding& b);

// Embedding archive: same container as the weight file, one [embed_dim]
// tensor per key.
void save_embeddings(const std::map<std::string, Embedding>& embeddings,
                     const std::filesystem::path& path);
std::map<std::string, Embedding> load_embeddings(const std::filesystem::path& path);

}  // namespace voicecloak::encoder

#endif  // VOICECLOAK_ENCODER_HPP_
