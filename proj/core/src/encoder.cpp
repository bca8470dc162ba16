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

#include "voicecloak/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"
#include "tensor_archive.hpp"
#include "voicecloak/error.hpp"

namespace voicecloak::encoder {

using nlohmann::json;

namespace {

constexpr std::string_view kWeightFormat = "voicecloak-weights";
constexpr std::string_view kEmbeddingFormat = "voicecloak-embeddings";
constexpr int kEmbeddingFormatVersion = 1;

std::string conv_name(std::size_t layer, std::string_view what) {
  return "conv" + std::to_string(layer) + "." + std::string(what);
}

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void EncoderConfig::validate() const {
  if (conv_channels.empty()) throw InvalidArgument("EncoderConfig: at least one conv layer required");
  if (embed_dim < 2) throw InvalidArgument("EncoderConfig: embed_dim must be >= 2");
  for (auto c : conv_channels) {
    if (c == 0) throw InvalidArgument("EncoderConfig: conv layer with zero channels");
  }
  std::set<std::size_t> seen;
  for (auto p : pool_after) {
    if (p >= conv_channels.size()) {
      throw InvalidArgument("EncoderConfig: pool_after index " + std::to_string(p) + " has no conv layer");
    }
    if (!seen.insert(p).second) throw InvalidArgument("EncoderConfig: duplicate pool_after index");
  }
  if ((n_mels >> pool_after.size()) == 0) {
    throw InvalidArgument("EncoderConfig: " + std::to_string(n_mels) + " mel channels cannot survive " +
                          std::to_string(pool_after.size()) + " pooling stages");
  }
}

bool EncoderConfig::pools_after(std::size_t layer) const {
  return std::find(pool_after.begin(), pool_after.end(), layer) != pool_after.end();
}

std::size_t EncoderConfig::min_frames() const { return std::size_t{1} << pool_after.size(); }

std::size_t EncoderConfig::stats_dim() const {
  return 2 * conv_channels.back() * (n_mels >> pool_after.size());
}

std::string EncoderConfig::to_json() const {
  return json{{"conv_channels", conv_channels},
              {"pool_after", pool_after},
              {"embed_dim", embed_dim},
              {"n_mels", n_mels}}
      .dump();
}

EncoderConfig EncoderConfig::from_json(const std::string& text) {
  EncoderConfig cfg;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw FormatError("encoder config must be a JSON object");
    cfg.conv_channels = j.value("conv_channels", cfg.conv_channels);
    cfg.pool_after = j.value("pool_after", cfg.pool_after);
    cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
    cfg.n_mels = j.value("n_mels", cfg.n_mels);
  } catch (const json::exception& e) {
    throw FormatError(std::string("encoder config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Weights

std::size_t Tensor::numel() const { return product(shape); }

std::vector<std::pair<std::string, std::vector<std::size_t>>> parameter_layout(const EncoderConfig& cfg) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> layout;
  std::size_t in = 1;
  for (std::size_t l = 0; l < cfg.conv_channels.size(); ++l) {
    const std::size_t out = cfg.conv_channels[l];
    layout.emplace_back(conv_name(l, "weight"), std::vector<std::size_t>{out, in, 3, 3});
    layout.emplace_back(conv_name(l, "bias"), std::vector<std::size_t>{out});
    in = out;
  }
  layout.emplace_back("embed.weight", std::vector<std::size_t>{cfg.embed_dim, cfg.stats_dim()});
  layout.emplace_back("embed.bias", std::vector<std::size_t>{cfg.embed_dim});
  return layout;
}

WeightStore::WeightStore(EncoderConfig config, std::map<std::string, Tensor> tensors)
    : config_(std::move(config)), tensors_(std::move(tensors)) {
  config_.validate();
  const auto layout = parameter_layout(config_);
  if (layout.size() != tensors_.size()) {
    throw InvalidArgument("WeightStore: expected " + std::to_string(layout.size()) + " tensors, got " +
                          std::to_string(tensors_.size()));
  }
  for (const auto& [name, shape] : layout) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw InvalidArgument("WeightStore: missing tensor '" + name + "'");
    if (it->second.shape != shape || it->second.values.size() != product(shape)) {
      throw InvalidArgument("WeightStore: tensor '" + name + "' has shape " + shape_string(it->second.shape) +
                            ", config requires " + shape_string(shape));
    }
    for (double v : it->second.values) {
      if (!std::isfinite(v)) throw InvalidArgument("WeightStore: tensor '" + name + "' is not finite");
    }
  }
}

const Tensor& WeightStore::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw InvalidArgument("WeightStore: no tensor '" + name + "'");
  return it->second;
}

Tensor& WeightStore::mutable_get(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw InvalidArgument("WeightStore: no tensor '" + name + "'");
  return it->second;
}

WeightStore init_random(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::map<std::string, Tensor> tensors;
  for (const auto& [name, shape] : parameter_layout(cfg)) {
    Tensor t{shape, std::vector<double>(product(shape), 0.0)};
    if (shape.size() > 1) {
      const std::size_t fan_in = product(shape) / shape[0];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      // 53-bit uniform on [0, 1), identical across standard libraries.
      for (double& v : t.values) v = bound * (2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0);
    }
    tensors.emplace(name, std::move(t));
  }
  return WeightStore(cfg, std::move(tensors));
}

void save_weights(const WeightStore& ws, const std::filesystem::path& path) {
  std::vector<detail::ArchiveEntry> entries;
  for (const auto& [name, shape] : parameter_layout(ws.config())) {
    entries.push_back({name, shape, ws.get(name).values});
  }
  json header;
  header["config"] = json::parse(ws.config().to_json());
  detail::write_archive(path, kWeightFormat, kWeightFormatVersion, std::move(header), entries);
}

WeightStore load_weights(const std::filesystem::path& path) {
  auto archive = detail::read_archive(path, kWeightFormat, kWeightFormatVersion);
  if (!archive.header.contains("config")) throw FormatError(path.string() + ": header has no config");
  EncoderConfig cfg;
  try {
    cfg = EncoderConfig::from_json(archive.header["config"].dump());
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  std::map<std::string, Tensor> tensors;
  for (auto& e : archive.entries) {
    if (!tensors.emplace(e.name, Tensor{e.shape, std::move(e.values)}).second) {
      throw FormatError(path.string() + ": duplicate tensor '" + e.name + "'");
    }
  }
  try {
    return WeightStore(cfg, std::move(tensors));
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

// Bias is optional so the same kernel serves the tangent pass.
FeatureMap conv3x3(const FeatureMap& in, const Tensor& weight, const Tensor* bias) {
  const std::size_t out_ch = weight.shape[0];
  const std::size_t T = in.time, F = in.freq;
  FeatureMap out{out_ch, T, F, std::vector<double>(out_ch * T * F)};
  for (std::size_t co = 0; co < out_ch; ++co) {
    double* o = out.values.data() + co * T * F;
    std::fill(o, o + T * F, bias ? bias->values[co] : 0.0);
    for (std::size_t ci = 0; ci < in.channels; ++ci) {
      const double* a = in.values.data() + ci * T * F;
      const double* w = weight.values.data() + (co * in.channels + ci) * 9;
      for (std::size_t dt = 0; dt < 3; ++dt) {
        // output row t reads input row t + dt - 1
        const std::size_t t_lo = dt == 0 ? 1 : 0;
        const std::size_t t_hi = dt == 2 ? T - 1 : T;
        for (std::size_t t = t_lo; t < t_hi; ++t) {
          const double* src = a + (t + dt - 1) * F;
          double* dst = o + t * F;
          const double w0 = w[dt * 3], w1 = w[dt * 3 + 1], w2 = w[dt * 3 + 2];
          for (std::size_t f = 1; f < F; ++f) dst[f] += w0 * src[f - 1];
          for (std::size_t f = 0; f < F; ++f) dst[f] += w1 * src[f];
          for (std::size_t f = 0; f + 1 < F; ++f) dst[f] += w2 * src[f + 1];
        }
      }
    }
  }
  return out;
}

// Returns dL/d(in); accumulates weight/bias gradients when requested.
FeatureMap conv3x3_backward(const FeatureMap& in, const Tensor& weight, const FeatureMap& grad_out,
                            Tensor* grad_weight, Tensor* grad_bias) {
  const std::size_t T = in.time, F = in.freq;
  FeatureMap grad_in{in.channels, T, F, std::vector<double>(in.values.size(), 0.0)};
  for (std::size_t co = 0; co < grad_out.channels; ++co) {
    const double* g = grad_out.values.data() + co * T * F;
    if (grad_bias) grad_bias->values[co] += std::accumulate(g, g + T * F, 0.0);
    for (std::size_t ci = 0; ci < in.channels; ++ci) {
      const double* a = in.values.data() + ci * T * F;
      double* ga = grad_in.values.data() + ci * T * F;
      const double* w = weight.values.data() + (co * in.channels + ci) * 9;
      double* gw = grad_weight ? grad_weight->values.data() + (co * in.channels + ci) * 9 : nullptr;
      for (std::size_t dt = 0; dt < 3; ++dt) {
        const std::size_t t_lo = dt == 0 ? 1 : 0;
        const std::size_t t_hi = dt == 2 ? T - 1 : T;
        for (std::size_t t = t_lo; t < t_hi; ++t) {
          const double* go = g + t * F;
          double* dst = ga + (t + dt - 1) * F;
          const double w0 = w[dt * 3], w1 = w[dt * 3 + 1], w2 = w[dt * 3 + 2];
          for (std::size_t f = 1; f < F; ++f) dst[f - 1] += w0 * go[f];
          for (std::size_t f = 0; f < F; ++f) dst[f] += w1 * go[f];
          for (std::size_t f = 0; f + 1 < F; ++f) dst[f + 1] += w2 * go[f];
          if (gw) {
            const double* src = a + (t + dt - 1) * F;
            double s0 = 0, s1 = 0, s2 = 0;
            for (std::size_t f = 1; f < F; ++f) s0 += go[f] * src[f - 1];
            for (std::size_t f = 0; f < F; ++f) s1 += go[f] * src[f];
            for (std::size_t f = 0; f + 1 < F; ++f) s2 += go[f] * src[f + 1];
            gw[dt * 3] += s0;
            gw[dt * 3 + 1] += s1;
            gw[dt * 3 + 2] += s2;
          }
        }
      }
    }
  }
  return grad_in;
}

FeatureMap avg_pool2x2(const FeatureMap& in) {
  const std::size_t T = in.time / 2, F = in.freq / 2;
  FeatureMap out{in.channels, T, F, std::vector<double>(in.channels * T * F)};
  for (std::size_t c = 0; c < in.channels; ++c) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t f = 0; f < F; ++f) {
        out.at(c, t, f) = 0.25 * (in.at(c, 2 * t, 2 * f) + in.at(c, 2 * t + 1, 2 * f) +
                                  in.at(c, 2 * t, 2 * f + 1) + in.at(c, 2 * t + 1, 2 * f + 1));
      }
    }
  }
  return out;
}

FeatureMap avg_pool2x2_backward(const FeatureMap& grad_out, std::size_t time, std::size_t freq) {
  FeatureMap grad_in{grad_out.channels, time, freq, std::vector<double>(grad_out.channels * time * freq, 0.0)};
  for (std::size_t c = 0; c < grad_out.channels; ++c) {
    for (std::size_t t = 0; t < grad_out.time; ++t) {
      for (std::size_t f = 0; f < grad_out.freq; ++f) {
        const double g = 0.25 * grad_out.at(c, t, f);
        grad_in.at(c, 2 * t, 2 * f) = g;
        grad_in.at(c, 2 * t + 1, 2 * f) = g;
        grad_in.at(c, 2 * t, 2 * f + 1) = g;
        grad_in.at(c, 2 * t + 1, 2 * f + 1) = g;
      }
    }
  }
  return grad_in;
}

}  // namespace

ForwardResult forward(const spectral::MelFeatures& feat, const WeightStore& ws) {
  const auto& cfg = ws.config();
  if (feat.n_mels() != cfg.n_mels) {
    throw InvalidArgument("encoder forward: features have " + std::to_string(feat.n_mels()) +
                          " mel channels, encoder expects " + std::to_string(cfg.n_mels));
  }
  if (feat.frames() < cfg.min_frames()) {
    throw InvalidArgument("encoder forward: " + std::to_string(feat.frames()) + " frames < minimum " +
                          std::to_string(cfg.min_frames()));
  }

  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.weights = &ws;
  cache.input_frames = feat.frames();

  FeatureMap act{1, feat.frames(), feat.n_mels(), feat.values.data()};
  for (std::size_t l = 0; l < cfg.conv_channels.size(); ++l) {
    FeatureMap z = conv3x3(act, ws.get(conv_name(l, "weight")), &ws.get(conv_name(l, "bias")));
    cache.layer_inputs.push_back(std::move(act));
    act = z;
    for (double& v : act.values) v = std::max(v, 0.0);
    cache.pre_activations.push_back(std::move(z));
    if (cfg.pools_after(l)) act = avg_pool2x2(act);
  }

  // Temporal statistics over per-frame vectors of width C * F.
  const std::size_t T = act.time, width = act.channels * act.freq;
  cache.final_time = T;
  cache.final_features.assign(T * width, 0.0);
  for (std::size_t c = 0; c < act.channels; ++c) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t f = 0; f < act.freq; ++f) {
        cache.final_features[t * width + c * act.freq + f] = act.at(c, t, f);
      }
    }
  }
  cache.mean.assign(width, 0.0);
  cache.stddev.assign(width, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t d = 0; d < width; ++d) cache.mean[d] += cache.final_features[t * width + d];
  }
  for (double& m : cache.mean) m /= static_cast<double>(T);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t d = 0; d < width; ++d) {
      const double diff = cache.final_features[t * width + d] - cache.mean[d];
      cache.stddev[d] += diff * diff;
    }
  }
  for (double& s : cache.stddev) s = s > 0.0 ? std::sqrt(s / static_cast<double>(T)) : 0.0;

  const Tensor& w = ws.get("embed.weight");
  const Tensor& b = ws.get("embed.bias");
  auto& emb = result.embedding.values;
  emb.assign(cfg.embed_dim, 0.0);
  for (std::size_t i = 0; i < cfg.embed_dim; ++i) {
    const double* row = w.values.data() + i * 2 * width;
    double sum = b.values[i];
    for (std::size_t d = 0; d < width; ++d) sum += row[d] * cache.mean[d] + row[width + d] * cache.stddev[d];
    emb[i] = sum;
  }
  return result;
}

ParameterGradients zero_gradients(const WeightStore& ws) {
  ParameterGradients grads;
  for (const auto& [name, t] : ws.tensors()) grads.emplace(name, Tensor{t.shape, std::vector<double>(t.numel(), 0.0)});
  return grads;
}

Matrix backward(const ForwardCache& cache, const std::vector<double>& grad_embedding,
                ParameterGradients* param_grads) {
  if (cache.weights == nullptr) throw InvalidArgument("encoder backward: empty forward cache");
  const WeightStore& ws = *cache.weights;
  const auto& cfg = ws.config();
  if (grad_embedding.size() != cfg.embed_dim) {
    throw InvalidArgument("encoder backward: gradient has " + std::to_string(grad_embedding.size()) +
                          " entries, embedding has " + std::to_string(cfg.embed_dim));
  }
  const std::size_t width = cache.mean.size();
  const std::size_t T = cache.final_time;
  if (cache.final_features.size() != T * width || cache.layer_inputs.size() != cfg.conv_channels.size()) {
    throw InvalidArgument("encoder backward: cache does not match the encoder configuration");
  }

  // Linear map.
  const Tensor& w = ws.get("embed.weight");
  std::vector<double> grad_stats(2 * width, 0.0);
  for (std::size_t i = 0; i < cfg.embed_dim; ++i) {
    const double g = grad_embedding[i];
    if (g == 0.0) continue;
    const double* row = w.values.data() + i * 2 * width;
    for (std::size_t d = 0; d < 2 * width; ++d) grad_stats[d] += g * row[d];
  }
  if (param_grads) {
    auto& gw = param_grads->at("embed.weight").values;
    auto& gb = param_grads->at("embed.bias").values;
    for (std::size_t i = 0; i < cfg.embed_dim; ++i) {
      gb[i] += grad_embedding[i];
      double* row = gw.data() + i * 2 * width;
      for (std::size_t d = 0; d < width; ++d) {
        row[d] += grad_embedding[i] * cache.mean[d];
        row[width + d] += grad_embedding[i] * cache.stddev[d];
      }
    }
  }

  // Mean+std pooling: d mean/dv_t = 1/T, d std/dv_t = (v_t - mean) / (T std).
  const std::size_t last = cfg.conv_channels.size() - 1;
  const FeatureMap& last_z = cache.pre_activations[last];
  const std::size_t C = last_z.channels;
  const std::size_t F = width / C;
  FeatureMap grad{C, T, F, std::vector<double>(C * T * F)};
  const double inv_t = 1.0 / static_cast<double>(T);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t f = 0; f < F; ++f) {
        const std::size_t d = c * F + f;
        double g = grad_stats[d] * inv_t;
        if (cache.stddev[d] > 0.0) {
          g += grad_stats[width + d] * (cache.final_features[t * width + d] - cache.mean[d]) * inv_t /
               cache.stddev[d];
        }
        grad.at(c, t, f) = g;
      }
    }
  }

  for (std::size_t l = cfg.conv_channels.size(); l-- > 0;) {
    const FeatureMap& z = cache.pre_activations[l];
    if (cfg.pools_after(l)) grad = avg_pool2x2_backward(grad, z.time, z.freq);
    for (std::size_t i = 0; i < grad.values.size(); ++i) {
      if (!(z.values[i] > 0.0)) grad.values[i] = 0.0;
    }
    Tensor* gw = param_grads ? &param_grads->at(conv_name(l, "weight")) : nullptr;
    Tensor* gb = param_grads ? &param_grads->at(conv_name(l, "bias")) : nullptr;
    grad = conv3x3_backward(cache.layer_inputs[l], ws.get(conv_name(l, "weight")), grad, gw, gb);
  }

  Matrix out(grad.time, grad.freq);
  out.data() = std::move(grad.values);
  return out;
}

std::vector<double> jvp(const ForwardCache& cache, const Matrix& tangent) {
  if (cache.weights == nullptr) throw InvalidArgument("encoder jvp: empty forward cache");
  const WeightStore& ws = *cache.weights;
  const auto& cfg = ws.config();
  if (tangent.rows() != cache.input_frames || tangent.cols() != cfg.n_mels) {
    throw InvalidArgument("encoder jvp: tangent shape does not match the cached input");
  }

  FeatureMap d{1, tangent.rows(), tangent.cols(), tangent.data()};
  for (std::size_t l = 0; l < cfg.conv_channels.size(); ++l) {
    d = conv3x3(d, ws.get(conv_name(l, "weight")), nullptr);
    const FeatureMap& z = cache.pre_activations[l];
    for (std::size_t i = 0; i < d.values.size(); ++i) {
      if (!(z.values[i] > 0.0)) d.values[i] = 0.0;
    }
    if (cfg.pools_after(l)) d = avg_pool2x2(d);
  }

  const std::size_t width = cache.mean.size();
  const std::size_t T = cache.final_time;
  const std::size_t F = d.freq;
  std::vector<double> d_mean(width, 0.0), d_std(width, 0.0);
  const double inv_t = 1.0 / static_cast<double>(T);
  for (std::size_t c = 0; c < d.channels; ++c) {
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t f = 0; f < F; ++f) {
        const std::size_t k = c * F + f;
        const double dv = d.at(c, t, f);
        d_mean[k] += dv * inv_t;
        if (cache.stddev[k] > 0.0) {
          d_std[k] += (cache.final_features[t * width + k] - cache.mean[k]) * dv * inv_t / cache.stddev[k];
        }
      }
    }
  }

  const Tensor& w = ws.get("embed.weight");
  std::vector<double> out(cfg.embed_dim, 0.0);
  for (std::size_t i = 0; i < cfg.embed_dim; ++i) {
    const double* row = w.values.data() + i * 2 * width;
    double sum = 0.0;
    for (std::size_t k = 0; k < width; ++k) sum += row[k] * d_mean[k] + row[width + k] * d_std[k];
    out[i] = sum;
  }
  return out;
}

WeightStore center_embeddings(const WeightStore& ws, const std::vector<spectral::MelFeatures>& corpus) {
  if (corpus.empty()) throw InvalidArgument("center_embeddings: empty corpus");
  const auto& cfg = ws.config();
  const std::size_t width = cfg.stats_dim() / 2;
  std::vector<double> stats(2 * width, 0.0);
  for (const auto& feat : corpus) {
    const auto fwd = forward(feat, ws);
    for (std::size_t k = 0; k < width; ++k) {
      stats[k] += fwd.cache.mean[k];
      stats[width + k] += fwd.cache.stddev[k];
    }
  }
  for (double& v : stats) v /= static_cast<double>(corpus.size());

  WeightStore out = ws;
  const Tensor& w = ws.get("embed.weight");
  auto& bias = out.mutable_get("embed.bias").values;
  for (std::size_t i = 0; i < cfg.embed_dim; ++i) {
    const double* row = w.values.data() + i * 2 * width;
    bias[i] = -std::inner_product(row, row + 2 * width, stats.begin(), 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cosine loss

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void check_pair(const Embedding& a, const Embedding& b, double na, double nb, const char* what) {
  if (a.dim() != b.dim()) {
    throw InvalidArgument(std::string(what) + ": dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()) + ")");
  }
  if (!(na > kMinNorm) || !(nb > kMinNorm)) {
    throw InvalidArgument(std::string(what) + ": embedding norm below 1e-12");
  }
}

}  // namespace

double cosine_similarity(const Embedding& a, const Embedding& b) {
  const double na = std::sqrt(dot(a.values, a.values));
  const double nb = std::sqrt(dot(b.values, b.values));
  check_pair(a, b, na, nb, "cosine_similarity");
  return std::clamp(dot(a.values, b.values) / (na * nb), -1.0, 1.0);
}

double cosine_loss(const Embedding& e, const Embedding& e_tilde) {
  const double ne = std::sqrt(dot(e.values, e.values));
  const double nt = std::sqrt(dot(e_tilde.values, e_tilde.values));
  check_pair(e, e_tilde, ne, nt, "cosine_loss");
  return std::clamp(-dot(e.values, e_tilde.values) / (ne * nt), -1.0, 1.0);
}

std::vector<double> cosine_loss_grad(const Embedding& e, const Embedding& e_tilde) {
  const double ne = std::sqrt(dot(e.values, e.values));
  const double nt2 = dot(e_tilde.values, e_tilde.values);
  const double nt = std::sqrt(nt2);
  check_pair(e, e_tilde, ne, nt, "cosine_loss_grad");
  // -(e - (e.et / |et|^2) et) / (|e| |et|)
  const double proj = dot(e.values, e_tilde.values) / nt2;
  const double scale = -1.0 / (ne * nt);
  std::vector<double> g(e.dim());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (e.values[i] - proj * e_tilde.values[i]);
  return g;
}

// ---------------------------------------------------------------------------
// Embedding archive

void save_embeddings(const std::map<std::string, Embedding>& embeddings, const std::filesystem::path& path) {
  std::vector<detail::ArchiveEntry> entries;
  std::size_t dim = 0;
  for (const auto& [key, emb] : embeddings) {
    if (key.empty()) throw InvalidArgument("save_embeddings: empty key");
    if (dim == 0) dim = emb.dim();
    if (emb.dim() != dim) throw InvalidArgument("save_embeddings: inconsistent dimension for key '" + key + "'");
    entries.push_back({key, {emb.dim()}, emb.values});
  }
  json header;
  header["embed_dim"] = dim;
  detail::write_archive(path, kEmbeddingFormat, kEmbeddingFormatVersion, std::move(header), entries);
}

std::map<std::string, Embedding> load_embeddings(const std::filesystem::path& path) {
  auto archive = detail::read_archive(path, kEmbeddingFormat, kEmbeddingFormatVersion);
  std::map<std::string, Embedding> out;
  for (auto& e : archive.entries) {
    if (e.shape.size() != 1) throw FormatError(path.string() + ": entry '" + e.name + "' is not a vector");
    if (!out.emplace(e.name, Embedding{std::move(e.values)}).second) {
      throw FormatError(path.string() + ": duplicate key '" + e.name + "'");
    }
  }
  return out;
}

}  // namespace voicecloak::encoder
