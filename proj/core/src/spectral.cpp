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

#include "voicecloak/spectral.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <string>

#include "voicecloak/error.hpp"

namespace voicecloak::spectral {

using Complex = std::complex<double>;

void StftConfig::validate() const {
  if (hop_length == 0 || hop_length > win_length || win_length > fft_size) {
    throw InvalidArgument("StftConfig: require 0 < hop_length <= win_length <= fft_size (got hop " +
                          std::to_string(hop_length) + ", win " + std::to_string(win_length) +
                          ", fft " + std::to_string(fft_size) + ")");
  }
  if (!std::has_single_bit(fft_size)) {
    throw InvalidArgument("StftConfig: fft_size " + std::to_string(fft_size) +
                          " is not a power of two");
  }
}

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                static_cast<double>(length));
  }
  return w;
}

Fft::Fft(std::size_t n) : n_(n), bit_reverse_(n), twiddles_(n / 2) {
  if (!std::has_single_bit(n)) throw InvalidArgument("Fft: size must be a power of two");
  const int bits = std::countr_zero(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (int b = 0; b < bits; ++b) r |= ((i >> b) & 1u) << (bits - 1 - b);
    bit_reverse_[i] = r;
  }
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddles_[k] = {std::cos(angle), std::sin(angle)};
  }
}

void Fft::transform(std::vector<Complex>& data, bool inverse) const {
  if (data.size() != n_) throw InvalidArgument("Fft: buffer size mismatch");
  for (std::size_t i = 0; i < n_; ++i) {
    if (i < bit_reverse_[i]) std::swap(data[i], data[bit_reverse_[i]]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        Complex t = twiddles_[k * stride];
        if (inverse) t = std::conj(t);
        const Complex a = data[start + k];
        const Complex b = data[start + k + half] * t;
        data[start + k] = a + b;
        data[start + k + half] = a - b;
      }
    }
  }
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& v : data) v *= scale;
  }
}

Spectrogram stft(const audio::Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  if (w.sample_rate != audio::kCanonicalSampleRate) {
    throw InvalidArgument("stft: expected " + std::to_string(audio::kCanonicalSampleRate) +
                          " Hz input, got " + std::to_string(w.sample_rate) + " (resample first)");
  }
  const std::size_t len = w.samples.size();
  if (len < cfg.win_length) {
    throw InvalidArgument("stft: signal of " + std::to_string(len) +
                          " samples is shorter than one window (" + std::to_string(cfg.win_length) + ")");
  }

  const std::size_t pad = cfg.win_length / 2;
  std::vector<double> padded(len + 2 * pad);
  for (std::size_t i = 0; i < len; ++i) padded[pad + i] = w.samples[i];
  for (std::size_t i = 1; i <= pad; ++i) {
    padded[pad - i] = w.samples[i];
    padded[pad + len - 1 + i] = w.samples[len - 1 - i];
  }

  const auto window = hann_window(cfg.win_length);
  const std::size_t offset = (cfg.fft_size - cfg.win_length) / 2;
  const std::size_t frames = len / cfg.hop_length + 1;
  const std::size_t bins = cfg.num_bins();
  const Fft fft(cfg.fft_size);

  Spectrogram spec{Matrix(frames, bins), Matrix(frames, bins), cfg, len};
  std::vector<Complex> buf(cfg.fft_size);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), Complex{});
    const std::size_t start = t * cfg.hop_length;
    for (std::size_t n = 0; n < cfg.win_length; ++n) {
      buf[offset + n] = padded[start + n] * window[n];
    }
    fft.transform(buf, false);
    for (std::size_t k = 0; k < bins; ++k) {
      spec.magnitude(t, k) = std::abs(buf[k]);
      double angle = std::arg(buf[k]);
      if (angle <= -std::numbers::pi) angle = std::numbers::pi;
      spec.phase(t, k) = angle;
    }
  }
  return spec;
}

audio::Waveform istft(const Matrix& magnitude, const Matrix& phase, const StftConfig& cfg,
                      std::size_t length) {
  cfg.validate();
  require_same_shape(magnitude, phase, "istft");
  if (magnitude.cols() != cfg.num_bins()) {
    throw InvalidArgument("istft: expected " + std::to_string(cfg.num_bins()) + " bins, got " +
                          std::to_string(magnitude.cols()));
  }

  const std::size_t frames = magnitude.rows();
  const std::size_t pad = cfg.win_length / 2;
  const std::size_t span = frames == 0 ? 0 : (frames - 1) * cfg.hop_length + cfg.win_length;
  std::vector<double> acc(std::max(span, length + 2 * pad), 0.0);
  std::vector<double> norm(acc.size(), 0.0);

  const auto window = hann_window(cfg.win_length);
  const std::size_t offset = (cfg.fft_size - cfg.win_length) / 2;
  const std::size_t n = cfg.fft_size;
  const Fft fft(n);
  std::vector<Complex> buf(n);

  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k <= n / 2; ++k) {
      buf[k] = std::polar(magnitude(t, k), phase(t, k));
    }
    for (std::size_t k = 1; k < n / 2; ++k) buf[n - k] = std::conj(buf[k]);
    fft.transform(buf, true);
    const std::size_t start = t * cfg.hop_length;
    for (std::size_t i = 0; i < cfg.win_length; ++i) {
      acc[start + i] += buf[offset + i].real() * window[i];
      norm[start + i] += window[i] * window[i];
    }
  }

  audio::Waveform out;
  out.sample_rate = audio::kCanonicalSampleRate;
  out.samples.assign(length, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t j = i + pad;
    if (norm[j] >= 1e-9) out.samples[i] = acc[j] / norm[j];
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

std::vector<double> mel_edges(std::size_t n_mels, int sample_rate) {
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  return edges;
}

}  // namespace

std::vector<double> mel_center_frequencies(std::size_t n_mels, int sample_rate) {
  auto edges = mel_edges(n_mels, sample_rate);
  return {edges.begin() + 1, edges.end() - 1};
}

Matrix mel_matrix(std::size_t fft_size, std::size_t n_mels, int sample_rate) {
  const std::size_t bins = fft_size / 2 + 1;
  if (sample_rate <= 0 || n_mels == 0 || n_mels >= bins) {
    throw InvalidArgument("mel_matrix: need 0 < n_mels < bins (n_mels " + std::to_string(n_mels) +
                          ", bins " + std::to_string(bins) + ")");
  }
  const auto edges = mel_edges(n_mels, sample_rate);
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(fft_size);

  Matrix mel(n_mels, bins);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], centre = edges[m + 1], hi = edges[m + 2];
    bool nonzero = false;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      double weight = 0.0;
      if (f >= lo && f <= centre) {
        weight = (f - lo) / (centre - lo);
      } else if (f > centre && f <= hi) {
        weight = (hi - f) / (hi - centre);
      }
      mel(m, k) = std::max(weight, 0.0);
      nonzero = nonzero || mel(m, k) > 0.0;
    }
    if (!nonzero) {
      throw InvalidArgument("mel_matrix: filter " + std::to_string(m) + " (" + std::to_string(lo) +
                            "-" + std::to_string(hi) + " Hz) covers no FFT bin; use fewer mels");
    }
  }
  return mel;
}

namespace {

// mag^2 * mel^T without the floor.
Matrix mel_energies(const Matrix& magnitude, const Matrix& mel) {
  if (magnitude.cols() != mel.cols()) {
    throw InvalidArgument("log_mel: magnitude has " + std::to_string(magnitude.cols()) +
                          " bins but the filterbank expects " + std::to_string(mel.cols()));
  }
  Matrix energy(magnitude.rows(), mel.rows());
  std::vector<double> power(magnitude.cols());
  for (std::size_t t = 0; t < magnitude.rows(); ++t) {
    const auto mag = magnitude.row(t);
    for (std::size_t k = 0; k < power.size(); ++k) power[k] = mag[k] * mag[k];
    for (std::size_t m = 0; m < mel.rows(); ++m) {
      const auto filt = mel.row(m);
      double sum = 0.0;
      for (std::size_t k = 0; k < power.size(); ++k) sum += power[k] * filt[k];
      energy(t, m) = sum;
    }
  }
  return energy;
}

}  // namespace

MelFeatures log_mel(const Matrix& magnitude, const Matrix& mel) {
  MelFeatures feat{mel_energies(magnitude, mel)};
  for (double& v : feat.values.data()) v = std::log(std::max(v, kLogFloor));
  return feat;
}

Matrix log_mel_backward(const Matrix& grad_out, const Matrix& magnitude, const Matrix& mel) {
  const Matrix energy = mel_energies(magnitude, mel);
  require_same_shape(grad_out, energy, "log_mel_backward");

  Matrix grad(magnitude.rows(), magnitude.cols());
  std::vector<double> d_energy(mel.rows());
  for (std::size_t t = 0; t < magnitude.rows(); ++t) {
    for (std::size_t m = 0; m < mel.rows(); ++m) {
      const double e = energy(t, m);
      d_energy[m] = e > kLogFloor ? grad_out(t, m) / e : 0.0;
    }
    auto g = grad.row(t);
    for (std::size_t m = 0; m < mel.rows(); ++m) {
      if (d_energy[m] == 0.0) continue;
      const auto filt = mel.row(m);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += d_energy[m] * filt[k];
    }
    const auto mag = magnitude.row(t);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] *= 2.0 * mag[k];
  }
  return grad;
}

Matrix log_mel_jvp(const Matrix& magnitude, const Matrix& mel, const Matrix& tangent) {
  require_same_shape(tangent, magnitude, "log_mel_jvp");
  const Matrix energy = mel_energies(magnitude, mel);
  Matrix out(energy.rows(), energy.cols());
  std::vector<double> d_power(magnitude.cols());
  for (std::size_t t = 0; t < magnitude.rows(); ++t) {
    const auto mag = magnitude.row(t);
    const auto tan = tangent.row(t);
    for (std::size_t k = 0; k < d_power.size(); ++k) d_power[k] = 2.0 * mag[k] * tan[k];
    for (std::size_t m = 0; m < mel.rows(); ++m) {
      const double e = energy(t, m);
      if (!(e > kLogFloor)) continue;
      const auto filt = mel.row(m);
      double sum = 0.0;
      for (std::size_t k = 0; k < d_power.size(); ++k) sum += d_power[k] * filt[k];
      out(t, m) = sum / e;
    }
  }
  return out;
}

}  // namespace voicecloak::spectral
