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

#ifndef VOICECLOAK_SPECTRAL_HPP_
#define VOICECLOAK_SPECTRAL_HPP_

#include <complex>
#include <cstddef>
#include <vector>

#include "voicecloak/audio_io.hpp"
#include "voicecloak/matrix.hpp"

namespace voicecloak::spectral {

// Analysis/synthesis framing. The defaults are a 512-point transform with
// a 25 ms Hann window and a 10 ms hop at 16 kHz; 257 one-sided bins are
// retained.
struct StftConfig {
  std::size_t fft_size = 512;
  std::size_t win_length = 400;
  std::size_t hop_length = 160;

  std::size_t num_bins() const { return fft_size / 2 + 1; }

  // Throws InvalidArgument unless 0 < hop <= win <= fft and fft is a
  // power of two.
  void validate() const;

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

// Periodic Hann window of length cfg.win_length (not zero padded).
std::vector<double> hann_window(std::size_t length);

// Magnitude/phase decomposition of an STFT. Both matrices are
// [frames x bins].
struct Spectrogram {
  Matrix magnitude;
  Matrix phase;
  StftConfig config;
  std::size_t original_length = 0;

  std::size_t frames() const { return magnitude.rows(); }
  std::size_t bins() const { return magnitude.cols(); }
};

// In-place radix-2 complex FFT. `inverse` applies the conjugate transform
// and the 1/N scale.
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const { return n_; }
  void transform(std::vector<std::complex<double>>& data, bool inverse) const;

 private:
  std::size_t n_;
  std::vector<std::size_t> bit_reverse_;
  std::vector<std::complex<double>> twiddles_;
};

// Centered frames (reflect padding of win_length/2 on both sides), one
// frame per hop: floor(len / hop) + 1 frames. Requires 16 kHz input at
// least one window long.
Spectrogram stft(const audio::Waveform& w, const StftConfig& cfg = {});

// Weighted overlap-add with the analysis window, normalized by the sum of
// squared windows. The result has exactly `length` samples at 16 kHz.
audio::Waveform istft(const Matrix& magnitude, const Matrix& phase,
                      const StftConfig& cfg, std::size_t length);

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular mel filters spanning 0..sample_rate/2, [n_mels x bins].
Matrix mel_matrix(std::size_t fft_size, std::size_t n_mels, int sample_rate);

// Centre frequency (Hz) of each filter produced by mel_matrix.
std::vector<double> mel_center_frequencies(std::size_t n_mels, int sample_rate);

inline constexpr double kLogFloor = 1e-10;
inline constexpr std::size_t kDefaultMels = 64;

// Log-compressed mel energies, [frames x n_mels].
struct MelFeatures {
  Matrix values;

  std::size_t frames() const { return values.rows(); }
  std::size_t n_mels() const { return values.cols(); }
};

// log(max(mag^2 * mel^T, kLogFloor)).
MelFeatures log_mel(const Matrix& magnitude, const Matrix& mel);

// Reverse-mode gradient of log_mel with respect to the magnitude. Floored
// entries pass no gradient.
Matrix log_mel_backward(const Matrix& grad_out, const Matrix& magnitude,
                        const Matrix& mel);

// Forward-mode derivative of log_mel along `tangent` (same shape as the
// magnitude). Floored entries have zero derivative.
Matrix log_mel_jvp(const Matrix& magnitude, const Matrix& mel, const Matrix& tangent);

}  // namespace voicecloak::spectral

#endif  // VOICECLOAK_SPECTRAL_HPP_
