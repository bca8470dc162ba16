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


#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "support.hpp"
#include "voicecloak/metrics.hpp"
#include "voicecloak/spectral.hpp"

namespace voicecloak::spectral {
namespace {

using Complex = std::complex<double>;

audio::Waveform sine(double hz, std::size_t n, double amp = 1.0) {
  audio::Waveform w{std::vector<double>(n), 16000};
  for (std::size_t i = 0; i < n; ++i) w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * i / 16000.0);
  return w;
}

audio::Waveform noise(std::size_t n, std::uint64_t seed) { return {testing::random_vector(n, seed, -0.5, 0.5), 16000}; }

// One analysis frame by direct summation, with reflection at the edges.
std::vector<Complex> direct_frame(const std::vector<double>& x, std::size_t t, const StftConfig& cfg) {
  const auto len = static_cast<long>(x.size());
  const long half = static_cast<long>(cfg.win_length / 2);
  const double offset = static_cast<double>((cfg.fft_size - cfg.win_length) / 2);
  std::vector<Complex> out(cfg.num_bins());
  for (std::size_t k = 0; k < out.size(); ++k) {
    Complex acc{};
    for (std::size_t n = 0; n < cfg.win_length; ++n) {
      long idx = static_cast<long>(t * cfg.hop_length) - half + static_cast<long>(n);
      if (idx < 0) idx = -idx;
      if (idx >= len) idx = 2 * (len - 1) - idx;
      const double win = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / cfg.win_length);
      const double angle = -2.0 * std::numbers::pi * k * (n + offset) / cfg.fft_size;
      acc += x[idx] * win * Complex(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  return out;
}

TEST(StftConfig, DefaultsAreThe512PointFrontEnd) {
  const StftConfig cfg;
  EXPECT_EQ(cfg.fft_size, 512u);
  EXPECT_EQ(cfg.win_length, 400u);
  EXPECT_EQ(cfg.hop_length, 160u);
  EXPECT_EQ(cfg.num_bins(), 257u);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(StftConfig, ValidateRejectsBadFraming) {
  EXPECT_THROW((StftConfig{512, 600, 160}.validate()), InvalidArgument);
  EXPECT_THROW((StftConfig{512, 400, 500}.validate()), InvalidArgument);
  EXPECT_THROW((StftConfig{512, 400, 0}.validate()), InvalidArgument);
  EXPECT_THROW((StftConfig{500, 400, 160}.validate()), InvalidArgument);
}

TEST(HannWindow, PeriodicForm) {
  const auto w = hann_window(400);
  ASSERT_EQ(w.size(), 400u);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_NEAR(w[200], 1.0, 1e-15);
  EXPECT_NEAR(w[100], 0.5, 1e-15);
  EXPECT_NEAR(w[1], w[399], 1e-15);
}

TEST(Fft, MatchesDirectDft) {
  for (std::size_t n : {1u, 2u, 8u, 64u, 512u}) {
    std::mt19937_64 rng(n);
    std::normal_distribution<double> g;
    std::vector<Complex> x(n);
    for (auto& v : x) v = {g(rng), g(rng)};
    auto y = x;
    Fft(n).transform(y, false);
    for (std::size_t k = 0; k < n; ++k) {
      Complex acc{};
      for (std::size_t j = 0; j < n; ++j) acc += x[j] * std::polar(1.0, -2.0 * std::numbers::pi * k * j / n);
      ASSERT_NEAR(std::abs(y[k] - acc), 0.0, 1e-10 * n) << "n=" << n << " k=" << k;
    }
    Fft(n).transform(y, true);
    for (std::size_t j = 0; j < n; ++j) ASSERT_NEAR(std::abs(y[j] - x[j]), 0.0, 1e-12);
  }
}

TEST(Fft, RejectsNonPowerOfTwo) { EXPECT_THROW(Fft(12), InvalidArgument); }

TEST(Stft, ShapeFollowsFramingRule) {
  for (std::size_t len : {400u, 401u, 16000u, 16159u, 16160u}) {
    const auto s = stft(noise(len, len));
    EXPECT_EQ(s.frames(), len / 160 + 1) << len;
    EXPECT_EQ(s.bins(), 257u);
    EXPECT_EQ(s.original_length, len);
    EXPECT_TRUE(s.magnitude.same_shape(s.phase));
  }
}

TEST(Stft, SilenceGivesZeroMagnitude) {
  const auto s = stft(audio::Waveform{std::vector<double>(4000, 0.0), 16000});
  for (double v : s.magnitude.data()) ASSERT_EQ(v, 0.0);
}

TEST(Stft, OneKilohertzPeaksAtBin32) {
  const auto s = stft(sine(1000.0, 16000));
  for (std::size_t t = 3; t + 3 < s.frames(); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.bins(); ++k) {
      if (s.magnitude(t, k) > s.magnitude(t, best)) best = k;
    }
    ASSERT_EQ(best, 32u) << "frame " << t;
  }
}

TEST(Stft, MatchesDirectDftOfEachFrame) {
  const auto w = noise(3000, 17);
  const StftConfig cfg;
  const auto s = stft(w, cfg);
  for (std::size_t t : std::vector<std::size_t>{0, 1, 9, s.frames() - 1}) {
    const auto ref = direct_frame(w.samples, t, cfg);
    for (std::size_t k = 0; k < s.bins(); ++k) {
      const Complex got = std::polar(s.magnitude(t, k), s.phase(t, k));
      ASSERT_LT(std::abs(got - ref[k]), 1e-9) << "frame " << t << " bin " << k;
    }
  }
}

TEST(Stft, MagnitudeIgnoresSignFlip) {
  auto w = noise(5000, 4);
  auto neg = w;
  for (double& v : neg.samples) v = -v;
  EXPECT_EQ(stft(w).magnitude, stft(neg).magnitude);
}

TEST(Stft, IsDeterministic) {
  const auto w = noise(7000, 8);
  const auto a = stft(w);
  const auto b = stft(w);
  EXPECT_EQ(a.magnitude, b.magnitude);
  EXPECT_EQ(a.phase, b.phase);
}

TEST(Stft, RejectsWrongRateAndShortInput) {
  EXPECT_THROW(stft(audio::Waveform{std::vector<double>(1000, 0.1), 8000}), InvalidArgument);
  EXPECT_THROW(stft(audio::Waveform{std::vector<double>(399, 0.1), 16000}), InvalidArgument);
}

double interior_snr(const audio::Waveform& ref, const audio::Waveform& out, std::size_t margin) {
  audio::Waveform a{{ref.samples.begin() + margin, ref.samples.end() - margin}, 16000};
  audio::Waveform b{{out.samples.begin() + margin, out.samples.end() - margin}, 16000};
  return metrics::snr_db(a, b);
}

TEST(Istft, RoundTripAbove60Db) {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<std::size_t> len_dist(16000, 48000);
  for (int i = 0; i < 10; ++i) {
    const auto w = noise(len_dist(rng), 1000 + i);
    const auto s = stft(w);
    const auto r = istft(s.magnitude, s.phase, s.config, w.samples.size());
    ASSERT_EQ(r.samples.size(), w.samples.size());
    EXPECT_GT(interior_snr(w, r, 400), 60.0);
  }
}

TEST(Istft, ZeroMagnitudeGivesSilence) {
  const auto s = stft(noise(8000, 2));
  const Matrix zero(s.frames(), s.bins(), 0.0);
  const auto r = istft(zero, s.phase, s.config, 8000);
  for (double v : r.samples) ASSERT_EQ(v, 0.0);
}

TEST(Istft, PerturbedMagnitudeKeepsLength) {
  const auto w = noise(12345, 3);
  auto s = stft(w);
  for (double& v : s.magnitude.data()) v += 0.01;
  const auto r = istft(s.magnitude, s.phase, s.config, w.samples.size());
  EXPECT_EQ(r.samples.size(), w.samples.size());
  EXPECT_EQ(r.sample_rate, 16000);
}

TEST(Istft, RejectsShapeMismatch) {
  const auto s = stft(noise(4000, 5));
  EXPECT_THROW(istft(s.magnitude, Matrix(s.frames() + 1, s.bins()), s.config, 4000), InvalidArgument);
}

TEST(MelScale, HtkFormulaAndInverse) {
  EXPECT_NEAR(hz_to_mel(1000.0), 2595.0 * std::log10(1.0 + 1000.0 / 700.0), 1e-12);
  EXPECT_EQ(hz_to_mel(0.0), 0.0);
  for (double hz : {10.0, 440.0, 3999.0, 8000.0}) EXPECT_NEAR(mel_to_hz(hz_to_mel(hz)), hz, 1e-9);
}

TEST(MelMatrix, RowsArePositiveAndPeaksIncrease) {
  const Matrix mel = mel_matrix(512, 64, 16000);
  ASSERT_EQ(mel.rows(), 64u);
  ASSERT_EQ(mel.cols(), 257u);
  std::size_t prev_peak = 0;
  for (std::size_t m = 0; m < mel.rows(); ++m) {
    double sum = 0.0;
    std::size_t peak = 0;
    for (std::size_t k = 0; k < mel.cols(); ++k) {
      ASSERT_GE(mel(m, k), 0.0);
      sum += mel(m, k);
      if (mel(m, k) > mel(m, peak)) peak = k;
    }
    EXPECT_GT(sum, 0.0) << "filter " << m;
    if (m > 0) {
      EXPECT_GE(peak, prev_peak) << "filter " << m;
    }
    prev_peak = peak;
  }
  const auto centres = mel_center_frequencies(64, 16000);
  ASSERT_EQ(centres.size(), 64u);
  for (std::size_t m = 1; m < centres.size(); ++m) EXPECT_GT(centres[m], centres[m - 1]);
}

TEST(MelMatrix, FlatSpectrumLightsEveryFilter) {
  const Matrix mel = mel_matrix(512, 64, 16000);
  for (std::size_t m = 0; m < mel.rows(); ++m) {
    double out = 0.0;
    for (std::size_t k = 0; k < mel.cols(); ++k) out += mel(m, k) * 1.0;
    EXPECT_GT(out, 0.0);
  }
}

TEST(MelMatrix, RejectsTooManyFilters) { EXPECT_THROW(mel_matrix(512, 300, 16000), InvalidArgument); }

TEST(LogMel, SilenceHitsTheFloor) {
  const Matrix mel = mel_matrix(512, 64, 16000);
  const auto f = log_mel(Matrix(5, 257, 0.0), mel);
  for (double v : f.values.data()) ASSERT_EQ(v, std::log(kLogFloor));
}

TEST(LogMel, DoublingMagnitudeAddsLogFour) {
  const Matrix mel = mel_matrix(512, 64, 16000);
  const Matrix mag = testing::random_matrix(6, 257, 9, 0.0, 2.0);
  Matrix twice = mag;
  for (double& v : twice.data()) v *= 2.0;
  const auto a = log_mel(mag, mel);
  const auto b = log_mel(twice, mel);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if (a.values.data()[i] > std::log(kLogFloor)) {
      ASSERT_NEAR(b.values.data()[i] - a.values.data()[i], std::log(4.0), 1e-12);
    }
  }
}

TEST(LogMel, MatchesDirectComputation) {
  const Matrix mel = mel_matrix(512, 40, 16000);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix mag = testing::random_matrix(7, 257, seed, 0.0, 3.0);
    const auto f = log_mel(mag, mel);
    for (std::size_t t = 0; t < mag.rows(); ++t) {
      for (std::size_t m = 0; m < mel.rows(); ++m) {
        double e = 0.0;
        for (std::size_t k = 0; k < mag.cols(); ++k) e += mel(m, k) * mag(t, k) * mag(t, k);
        const double ref = std::log(std::max(e, 1e-10));
        ASSERT_NEAR(f.values(t, m), ref, 1e-12 * std::max(1.0, std::abs(ref)));
      }
    }
  }
}

TEST(LogMelBackward, ZeroUpstreamGivesZeroGradient) {
  const Matrix mel = mel_matrix(512, 64, 16000);
  const Matrix mag = testing::random_matrix(4, 257, 1, 0.0, 1.0);
  const Matrix g = log_mel_backward(Matrix(4, 64, 0.0), mag, mel);
  for (double v : g.data()) ASSERT_EQ(v, 0.0);
}

TEST(LogMelBackward, FlooredChannelsPassNoGradient) {
  const Matrix mel = mel_matrix(512, 64, 16000);
  Matrix mag = testing::random_matrix(3, 257, 2, 0.0, 1.0);
  for (double& v : mag.row(1)) v = 0.0;
  const Matrix up = testing::random_matrix(3, 64, 3, -1.0, 1.0);
  const Matrix g = log_mel_backward(up, mag, mel);
  for (double v : g.row(1)) ASSERT_EQ(v, 0.0);
}

TEST(LogMelBackward, MatchesCentralDifferences) {
  const Matrix mel = mel_matrix(512, 64, 16000);
  const double h = 1e-5;
  const testing::RelErr rel;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Matrix mag = testing::random_matrix(4, 257, 100 + seed, 0.05, 1.0);
    const Matrix up = testing::random_matrix(4, 64, 200 + seed, -1.0, 1.0);
    const Matrix g = log_mel_backward(up, mag, mel);
    const double scale = testing::max_abs(g.data());
    auto objective = [&](const Matrix& m) {
      const auto f = log_mel(m, mel);
      double s = 0.0;
      for (std::size_t i = 0; i < f.values.size(); ++i) s += up.data()[i] * f.values.data()[i];
      return s;
    };
    double worst = 0.0;
    for (std::size_t i = 0; i < mag.size(); ++i) {
      const double x0 = mag.data()[i];
      mag.data()[i] = x0 + h;
      const double fp = objective(mag);
      mag.data()[i] = x0 - h;
      const double fm = objective(mag);
      mag.data()[i] = x0;
      worst = std::max(worst, rel(g.data()[i], (fp - fm) / (2.0 * h), scale));
    }
    EXPECT_LT(worst, 1e-5) << "seed " << seed;
  }
}

TEST(LogMelJvp, AdjointOfBackward) {
  const Matrix mel = mel_matrix(512, 64, 16000);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix mag = testing::random_matrix(5, 257, seed, 0.0, 1.0);
    const Matrix tangent = testing::random_matrix(5, 257, 50 + seed, -1.0, 1.0);
    const Matrix up = testing::random_matrix(5, 64, 90 + seed, -1.0, 1.0);
    const Matrix jv = log_mel_jvp(mag, mel, tangent);
    const Matrix vj = log_mel_backward(up, mag, mel);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < jv.size(); ++i) lhs += jv.data()[i] * up.data()[i];
    for (std::size_t i = 0; i < vj.size(); ++i) rhs += vj.data()[i] * tangent.data()[i];
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::max(1.0, std::abs(lhs)));
  }
}

TEST(LogMelJvp, MatchesDirectionalDifference) {
  const Matrix mel = mel_matrix(512, 64, 16000);
  const Matrix mag = testing::random_matrix(4, 257, 7, 0.05, 1.0);
  const Matrix tangent = testing::random_matrix(4, 257, 8, -1.0, 1.0);
  const double h = 1e-6;
  Matrix plus = mag, minus = mag;
  for (std::size_t i = 0; i < mag.size(); ++i) {
    plus.data()[i] += h * tangent.data()[i];
    minus.data()[i] -= h * tangent.data()[i];
  }
  const auto fp = log_mel(plus, mel);
  const auto fm = log_mel(minus, mel);
  const Matrix jv = log_mel_jvp(mag, mel, tangent);
  for (std::size_t i = 0; i < jv.size(); ++i) {
    const double fd = (fp.values.data()[i] - fm.values.data()[i]) / (2.0 * h);
    ASSERT_NEAR(jv.data()[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

}  // namespace
}  // namespace voicecloak::spectral
