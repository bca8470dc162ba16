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


// Shared helpers for the unit and acceptance tests.

#ifndef VOICECLOAK_TESTS_SUPPORT_HPP_
#define VOICECLOAK_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "voicecloak/encoder.hpp"
#include "voicecloak/matrix.hpp"

namespace voicecloak::testing {

// Uniform draws built directly on mt19937_64 output, so fixtures (and the
// golden values derived from them) do not depend on the standard library.
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = uniform(rng, lo, hi);
  return v;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo, double hi) {
  Matrix m(rows, cols);
  m.data() = random_vector(rows * cols, seed, lo, hi);
  return m;
}

inline encoder::Embedding random_embedding(std::size_t n, std::uint64_t seed) {
  return {random_vector(n, seed)};
}

// Relative error between an analytic and a numeric derivative. Entries far
// below the gradient's overall scale are compared against that scale.
struct RelErr {
  double floor_fraction = 1e-3;

  double operator()(double analytic, double numeric, double scale) const {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor_fraction * scale});
    return denom == 0.0 ? 0.0 : std::abs(analytic - numeric) / denom;
  }
};

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// ReLU activation pattern of a forward pass.
inline std::vector<bool> relu_pattern(const encoder::ForwardCache& cache) {
  std::vector<bool> p;
  for (const auto& fm : cache.pre_activations) {
    for (double v : fm.values) p.push_back(v > 0.0);
  }
  return p;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("voicecloak-" + tag + "-" + std::to_string((static_cast<std::uint64_t>(rd()) << 32) | rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace voicecloak::testing

#endif  // VOICECLOAK_TESTS_SUPPORT_HPP_
