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

#ifndef VOICECLOAK_METRICS_HPP_
#define VOICECLOAK_METRICS_HPP_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "voicecloak/audio_io.hpp"
#include "voicecloak/encoder.hpp"
#include "voicecloak/matrix.hpp"

namespace voicecloak::metrics {

// Returned by snr_db when the two signals are identical.
inline constexpr double kInfiniteSnrDb = std::numeric_limits<double>::infinity();

// 10 log10(sum ref^2 / sum (ref - test)^2) over the common length.
double snr_db(const audio::Waveform& ref, const audio::Waveform& test);

// Negative cosine similarity in [-1, 1]; -1 means identical direction.
double delta_cosd(const encoder::Embedding& e, const encoder::Embedding& e_tilde);

struct Trial {
  std::string enroll;
  std::string test;
  bool target = false;

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct TrialList {
  std::vector<Trial> trials;

  std::size_t num_target() const;
  std::size_t num_nontarget() const;
  friend bool operator==(const TrialList&, const TrialList&) = default;
};

// One trial per line: "<enroll> <test> <target|nontarget>". Blank lines
// are skipped. `source` names the input in error messages.
TrialList parse_trials(std::istream& in, const std::string& source);
TrialList parse_trials(const std::filesystem::path& path);
std::string serialize_trials(const TrialList& tl);

// Per-trial cosine similarity (higher = same speaker), aligned with the
// trial order.
struct ScoreSet {
  std::vector<double> scores;
};

using EmbeddingMap = std::map<std::string, encoder::Embedding>;

ScoreSet score_trials(const TrialList& tl, const EmbeddingMap& embeddings);
ScoreSet score_trials(const TrialList& tl, const EmbeddingMap& enroll, const EmbeddingMap& test);

// Trial lines with the score appended.
std::string format_scores(const TrialList& tl, const ScoreSet& scores);

struct EerResult {
  double eer = 0.0;        // fraction; values above 0.5 indicate inverted polarity
  double threshold = 0.0;  // score at the FAR/FRR crossing
};

// FAR(t) = fraction of nontargets >= t, FRR(t) = fraction of targets < t,
// evaluated at every distinct score plus one point above the maximum.
// The EER is linearly interpolated between the two operating points where
// FAR - FRR changes sign.
EerResult compute_eer(const std::vector<double>& target_scores,
                      const std::vector<double>& nontarget_scores);

struct OperatingPoint {
  double threshold;
  double far;
  double frr;
};

// Operating points used by compute_eer, in increasing threshold order. The
// final point (threshold = +inf) accepts nothing.
std::vector<OperatingPoint> operating_points(const std::vector<double>& target_scores,
                                             const std::vector<double>& nontarget_scores);

struct EerReport {
  EerResult result;
  std::size_t n_target = 0;
  std::size_t n_nontarget = 0;

  std::string to_json() const;
};

EerReport evaluate_trials(const TrialList& tl, const ScoreSet& scores);

struct SimilarityMatrix {
  std::vector<std::string> row_keys;
  std::vector<std::string> col_keys;
  Matrix values;

  std::string to_csv() const;
  static SimilarityMatrix from_csv(const std::string& text);
};

SimilarityMatrix similarity_matrix(const EmbeddingMap& rows, const EmbeddingMap& cols);

// Speaker key of an utterance key: the text before the first delimiter
// (the whole key when there is none).
std::string speaker_of(const std::string& key, char delimiter = '-');

// Averages utterance embeddings per speaker key.
EmbeddingMap average_by_speaker(const EmbeddingMap& utterances, char delimiter = '-');

}  // namespace voicecloak::metrics

#endif  // VOICECLOAK_METRICS_HPP_
