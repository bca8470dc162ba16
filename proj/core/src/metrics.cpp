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

#include "voicecloak/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "voicecloak/error.hpp"

namespace voicecloak::metrics {

double snr_db(const audio::Waveform& ref, const audio::Waveform& test) {
  if (ref.sample_rate != test.sample_rate) {
    throw InvalidArgument("snr_db: sample rates differ (" + std::to_string(ref.sample_rate) + " vs " +
                          std::to_string(test.sample_rate) + ")");
  }
  const std::size_t n = std::min(ref.samples.size(), test.samples.size());
  if (n == 0) throw InvalidArgument("snr_db: empty signal");
  double signal = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = ref.samples[i] - test.samples[i];
    signal += ref.samples[i] * ref.samples[i];
    noise += d * d;
  }
  if (!(signal > 0.0)) throw InvalidArgument("snr_db: reference has zero energy");
  if (noise < 1e-300) return kInfiniteSnrDb;
  return 10.0 * std::log10(signal / noise);
}

double delta_cosd(const encoder::Embedding& e, const encoder::Embedding& e_tilde) {
  return encoder::cosine_loss(e, e_tilde);
}

// ---------------------------------------------------------------------------
// Trials

std::size_t TrialList::num_target() const {
  return static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(), [](const Trial& t) { return t.target; }));
}

std::size_t TrialList::num_nontarget() const { return trials.size() - num_target(); }

TrialList parse_trials(std::istream& in, const std::string& source) {
  TrialList tl;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string s; fields >> s;) tok.push_back(s);
    if (tok.empty()) continue;
    if (tok.size() != 3) {
      throw FormatError(source + ":" + std::to_string(line_no) + ": expected 3 fields (enroll test label), got " +
                        std::to_string(tok.size()));
    }
    std::string label = tok[2];
    std::transform(label.begin(), label.end(), label.begin(), [](unsigned char c) { return std::tolower(c); });
    if (label != "target" && label != "nontarget") {
      throw FormatError(source + ":" + std::to_string(line_no) + ": label '" + tok[2] +
                        "' is neither target nor nontarget");
    }
    tl.trials.push_back({tok[0], tok[1], label == "target"});
  }
  if (tl.trials.empty()) throw FormatError(source + ": no trials");
  return tl;
}

TrialList parse_trials(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_trials(in, path.string());
}

std::string serialize_trials(const TrialList& tl) {
  std::string out;
  for (const auto& t : tl.trials) out += t.enroll + " " + t.test + (t.target ? " target\n" : " nontarget\n");
  return out;
}

namespace {

const encoder::Embedding& lookup(const EmbeddingMap& m, const std::string& key, const char* role) {
  auto it = m.find(key);
  if (it == m.end()) throw InvalidArgument(std::string("score_trials: missing ") + role + " key '" + key + "'");
  return it->second;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ScoreSet score_trials(const TrialList& tl, const EmbeddingMap& embeddings) {
  return score_trials(tl, embeddings, embeddings);
}

ScoreSet score_trials(const TrialList& tl, const EmbeddingMap& enroll, const EmbeddingMap& test) {
  ScoreSet s;
  s.scores.reserve(tl.trials.size());
  for (const auto& t : tl.trials) {
    s.scores.push_back(encoder::cosine_similarity(lookup(enroll, t.enroll, "enroll"), lookup(test, t.test, "test")));
  }
  return s;
}

std::string format_scores(const TrialList& tl, const ScoreSet& scores) {
  if (scores.scores.size() != tl.trials.size()) throw InvalidArgument("format_scores: length mismatch");
  std::string out;
  for (std::size_t i = 0; i < tl.trials.size(); ++i) {
    const auto& t = tl.trials[i];
    out += t.enroll + " " + t.test + (t.target ? " target " : " nontarget ") + format_double(scores.scores[i]) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// EER

std::vector<OperatingPoint> operating_points(const std::vector<double>& target_scores,
                                             const std::vector<double>& nontarget_scores) {
  if (target_scores.empty() || nontarget_scores.empty()) {
    throw InvalidArgument("compute_eer: need at least one target and one nontarget score");
  }
  auto targets = target_scores;
  auto nontargets = nontarget_scores;
  for (double s : targets) {
    if (!std::isfinite(s)) throw InvalidArgument("compute_eer: non-finite target score");
  }
  for (double s : nontargets) {
    if (!std::isfinite(s)) throw InvalidArgument("compute_eer: non-finite nontarget score");
  }
  std::sort(targets.begin(), targets.end());
  std::sort(nontargets.begin(), nontargets.end());

  std::vector<double> thresholds;
  thresholds.reserve(targets.size() + nontargets.size());
  std::merge(targets.begin(), targets.end(), nontargets.begin(), nontargets.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const auto nt = static_cast<double>(targets.size());
  const auto nn = static_cast<double>(nontargets.size());
  std::vector<OperatingPoint> points;
  points.reserve(thresholds.size() + 1);
  for (double th : thresholds) {
    const auto rejected = std::lower_bound(targets.begin(), targets.end(), th) - targets.begin();
    const auto accepted = nontargets.end() - std::lower_bound(nontargets.begin(), nontargets.end(), th);
    points.push_back({th, static_cast<double>(accepted) / nn, static_cast<double>(rejected) / nt});
  }
  points.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});
  return points;
}

EerResult compute_eer(const std::vector<double>& target_scores, const std::vector<double>& nontarget_scores) {
  const auto points = operating_points(target_scores, nontarget_scores);
  // FAR - FRR is 1 at the lowest threshold and -1 past the highest.
  for (std::size_t k = 1; k < points.size(); ++k) {
    const auto& cur = points[k];
    const double d = cur.far - cur.frr;
    if (d > 0.0) continue;
    if (d == 0.0) return {cur.far, cur.threshold};
    const auto& prev = points[k - 1];
    const double d_prev = prev.far - prev.frr;
    const double t = d_prev / (d_prev - d);
    const double eer = prev.far + t * (cur.far - prev.far);
    const double threshold =
        std::isfinite(cur.threshold) ? prev.threshold + t * (cur.threshold - prev.threshold) : prev.threshold;
    return {eer, threshold};
  }
  return {points.back().far, points.back().threshold};
}

std::string EerReport::to_json() const {
  nlohmann::json j{{"eer", result.eer}, {"threshold", result.threshold}, {"n_target", n_target},
                   {"n_nontarget", n_nontarget}};
  return j.dump(2);
}

EerReport evaluate_trials(const TrialList& tl, const ScoreSet& scores) {
  if (scores.scores.size() != tl.trials.size()) {
    throw InvalidArgument("evaluate_trials: " + std::to_string(scores.scores.size()) + " scores for " +
                          std::to_string(tl.trials.size()) + " trials");
  }
  std::vector<double> targets, nontargets;
  for (std::size_t i = 0; i < tl.trials.size(); ++i) {
    (tl.trials[i].target ? targets : nontargets).push_back(scores.scores[i]);
  }
  return {compute_eer(targets, nontargets), targets.size(), nontargets.size()};
}

// ---------------------------------------------------------------------------
// Similarity matrices

SimilarityMatrix similarity_matrix(const EmbeddingMap& rows, const EmbeddingMap& cols) {
  if (rows.empty() || cols.empty()) throw InvalidArgument("similarity_matrix: empty embedding set");
  SimilarityMatrix sm;
  for (const auto& [k, _] : rows) sm.row_keys.push_back(k);
  for (const auto& [k, _] : cols) sm.col_keys.push_back(k);
  sm.values = Matrix(rows.size(), cols.size());
  std::size_t i = 0;
  for (const auto& [_, a] : rows) {
    std::size_t j = 0;
    for (const auto& [__, b] : cols) sm.values(i, j++) = encoder::cosine_similarity(a, b);
    ++i;
  }
  return sm;
}

std::string SimilarityMatrix::to_csv() const {
  auto check = [](const std::string& k) {
    if (k.find_first_of(",\n\"") != std::string::npos) {
      throw InvalidArgument("similarity CSV: key '" + k + "' contains a comma, quote or newline");
    }
  };
  std::string out = "key";
  for (const auto& k : col_keys) {
    check(k);
    out += "," + k;
  }
  out += "\n";
  for (std::size_t i = 0; i < row_keys.size(); ++i) {
    check(row_keys[i]);
    out += row_keys[i];
    for (std::size_t j = 0; j < col_keys.size(); ++j) out += "," + format_double(values(i, j));
    out += "\n";
  }
  return out;
}

SimilarityMatrix SimilarityMatrix::from_csv(const std::string& text) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    return cells;
  };
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("similarity CSV: empty input");
  auto header = split(line);
  if (header.empty() || header[0] != "key") throw FormatError("similarity CSV: header must start with 'key'");
  SimilarityMatrix sm;
  sm.col_keys.assign(header.begin() + 1, header.end());
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) {
      throw FormatError("similarity CSV line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    sm.row_keys.push_back(cells[0]);
    for (std::size_t j = 1; j < cells.size(); ++j) {
      try {
        values.push_back(std::stod(cells[j]));
      } catch (const std::exception&) {
        throw FormatError("similarity CSV line " + std::to_string(line_no) + ": bad number '" + cells[j] + "'");
      }
    }
  }
  sm.values = Matrix(sm.row_keys.size(), sm.col_keys.size());
  sm.values.data() = std::move(values);
  return sm;
}

std::string speaker_of(const std::string& key, char delimiter) { return key.substr(0, key.find(delimiter)); }

EmbeddingMap average_by_speaker(const EmbeddingMap& utterances, char delimiter) {
  std::map<std::string, std::pair<std::vector<double>, std::size_t>> sums;
  for (const auto& [key, emb] : utterances) {
    auto& [sum, count] = sums[speaker_of(key, delimiter)];
    if (sum.empty()) sum.assign(emb.dim(), 0.0);
    if (sum.size() != emb.dim()) throw InvalidArgument("average_by_speaker: inconsistent dimension at '" + key + "'");
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += emb.values[i];
    ++count;
  }
  EmbeddingMap out;
  for (auto& [spk, acc] : sums) {
    for (double& v : acc.first) v /= static_cast<double>(acc.second);
    out.emplace(spk, encoder::Embedding{std::move(acc.first)});
  }
  return out;
}

}  // namespace voicecloak::metrics
