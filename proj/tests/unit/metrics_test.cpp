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
#include <random>
#include <sstream>

#include "eer_oracle.hpp"
#include "support.hpp"
#include "voicecloak/metrics.hpp"

namespace voicecloak::metrics {
namespace {

using encoder::Embedding;

// --------------------------------------------------------------------- SNR

TEST(SnrDb, IdenticalSignalsAreInfinite) {
  audio::Waveform w{testing::random_vector(100, 1), 16000};
  EXPECT_EQ(snr_db(w, w), kInfiniteSnrDb);
}

TEST(SnrDb, AnalyticValue) {
  // Reference energy 1, error energy 1e-3.
  audio::Waveform ref{{1.0, 0.0}, 16000};
  audio::Waveform test{{1.0, std::sqrt(1e-3)}, 16000};
  EXPECT_NEAR(snr_db(ref, test), 30.0, 1e-12);
}

TEST(SnrDb, TenfoldErrorCostsTwentyDb) {
  audio::Waveform ref{testing::random_vector(500, 2), 16000};
  const auto err = testing::random_vector(500, 3, -0.01, 0.01);
  audio::Waveform a = ref, b = ref;
  for (std::size_t i = 0; i < err.size(); ++i) {
    a.samples[i] += err[i];
    b.samples[i] += 10.0 * err[i];
  }
  EXPECT_NEAR(snr_db(ref, a) - snr_db(ref, b), 20.0, 1e-9);
}

TEST(SnrDb, TrimsToCommonLength) {
  audio::Waveform ref{{1.0, 1.0, 5.0}, 16000};
  audio::Waveform test{{1.0, 1.1}, 16000};
  EXPECT_NEAR(snr_db(ref, test), 10.0 * std::log10(2.0 / 0.01), 1e-9);
}

TEST(SnrDb, Errors) {
  audio::Waveform ref{{1.0}, 16000};
  EXPECT_THROW(snr_db(ref, audio::Waveform{{1.0}, 8000}), InvalidArgument);
  EXPECT_THROW(snr_db(ref, audio::Waveform{{}, 16000}), InvalidArgument);
  EXPECT_THROW(snr_db(audio::Waveform{{0.0}, 16000}, ref), InvalidArgument);
}

// -------------------------------------------------------------- delta_cosd

TEST(DeltaCosd, ReferenceValuesAndSymmetry) {
  EXPECT_DOUBLE_EQ(delta_cosd(Embedding{{1.0, 2.0}}, Embedding{{1.0, 2.0}}), -1.0);
  EXPECT_DOUBLE_EQ(delta_cosd(Embedding{{1.0, 0.0}}, Embedding{{0.0, 2.0}}), 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto a = testing::random_embedding(9, seed);
    const auto b = testing::random_embedding(9, seed + 40);
    EXPECT_DOUBLE_EQ(delta_cosd(a, b), delta_cosd(b, a));
  }
  EXPECT_THROW(delta_cosd(Embedding{{0.0, 0.0}}, Embedding{{1.0, 0.0}}), InvalidArgument);
}

// ------------------------------------------------------------------ trials

TEST(ParseTrials, SingleTargetLine) {
  std::istringstream in("spk1 utt7 target\n");
  const auto tl = parse_trials(in, "t");
  ASSERT_EQ(tl.trials.size(), 1u);
  EXPECT_EQ(tl.trials[0], (Trial{"spk1", "utt7", true}));
  EXPECT_EQ(tl.num_target(), 1u);
  EXPECT_EQ(tl.num_nontarget(), 0u);
}

TEST(ParseTrials, TwoFieldLineNamesTheLine) {
  std::istringstream in("a b target\n\nc d\n");
  try {
    parse_trials(in, "list.txt");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("list.txt:3"), std::string::npos) << e.what();
  }
}

TEST(ParseTrials, BadLabelAndEmptyInput) {
  std::istringstream bad("a b maybe\n");
  EXPECT_THROW(parse_trials(bad, "x"), FormatError);
  std::istringstream empty("\n\n");
  EXPECT_THROW(parse_trials(empty, "x"), FormatError);
  EXPECT_THROW(parse_trials(std::filesystem::path("/nonexistent/trials")), IoError);
}

TEST(ParseTrials, LabelsAreCaseInsensitive) {
  std::istringstream in("a b TARGET\nc d NonTarget\n");
  const auto tl = parse_trials(in, "x");
  EXPECT_TRUE(tl.trials[0].target);
  EXPECT_FALSE(tl.trials[1].target);
}

TEST(ParseTrials, SerializeRoundTrip) {
  TrialList tl;
  for (int i = 0; i < 30; ++i) {
    tl.trials.push_back({"e" + std::to_string(i % 4), "t" + std::to_string(i), i % 3 == 0});
  }
  std::istringstream in(serialize_trials(tl));
  EXPECT_EQ(parse_trials(in, "rt"), tl);
}

// ----------------------------------------------------------------- scoring

TEST(ScoreTrials, CosineConventions) {
  EmbeddingMap m{{"a", Embedding{{1.0, 2.0, 3.0}}}, {"b", Embedding{{-1.0, -2.0, -3.0}}}};
  TrialList tl{{{"a", "a", true}, {"a", "b", false}}};
  const auto s = score_trials(tl, m);
  EXPECT_DOUBLE_EQ(s.scores[0], 1.0);
  EXPECT_DOUBLE_EQ(s.scores[1], -1.0);
}

TEST(ScoreTrials, InvariantToPositiveRescaling) {
  EmbeddingMap m;
  for (int i = 0; i < 5; ++i) m["k" + std::to_string(i)] = testing::random_embedding(8, i);
  TrialList tl;
  for (int i = 0; i < 5; ++i) tl.trials.push_back({"k0", "k" + std::to_string(i), i == 0});
  auto scaled = m;
  for (double& v : scaled["k3"].values) v *= 17.5;
  const auto a = score_trials(tl, m);
  const auto b = score_trials(tl, scaled);
  for (std::size_t i = 0; i < a.scores.size(); ++i) EXPECT_NEAR(a.scores[i], b.scores[i], 1e-15);
}

TEST(ScoreTrials, MissingKeyIsNamed) {
  EmbeddingMap enroll{{"a", Embedding{{1.0, 0.0}}}};
  EmbeddingMap test{{"b", Embedding{{1.0, 0.0}}}};
  TrialList tl{{{"a", "zz-missing", true}}};
  try {
    score_trials(tl, enroll, test);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("zz-missing"), std::string::npos);
  }
}

// --------------------------------------------------------------------- EER

TEST(ComputeEer, PerfectSeparation) {
  const auto r = compute_eer({0.9, 0.8}, {0.2, 0.1});
  EXPECT_EQ(r.eer, 0.0);
  EXPECT_GT(r.threshold, 0.2);
  EXPECT_LE(r.threshold, 0.8);
}

TEST(ComputeEer, InvertedPolarityExceedsHalf) {
  EXPECT_GT(compute_eer({0.1, 0.2}, {0.8, 0.9}).eer, 0.5);
}

TEST(ComputeEer, HandWorkedCrossing) {
  // Sorted: n0.1 t0.2 n0.3 t0.4. At 0.3: FAR 1/2, FRR 1/2.
  const auto r = compute_eer({0.2, 0.4}, {0.1, 0.3});
  EXPECT_DOUBLE_EQ(r.eer, 0.5);
}

TEST(ComputeEer, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(compute_eer({}, {0.1}), InvalidArgument);
  EXPECT_THROW(compute_eer({0.1}, {}), InvalidArgument);
  EXPECT_THROW(compute_eer({std::nan("")}, {0.1}), InvalidArgument);
}

TEST(ComputeEer, MatchesBruteForceOracle) {
  std::mt19937_64 rng(77);
  for (int instance = 0; instance < 200; ++instance) {
    const std::size_t nt = 1 + rng() % 25;
    const std::size_t nn = 1 + rng() % 25;
    const bool coarse = instance % 3 == 0;  // many ties
    auto draw = [&](double shift) {
      const double v = testing::uniform(rng, 0.0, 1.0) + shift;
      return coarse ? std::round(v * 5.0) / 5.0 : v;
    };
    std::vector<double> t(nt), n(nn);
    for (double& v : t) v = draw(0.3);
    for (double& v : n) v = draw(0.0);
    EXPECT_NEAR(compute_eer(t, n).eer, testing::brute_force_eer(t, n), 1e-12) << "instance " << instance;
  }
}

TEST(ComputeEer, InvariantUnderMonotoneTransforms) {
  std::mt19937_64 rng(5);
  for (int instance = 0; instance < 50; ++instance) {
    std::vector<double> t(20), n(30);
    for (double& v : t) v = testing::uniform(rng, -0.5, 1.0);
    for (double& v : n) v = testing::uniform(rng, -1.0, 0.5);
    const double base = compute_eer(t, n).eer;
    for (auto f : {+[](double x) { return std::exp(3.0 * x); }, +[](double x) { return x * x * x + x; },
                   +[](double x) { return 2.0 * x - 7.0; }}) {
      auto tt = t, nn = n;
      for (double& v : tt) v = f(v);
      for (double& v : nn) v = f(v);
      EXPECT_NEAR(compute_eer(tt, nn).eer, base, 1e-15);
    }
  }
}

TEST(OperatingPoints, EndsAtFullRejection) {
  const auto pts = operating_points({0.5, 0.7}, {0.1, 0.6});
  ASSERT_FALSE(pts.empty());
  EXPECT_EQ(pts.front().far, 1.0);
  EXPECT_EQ(pts.front().frr, 0.0);
  EXPECT_TRUE(std::isinf(pts.back().threshold));
  EXPECT_EQ(pts.back().far, 0.0);
  EXPECT_EQ(pts.back().frr, 1.0);
}

TEST(EvaluateTrials, SplitsByLabel) {
  TrialList tl{{{"a", "b", true}, {"a", "c", false}, {"a", "d", true}}};
  const auto rep = evaluate_trials(tl, ScoreSet{{0.9, 0.1, 0.8}});
  EXPECT_EQ(rep.n_target, 2u);
  EXPECT_EQ(rep.n_nontarget, 1u);
  EXPECT_EQ(rep.result.eer, 0.0);
  EXPECT_THROW(evaluate_trials(tl, ScoreSet{{0.9}}), InvalidArgument);
}

// ------------------------------------------------------ similarity matrices

TEST(SimilarityMatrix, SelfSimilarityHasUnitDiagonal) {
  EmbeddingMap m;
  for (int i = 0; i < 6; ++i) m["k" + std::to_string(i)] = testing::random_embedding(10, i);
  const auto sm = similarity_matrix(m, m);
  for (std::size_t i = 0; i < sm.row_keys.size(); ++i) {
    EXPECT_NEAR(sm.values(i, i), 1.0, 1e-15);
    for (std::size_t j = 0; j < sm.col_keys.size(); ++j) {
      EXPECT_GE(sm.values(i, j), -1.0);
      EXPECT_LE(sm.values(i, j), 1.0);
    }
  }
}

TEST(SimilarityMatrix, SpeakerLevelMatchesDirectAverage) {
  EmbeddingMap m;
  for (int s = 0; s < 3; ++s) {
    for (int u = 0; u < 4; ++u) m["spk" + std::to_string(s) + "-u" + std::to_string(u)] = testing::random_embedding(6, 10 * s + u);
  }
  const auto sm = similarity_matrix(average_by_speaker(m), average_by_speaker(m));
  ASSERT_EQ(sm.row_keys, (std::vector<std::string>{"spk0", "spk1", "spk2"}));
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      std::vector<double> ma(6, 0.0), mb(6, 0.0);
      for (int u = 0; u < 4; ++u) {
        for (int i = 0; i < 6; ++i) {
          ma[i] += testing::random_embedding(6, 10 * a + u).values[i] / 4.0;
          mb[i] += testing::random_embedding(6, 10 * b + u).values[i] / 4.0;
        }
      }
      double dot = 0.0, na = 0.0, nb = 0.0;
      for (int i = 0; i < 6; ++i) {
        dot += ma[i] * mb[i];
        na += ma[i] * ma[i];
        nb += mb[i] * mb[i];
      }
      EXPECT_NEAR(sm.values(a, b), dot / std::sqrt(na * nb), 1e-12);
    }
  }
}

TEST(SimilarityMatrix, CsvRoundTrip) {
  EmbeddingMap rows, cols;
  for (int i = 0; i < 4; ++i) rows["r" + std::to_string(i)] = testing::random_embedding(5, i);
  for (int i = 0; i < 3; ++i) cols["c" + std::to_string(i)] = testing::random_embedding(5, 50 + i);
  const auto sm = similarity_matrix(rows, cols);
  const auto back = SimilarityMatrix::from_csv(sm.to_csv());
  EXPECT_EQ(back.row_keys, sm.row_keys);
  EXPECT_EQ(back.col_keys, sm.col_keys);
  ASSERT_TRUE(back.values.same_shape(sm.values));
  for (std::size_t i = 0; i < sm.values.size(); ++i) EXPECT_NEAR(back.values.data()[i], sm.values.data()[i], 1e-9);
}

TEST(SimilarityMatrix, CsvErrors) {
  EXPECT_THROW(SimilarityMatrix::from_csv(""), FormatError);
  EXPECT_THROW(SimilarityMatrix::from_csv("row,a\nx,1\n"), FormatError);
  EXPECT_THROW(SimilarityMatrix::from_csv("key,a,b\nx,1\n"), FormatError);
  EXPECT_THROW(SimilarityMatrix::from_csv("key,a\nx,abc\n"), FormatError);
  SimilarityMatrix bad;
  bad.row_keys = {"a,b"};
  bad.col_keys = {"c"};
  bad.values = Matrix(1, 1, 0.5);
  EXPECT_THROW(bad.to_csv(), InvalidArgument);
}

TEST(SpeakerOf, PrefixBeforeFirstDelimiter) {
  EXPECT_EQ(speaker_of("spk03-utt01"), "spk03");
  EXPECT_EQ(speaker_of("a-b-c"), "a");
  EXPECT_EQ(speaker_of("plain"), "plain");
}

}  // namespace
}  // namespace voicecloak::metrics
