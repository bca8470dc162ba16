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


#include <benchmark/benchmark.h>

#include <vector>

#include "voicecloak/attack.hpp"
#include "voicecloak/synthetic.hpp"

namespace {

namespace vc = voicecloak;

const vc::encoder::WeightStore& weights() {
  static const auto ws = vc::synthetic::calibrated_random_encoder(vc::encoder::EncoderConfig{}, 42);
  return ws;
}

vc::audio::Waveform utterance(double seconds) { return vc::synthetic::corpus_utterance(0, 0, 0, seconds); }

void BM_Stft(benchmark::State& state) {
  const auto w = utterance(static_cast<double>(state.range(0)));
  const vc::spectral::StftConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(vc::spectral::stft(w, cfg));
}
BENCHMARK(BM_Stft)->Arg(1)->Arg(3)->Unit(benchmark::kMillisecond);

void BM_Istft(benchmark::State& state) {
  const auto w = utterance(3.0);
  const vc::spectral::StftConfig cfg;
  const auto s = vc::spectral::stft(w, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(vc::spectral::istft(s.magnitude, s.phase, cfg, w.samples.size()));
}
BENCHMARK(BM_Istft)->Unit(benchmark::kMillisecond);

void BM_LogMel(benchmark::State& state) {
  const auto s = vc::spectral::stft(utterance(3.0), {});
  const auto mel = vc::spectral::mel_matrix(512, 64, 16000);
  for (auto _ : state) benchmark::DoNotOptimize(vc::spectral::log_mel(s.magnitude, mel));
}
BENCHMARK(BM_LogMel)->Unit(benchmark::kMillisecond);

void BM_EncoderForward(benchmark::State& state) {
  const auto s = vc::spectral::stft(utterance(3.0), {});
  const auto feat = vc::spectral::log_mel(s.magnitude, vc::spectral::mel_matrix(512, 64, 16000));
  const auto& ws = weights();
  for (auto _ : state) benchmark::DoNotOptimize(vc::encoder::forward(feat, ws));
}
BENCHMARK(BM_EncoderForward)->Unit(benchmark::kMillisecond);

void BM_EncoderBackward(benchmark::State& state) {
  const auto s = vc::spectral::stft(utterance(3.0), {});
  const auto feat = vc::spectral::log_mel(s.magnitude, vc::spectral::mel_matrix(512, 64, 16000));
  const auto r = vc::encoder::forward(feat, weights());
  const std::vector<double> u(r.embedding.dim(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(vc::encoder::backward(r.cache, u));
}
BENCHMARK(BM_EncoderBackward)->Unit(benchmark::kMillisecond);

void BM_Ifgsm(benchmark::State& state) {
  const auto w = utterance(3.0);
  vc::attack::ProtectOptions po;
  po.attack.iterations = static_cast<int>(state.range(0));
  const auto& ws = weights();
  for (auto _ : state) {
    benchmark::DoNotOptimize(vc::attack::protect_utterance(w, ws, vc::attack::Method::kIfgsm, po));
  }
}
BENCHMARK(BM_Ifgsm)->Arg(1)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
