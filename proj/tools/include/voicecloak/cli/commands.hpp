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


// Batch commands behind the voicecloak tool. Each command writes its
// outputs plus a RunManifest; rerun() replays a manifest.

#ifndef VOICECLOAK_CLI_COMMANDS_HPP_
#define VOICECLOAK_CLI_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "voicecloak/attack.hpp"
#include "voicecloak/error.hpp"
#include "voicecloak/metrics.hpp"

namespace voicecloak::cli {

namespace fs = std::filesystem;

// Maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

const char* tool_version();

std::uint64_t fnv1a64(const std::string& bytes);
std::uint64_t file_digest(const fs::path& path);
// Per-utterance seed from the global seed and the file stem.
std::uint64_t derive_seed(std::uint64_t global_seed, const std::string& stem);

// Expands files and directories (non-recursive, *.wav, sorted). Duplicate
// stems are an error.
std::vector<fs::path> collect_wavs(const std::vector<fs::path>& inputs);

unsigned default_jobs();

struct RunManifest {
  std::string command;
  std::string config;  // JSON object text
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string tool_version;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
  void save(const fs::path& path) const;
  static RunManifest load(const fs::path& path);
};

// Where a command's manifest lands.
fs::path manifest_path_for_file(const fs::path& out_file);
fs::path manifest_path_for_dir(const fs::path& out_dir);

struct BatchResult {
  std::size_t processed = 0;
  std::vector<std::string> failures;  // "<input>: <message>"
  bool ok() const { return failures.empty(); }
};

struct InitEncoderOptions {
  fs::path config;
  std::uint64_t seed = 42;
  fs::path out;
  bool calibrate = true;
};
RunManifest cmd_init_encoder(const InitEncoderOptions& o);

struct ProtectCommandOptions {
  std::vector<fs::path> inputs;
  fs::path weights;
  attack::Method method = attack::Method::kIfgsm;
  attack::AttackConfig attack;
  double target_snr_db = audio::kDefaultNoiseSnrDb;
  std::uint64_t seed = 0;
  fs::path out_dir;
  unsigned jobs = 1;
};
BatchResult cmd_protect(const ProtectCommandOptions& o, RunManifest* manifest = nullptr);

// STFT, log-mel and encoder forward on a 16 kHz waveform.
encoder::Embedding embed_waveform(const audio::Waveform& w, const encoder::WeightStore& ws);

struct EmbedOptions {
  std::vector<fs::path> inputs;
  fs::path weights;
  fs::path out;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};
BatchResult cmd_embed(const EmbedOptions& o, RunManifest* manifest = nullptr);

struct EvalOptions {
  fs::path trials;
  fs::path enroll;
  std::optional<fs::path> test;  // defaults to the enroll archive
  fs::path out_dir;
  std::uint64_t seed = 0;
};
metrics::EerReport cmd_eval(const EvalOptions& o, RunManifest* manifest = nullptr);

struct SimmatOptions {
  fs::path rows;
  std::optional<fs::path> cols;
  bool speaker_level = false;
  fs::path out;
  std::uint64_t seed = 0;
};
metrics::SimilarityMatrix cmd_simmat(const SimmatOptions& o, RunManifest* manifest = nullptr);

// Seeded synthetic corpus: <out>/spkNN-uttMM.wav plus trials.txt.
struct SynthOptions {
  std::size_t speakers = 10;
  std::size_t utterances = 5;
  double seconds = 2.0;
  std::uint64_t seed = 0;
  fs::path out_dir;
};
BatchResult cmd_synth(const SynthOptions& o, RunManifest* manifest = nullptr);

// Replays a manifest. With out_override the outputs go elsewhere.
BatchResult rerun(const RunManifest& m, const std::optional<fs::path>& out_override, unsigned jobs);

}  // namespace voicecloak::cli

#endif  // VOICECLOAK_CLI_COMMANDS_HPP_
