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


// voicecloak: batch speaker protection and evaluation.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "voicecloak/cli/commands.hpp"

namespace fs = std::filesystem;
namespace vc = voicecloak;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("voicecloak");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("VOICECLOAK_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("VOICECLOAK_LOG='{}' is not a level (trace, debug, info, warn, error, critical, off)", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

int batch_exit(const vc::cli::BatchResult& r) {
  if (r.ok()) return kExitOk;
  spdlog::error("{} of {} inputs failed", r.failures.size(), r.failures.size() + r.processed);
  return kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();

  CLI::App app{"Adversarial speaker protection for speech recordings"};
  app.set_version_flag("--version", vc::cli::tool_version());
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  unsigned jobs = vc::cli::default_jobs();
  app.add_option("--seed", seed, "Global seed")->capture_default_str();
  app.add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  // init-encoder
  vc::cli::InitEncoderOptions init;
  bool no_calibrate = false;
  auto* init_cmd = app.add_subcommand("init-encoder", "Write a seeded random encoder weight file");
  init_cmd->add_option("--config", init.config, "Encoder config JSON")->required()->check(CLI::ExistingFile);
  init_cmd->add_option("--out", init.out, "Weight file to write")->required();
  init_cmd->add_flag("--no-calibrate", no_calibrate, "Skip embedding centering on the synthetic calibration corpus");

  // protect
  vc::cli::ProtectCommandOptions protect;
  std::vector<std::string> protect_in;
  std::string method = "ifgsm";
  auto* protect_cmd = app.add_subcommand("protect", "Perturb recordings against the encoder");
  protect_cmd->add_option("--in", protect_in, "Input WAV files or directories")->required();
  protect_cmd->add_option("--weights", protect.weights, "Encoder weight file")->required()->check(CLI::ExistingFile);
  protect_cmd->add_option("--method", method, "fgsm, ifgsm or gaussian")
      ->check(CLI::IsMember({"fgsm", "ifgsm", "gaussian"}))
      ->capture_default_str();
  protect_cmd->add_option("--epsilon", protect.attack.epsilon, "L-infinity budget on the magnitude")
      ->capture_default_str();
  protect_cmd->add_option("--alpha", protect.attack.alpha, "I-FGSM step size")->capture_default_str();
  protect_cmd->add_option("--iterations", protect.attack.iterations, "I-FGSM iterations")->capture_default_str();
  protect_cmd->add_option("--target-snr", protect.target_snr_db, "Gaussian baseline SNR in dB")
      ->capture_default_str();
  protect_cmd
      ->add_option("--escape-iterations", protect.attack.escape.power_iterations,
                   "Power iterations for the first step away from the clean input")
      ->capture_default_str();
  protect_cmd->add_option("--out", protect.out_dir, "Output directory")->required();

  // embed
  vc::cli::EmbedOptions embed;
  std::vector<std::string> embed_in;
  auto* embed_cmd = app.add_subcommand("embed", "Extract speaker embeddings into an archive");
  embed_cmd->add_option("--in", embed_in, "Input WAV files or directories")->required();
  embed_cmd->add_option("--weights", embed.weights, "Encoder weight file")->required()->check(CLI::ExistingFile);
  embed_cmd->add_option("--out", embed.out, "Embedding archive to write")->required();

  // eval
  vc::cli::EvalOptions eval;
  std::string eval_test;
  auto* eval_cmd = app.add_subcommand("eval", "Score a trial list and compute the EER");
  eval_cmd->add_option("--trials", eval.trials, "Trial list")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--enroll", eval.enroll, "Enrollment embedding archive")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--test", eval_test, "Test embedding archive (default: the enrollment archive)")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval.out_dir, "Output directory")->required();

  // simmat
  vc::cli::SimmatOptions simmat;
  std::string simmat_cols;
  auto* simmat_cmd = app.add_subcommand("simmat", "Cosine similarity matrix between two archives");
  simmat_cmd->add_option("--rows", simmat.rows, "Row embedding archive")->required()->check(CLI::ExistingFile);
  simmat_cmd->add_option("--cols", simmat_cols, "Column embedding archive (default: rows)")
      ->check(CLI::ExistingFile);
  simmat_cmd->add_flag("--speaker-level", simmat.speaker_level, "Average embeddings per speaker key prefix first");
  simmat_cmd->add_option("--out", simmat.out, "CSV to write")->required();

  // synth
  vc::cli::SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a seeded synthetic speaker corpus and trial list");
  synth_cmd->add_option("--speakers", synth.speakers)->capture_default_str();
  synth_cmd->add_option("--utterances", synth.utterances, "Utterances per speaker")->capture_default_str();
  synth_cmd->add_option("--seconds", synth.seconds)->capture_default_str();
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();

  // rerun
  std::string manifest_path;
  std::string rerun_out;
  auto* rerun_cmd = app.add_subcommand("rerun", "Replay a run manifest");
  rerun_cmd->add_option("--manifest", manifest_path)->required()->check(CLI::ExistingFile);
  rerun_cmd->add_option("--out", rerun_out, "Write outputs here instead of the recorded location");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*init_cmd) {
      init.seed = seed;
      init.calibrate = !no_calibrate;
      vc::cli::cmd_init_encoder(init);
      return kExitOk;
    }
    if (*protect_cmd) {
      protect.inputs.assign(protect_in.begin(), protect_in.end());
      protect.method = vc::attack::parse_method(method);
      protect.seed = seed;
      protect.jobs = jobs;
      return batch_exit(vc::cli::cmd_protect(protect));
    }
    if (*embed_cmd) {
      embed.inputs.assign(embed_in.begin(), embed_in.end());
      embed.seed = seed;
      embed.jobs = jobs;
      return batch_exit(vc::cli::cmd_embed(embed));
    }
    if (*eval_cmd) {
      if (!eval_test.empty()) eval.test = fs::path(eval_test);
      eval.seed = seed;
      vc::cli::cmd_eval(eval);
      return kExitOk;
    }
    if (*simmat_cmd) {
      if (!simmat_cols.empty()) simmat.cols = fs::path(simmat_cols);
      simmat.seed = seed;
      vc::cli::cmd_simmat(simmat);
      return kExitOk;
    }
    if (*synth_cmd) {
      synth.seed = seed;
      return batch_exit(vc::cli::cmd_synth(synth));
    }
    if (*rerun_cmd) {
      const auto m = vc::cli::RunManifest::load(manifest_path);
      std::optional<fs::path> out;
      if (!rerun_out.empty()) out = fs::path(rerun_out);
      return batch_exit(vc::cli::rerun(m, out, jobs));
    }
  } catch (const vc::cli::UsageError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return kExitUsage;
}
