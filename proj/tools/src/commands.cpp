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


#include "voicecloak/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "voicecloak/synthetic.hpp"

#ifndef VOICECLOAK_VERSION
#define VOICECLOAK_VERSION "unknown"
#endif

namespace voicecloak::cli {

using nlohmann::json;

const char* tool_version() { return VOICECLOAK_VERSION; }

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

audio::Waveform to_canonical(audio::Waveform w, const fs::path& path) {
  if (w.sample_rate != audio::kCanonicalSampleRate) {
    spdlog::debug("{}: resampling {} Hz -> {} Hz", path.string(), w.sample_rate, audio::kCanonicalSampleRate);
    w = audio::resample_linear(w, audio::kCanonicalSampleRate);
  }
  return w;
}

audio::Waveform load_canonical(const fs::path& path) { return to_canonical(audio::read_wav(path), path); }

json stft_json(const spectral::StftConfig& c) {
  return {{"fft_size", c.fft_size}, {"win_length", c.win_length}, {"hop_length", c.hop_length}};
}

std::vector<std::string> path_strings(const std::vector<fs::path>& paths) {
  std::vector<std::string> out;
  out.reserve(paths.size());
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

std::vector<fs::path> to_paths(const std::vector<std::string>& strings) {
  return {strings.begin(), strings.end()};
}

void record_failure(BatchResult& r, std::mutex& mu, const fs::path& input, const std::exception& e) {
  spdlog::error("{}: {}", input.string(), e.what());
  std::lock_guard lock(mu);
  r.failures.push_back(input.string() + ": " + e.what());
}

void finish_batch(BatchResult& r) { std::sort(r.failures.begin(), r.failures.end()); }

}  // namespace

std::uint64_t file_digest(const fs::path& path) { return fnv1a64(read_file(path)); }

std::uint64_t derive_seed(std::uint64_t global_seed, const std::string& stem) {
  return splitmix64(global_seed ^ fnv1a64(stem));
}

std::vector<fs::path> collect_wavs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(in)) {
        if (entry.is_regular_file() && entry.path().extension() == ".wav") found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(in)) {
      files.push_back(in);
    } else {
      throw UsageError("input not found: " + in.string());
    }
  }
  std::map<std::string, fs::path> stems;
  for (const auto& f : files) {
    auto [it, inserted] = stems.emplace(f.stem().string(), f);
    if (!inserted) {
      throw UsageError("duplicate file stem '" + f.stem().string() + "': " + it->second.string() + " and " +
                       f.string());
    }
  }
  if (files.empty()) throw UsageError("no .wav inputs found");
  return files;
}

unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------- manifest

std::string RunManifest::to_json() const {
  json j;
  j["command"] = command;
  j["config"] = json::parse(config.empty() ? "{}" : config);
  j["seed"] = seed;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["tool_version"] = tool_version;
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: not valid JSON: ") + e.what());
  }
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config").dump();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.inputs = j.at("inputs").get<std::vector<std::string>>();
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    m.tool_version = j.value("tool_version", "");
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

void RunManifest::save(const fs::path& path) const { write_file(path, to_json()); }

RunManifest RunManifest::load(const fs::path& path) { return from_json(read_file(path)); }

fs::path manifest_path_for_file(const fs::path& out_file) {
  return fs::path(out_file.string() + ".manifest.json");
}

fs::path manifest_path_for_dir(const fs::path& out_dir) { return out_dir / "manifest.json"; }

// ------------------------------------------------------------ init-encoder

namespace {

RunManifest init_encoder_impl(const encoder::EncoderConfig& cfg, std::uint64_t seed, bool calibrate,
                              const fs::path& out) {
  const auto ws = calibrate ? synthetic::calibrated_random_encoder(cfg, seed) : encoder::init_random(cfg, seed);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  encoder::save_weights(ws, out);
  spdlog::info("wrote {} ({} tensors)", out.string(), ws.tensors().size());

  RunManifest m;
  m.command = "init-encoder";
  m.config = json{{"encoder", json::parse(cfg.to_json())}, {"calibrate", calibrate}}.dump();
  m.seed = seed;
  m.outputs = {out.string()};
  m.tool_version = tool_version();
  m.save(manifest_path_for_file(out));
  return m;
}

}  // namespace

RunManifest cmd_init_encoder(const InitEncoderOptions& o) {
  if (!fs::is_regular_file(o.config)) throw UsageError("encoder config not found: " + o.config.string());
  if (o.out.empty()) throw UsageError("init-encoder: --out is required");
  const auto cfg = encoder::EncoderConfig::from_json(read_file(o.config));
  auto m = init_encoder_impl(cfg, o.seed, o.calibrate, o.out);
  m.inputs = {o.config.string()};
  m.save(manifest_path_for_file(o.out));
  return m;
}

// ----------------------------------------------------------------- protect

namespace {

BatchResult protect_files(const std::vector<fs::path>& files, const ProtectCommandOptions& o,
                          const encoder::WeightStore& ws, std::vector<std::string>* outputs) {
  BatchResult result;
  std::mutex mu;
  std::vector<std::vector<std::string>> produced(files.size());
  parallel_for(files.size(), o.jobs, [&](std::size_t i) {
    const auto& in = files[i];
    try {
      const std::string stem = in.stem().string();
      const std::uint64_t seed = derive_seed(o.seed, stem);
      const auto raw = audio::read_wav(in);
      const auto w = to_canonical(raw, in);
      attack::ProtectOptions po;
      po.attack = o.attack;
      po.attack.escape.seed = seed;
      po.target_snr_db = o.target_snr_db;
      po.seed = seed;
      po.quantize_output = true;
      const auto p = attack::protect_utterance(w, ws, o.method, po);

      const fs::path wav_out = o.out_dir / (stem + ".wav");
      const fs::path report_out = o.out_dir / (stem + ".json");
      audio::write_wav(wav_out, p.waveform);
      json report = json::parse(p.report.to_json());
      report["input"] = in.string();
      report["input_sample_rate"] = raw.sample_rate;
      report["seed"] = seed;
      write_file(report_out, report.dump(2) + "\n");
      spdlog::info("{}: {} snr {:.2f} dB delta_cosd {:.4f}", stem, attack::to_string(o.method), p.report.snr_db,
                   p.report.delta_cosd);
      produced[i] = {wav_out.string(), report_out.string()};
      std::lock_guard lock(mu);
      ++result.processed;
    } catch (const std::exception& e) {
      record_failure(result, mu, in, e);
    }
  });
  if (outputs) {
    for (auto& p : produced) outputs->insert(outputs->end(), p.begin(), p.end());
  }
  finish_batch(result);
  return result;
}

json protect_config(const ProtectCommandOptions& o, const encoder::WeightStore& ws) {
  return {{"method", attack::to_string(o.method)},
          {"epsilon", o.attack.epsilon},
          {"alpha", o.attack.alpha},
          {"iterations", o.attack.iterations},
          {"clamp_nonnegative", o.attack.clamp_nonnegative},
          {"escape_power_iterations", o.attack.escape.power_iterations},
          {"target_snr_db", o.target_snr_db},
          {"stft", stft_json(spectral::StftConfig{})},
          {"encoder", json::parse(ws.config().to_json())},
          {"weights", o.weights.string()},
          {"weights_fnv1a64", hex64(file_digest(o.weights))},
          {"out_dir", o.out_dir.string()}};
}

}  // namespace

BatchResult cmd_protect(const ProtectCommandOptions& o, RunManifest* manifest) {
  if (o.out_dir.empty()) throw UsageError("protect: --out is required");
  if (o.method != attack::Method::kGaussian) {
    try {
      o.attack.validate();
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }
  const auto files = collect_wavs(o.inputs);
  const auto ws = encoder::load_weights(o.weights);
  fs::create_directories(o.out_dir);

  RunManifest m;
  m.command = "protect";
  m.config = protect_config(o, ws).dump();
  m.seed = o.seed;
  m.inputs = path_strings(files);
  m.tool_version = tool_version();
  auto result = protect_files(files, o, ws, &m.outputs);
  m.save(manifest_path_for_dir(o.out_dir));
  if (manifest) *manifest = m;
  return result;
}

// ------------------------------------------------------------------- embed

encoder::Embedding embed_waveform(const audio::Waveform& w, const encoder::WeightStore& ws) {
  const auto spec = spectral::stft(w);
  const Matrix mel = spectral::mel_matrix(spec.config.fft_size, ws.config().n_mels, audio::kCanonicalSampleRate);
  return encoder::forward(spectral::log_mel(spec.magnitude, mel), ws).embedding;
}

BatchResult cmd_embed(const EmbedOptions& o, RunManifest* manifest) {
  if (o.out.empty()) throw UsageError("embed: --out is required");
  const auto files = collect_wavs(o.inputs);
  const auto ws = encoder::load_weights(o.weights);

  BatchResult result;
  std::mutex mu;
  std::vector<std::optional<encoder::Embedding>> embs(files.size());
  parallel_for(files.size(), o.jobs, [&](std::size_t i) {
    try {
      embs[i] = embed_waveform(load_canonical(files[i]), ws);
      std::lock_guard lock(mu);
      ++result.processed;
    } catch (const std::exception& e) {
      record_failure(result, mu, files[i], e);
    }
  });
  std::map<std::string, encoder::Embedding> archive;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (embs[i]) archive.emplace(files[i].stem().string(), *embs[i]);
  }
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  encoder::save_embeddings(archive, o.out);
  spdlog::info("wrote {} embeddings to {}", archive.size(), o.out.string());

  RunManifest m;
  m.command = "embed";
  m.config = json{{"stft", stft_json(spectral::StftConfig{})},
                  {"encoder", json::parse(ws.config().to_json())},
                  {"weights", o.weights.string()},
                  {"weights_fnv1a64", hex64(file_digest(o.weights))}}
                 .dump();
  m.seed = o.seed;
  m.inputs = path_strings(files);
  m.outputs = {o.out.string()};
  m.tool_version = tool_version();
  m.save(manifest_path_for_file(o.out));
  if (manifest) *manifest = m;
  finish_batch(result);
  return result;
}

// -------------------------------------------------------------------- eval

metrics::EerReport cmd_eval(const EvalOptions& o, RunManifest* manifest) {
  if (o.out_dir.empty()) throw UsageError("eval: --out is required");
  const auto trials = metrics::parse_trials(o.trials);
  const auto enroll = encoder::load_embeddings(o.enroll);
  const auto test = o.test ? encoder::load_embeddings(*o.test) : enroll;
  const auto scores = metrics::score_trials(trials, enroll, test);
  const auto report = metrics::evaluate_trials(trials, scores);

  fs::create_directories(o.out_dir);
  const fs::path scores_out = o.out_dir / "scores.txt";
  const fs::path eer_out = o.out_dir / "eer.json";
  write_file(scores_out, metrics::format_scores(trials, scores));
  write_file(eer_out, report.to_json());
  spdlog::info("EER {:.4f}% over {} target / {} nontarget trials", 100.0 * report.result.eer, report.n_target,
               report.n_nontarget);

  RunManifest m;
  m.command = "eval";
  m.config = json{{"out_dir", o.out_dir.string()}}.dump();
  m.seed = o.seed;
  m.inputs = {o.trials.string(), o.enroll.string()};
  if (o.test) m.inputs.push_back(o.test->string());
  m.outputs = {scores_out.string(), eer_out.string()};
  m.tool_version = tool_version();
  m.save(manifest_path_for_dir(o.out_dir));
  if (manifest) *manifest = m;
  return report;
}

// ------------------------------------------------------------------ simmat

metrics::SimilarityMatrix cmd_simmat(const SimmatOptions& o, RunManifest* manifest) {
  if (o.out.empty()) throw UsageError("simmat: --out is required");
  auto rows = encoder::load_embeddings(o.rows);
  auto cols = o.cols ? encoder::load_embeddings(*o.cols) : rows;
  if (o.speaker_level) {
    rows = metrics::average_by_speaker(rows);
    cols = metrics::average_by_speaker(cols);
  }
  const auto sm = metrics::similarity_matrix(rows, cols);
  write_file(o.out, sm.to_csv());
  spdlog::info("wrote {}x{} similarity matrix to {}", sm.row_keys.size(), sm.col_keys.size(), o.out.string());

  RunManifest m;
  m.command = "simmat";
  m.config = json{{"speaker_level", o.speaker_level}}.dump();
  m.seed = o.seed;
  m.inputs = {o.rows.string()};
  if (o.cols) m.inputs.push_back(o.cols->string());
  m.outputs = {o.out.string()};
  m.tool_version = tool_version();
  m.save(manifest_path_for_file(o.out));
  if (manifest) *manifest = m;
  return sm;
}

// ------------------------------------------------------------------- synth

BatchResult cmd_synth(const SynthOptions& o, RunManifest* manifest) {
  if (o.out_dir.empty()) throw UsageError("synth: --out is required");
  if (!(o.seconds > 0.0)) throw UsageError("synth: --seconds must be positive");
  const auto trials = [&] {
    try {
      return synthetic::balanced_trials(o.speakers, o.utterances, o.seed);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
  }();
  fs::create_directories(o.out_dir);

  BatchResult result;
  RunManifest m;
  for (std::size_t s = 0; s < o.speakers; ++s) {
    for (std::size_t u = 0; u < o.utterances; ++u) {
      const fs::path out = o.out_dir / (synthetic::utterance_key(s, u) + ".wav");
      audio::write_wav(out, synthetic::corpus_utterance(o.seed, s, u, o.seconds));
      m.outputs.push_back(out.string());
      ++result.processed;
    }
  }
  const fs::path trials_out = o.out_dir / "trials.txt";
  write_file(trials_out, metrics::serialize_trials(trials));
  m.outputs.push_back(trials_out.string());
  spdlog::info("wrote {} utterances and {} trials to {}", result.processed, trials.trials.size(),
               o.out_dir.string());

  m.command = "synth";
  m.config = json{{"speakers", o.speakers},
                  {"utterances", o.utterances},
                  {"seconds", o.seconds},
                  {"out_dir", o.out_dir.string()}}
                 .dump();
  m.seed = o.seed;
  m.tool_version = tool_version();
  m.save(manifest_path_for_dir(o.out_dir));
  if (manifest) *manifest = m;
  return result;
}

// ------------------------------------------------------------------- rerun

BatchResult rerun(const RunManifest& m, const std::optional<fs::path>& out_override, unsigned jobs) {
  json cfg;
  try {
    cfg = json::parse(m.config);
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest config: ") + e.what());
  }
  auto file_out = [&]() -> fs::path {
    if (out_override) return *out_override;
    if (m.outputs.empty()) throw FormatError("manifest lists no outputs");
    return m.outputs.front();
  };
  auto dir_out = [&]() -> fs::path {
    return out_override ? *out_override : fs::path(cfg.at("out_dir").get<std::string>());
  };

  try {
    if (m.command == "init-encoder") {
      const auto ec = encoder::EncoderConfig::from_json(cfg.at("encoder").dump());
      auto replay = init_encoder_impl(ec, m.seed, cfg.at("calibrate").get<bool>(), file_out());
      replay.inputs = m.inputs;
      replay.save(manifest_path_for_file(file_out()));
      return {1, {}};
    }
    if (m.command == "protect") {
      ProtectCommandOptions o;
      o.inputs = to_paths(m.inputs);
      o.weights = cfg.at("weights").get<std::string>();
      const auto digest = hex64(file_digest(o.weights));
      if (digest != cfg.at("weights_fnv1a64").get<std::string>()) {
        throw Error("weights file " + o.weights.string() + " changed since the manifest was written");
      }
      const auto stft = cfg.at("stft");
      if (stft.at("fft_size").get<std::size_t>() != spectral::StftConfig{}.fft_size ||
          stft.at("win_length").get<std::size_t>() != spectral::StftConfig{}.win_length ||
          stft.at("hop_length").get<std::size_t>() != spectral::StftConfig{}.hop_length) {
        throw FormatError("manifest STFT configuration differs from this build");
      }
      o.method = attack::parse_method(cfg.at("method").get<std::string>());
      o.attack.epsilon = cfg.at("epsilon").get<double>();
      o.attack.alpha = cfg.at("alpha").get<double>();
      o.attack.iterations = cfg.at("iterations").get<int>();
      o.attack.clamp_nonnegative = cfg.at("clamp_nonnegative").get<bool>();
      o.attack.escape.power_iterations = cfg.at("escape_power_iterations").get<int>();
      o.target_snr_db = cfg.at("target_snr_db").get<double>();
      o.seed = m.seed;
      o.out_dir = dir_out();
      o.jobs = jobs;
      return cmd_protect(o);
    }
    if (m.command == "embed") {
      EmbedOptions o;
      o.inputs = to_paths(m.inputs);
      o.weights = cfg.at("weights").get<std::string>();
      o.out = file_out();
      o.seed = m.seed;
      o.jobs = jobs;
      return cmd_embed(o);
    }
    if (m.command == "eval") {
      if (m.inputs.size() < 2) throw FormatError("eval manifest needs trials and enroll inputs");
      EvalOptions o;
      o.trials = m.inputs[0];
      o.enroll = m.inputs[1];
      if (m.inputs.size() > 2) o.test = m.inputs[2];
      o.out_dir = dir_out();
      o.seed = m.seed;
      cmd_eval(o);
      return {1, {}};
    }
    if (m.command == "simmat") {
      if (m.inputs.empty()) throw FormatError("simmat manifest lists no inputs");
      SimmatOptions o;
      o.rows = m.inputs[0];
      if (m.inputs.size() > 1) o.cols = m.inputs[1];
      o.speaker_level = cfg.at("speaker_level").get<bool>();
      o.out = file_out();
      o.seed = m.seed;
      cmd_simmat(o);
      return {1, {}};
    }
    if (m.command == "synth") {
      SynthOptions o;
      o.speakers = cfg.at("speakers").get<std::size_t>();
      o.utterances = cfg.at("utterances").get<std::size_t>();
      o.seconds = cfg.at("seconds").get<double>();
      o.seed = m.seed;
      o.out_dir = dir_out();
      return cmd_synth(o);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest config: ") + e.what());
  }
  throw FormatError("manifest: unknown command '" + m.command + "'");
}

}  // namespace voicecloak::cli
