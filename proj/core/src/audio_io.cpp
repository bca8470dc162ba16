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

#include "voicecloak/audio_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <string_view>

#include "voicecloak/error.hpp"

namespace voicecloak::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;
constexpr double kPcmScale = 32768.0;

class ByteReader {
 public:
  ByteReader(const std::vector<unsigned char>& bytes, std::string path)
      : bytes_(bytes), path_(std::move(path)) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void need(std::size_t n, std::string_view field) const {
    if (remaining() < n) {
      throw FormatError(path_ + ": truncated file while reading " +
                        std::string(field));
    }
  }

  std::string tag(std::string_view field) {
    need(4, field);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return s;
  }

  std::uint16_t u16(std::string_view field) {
    need(2, field);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_]) |
                      static_cast<std::uint16_t>(bytes_[pos_ + 1] << 8);
    pos_ += 2;
    return v;
  }

  std::uint32_t u32(std::string_view field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + i];
    pos_ += 4;
    return v;
  }

  void skip(std::size_t n, std::string_view field) {
    need(n, field);
    pos_ += n;
  }

  const unsigned char* here() const { return bytes_.data() + pos_; }

 private:
  const std::vector<unsigned char>& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

struct FormatChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
};

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::int16_t to_pcm16(double s) {
  constexpr double kMax = 1.0 - 1.0 / kPcmScale;
  double clamped = std::clamp(s, -1.0, kMax);
  return static_cast<std::int16_t>(std::lround(clamped * kPcmScale));
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const std::string name = path.string();
  ByteReader r(bytes, name);

  if (r.tag("RIFF id") != "RIFF") throw FormatError(name + ": RIFF id is not 'RIFF'");
  r.u32("RIFF size");
  if (r.tag("WAVE id") != "WAVE") throw FormatError(name + ": WAVE id is not 'WAVE'");

  FormatChunk fmt;
  bool have_fmt = false;
  while (true) {
    if (r.remaining() < 8) throw FormatError(name + ": truncated file, no data chunk found");
    const std::string id = r.tag("chunk id");
    const std::uint32_t size = r.u32("chunk size");
    if (id == "fmt ") {
      if (size < 16) throw FormatError(name + ": fmt chunk size " + std::to_string(size) + " < 16");
      r.need(size, "fmt chunk");
      const std::size_t start = r.position();
      fmt.format = r.u16("audio format");
      fmt.channels = r.u16("channel count");
      fmt.sample_rate = r.u32("sample rate");
      r.u32("byte rate");
      r.u16("block align");
      fmt.bits_per_sample = r.u16("bits per sample");
      if (fmt.format == kFormatExtensible) {
        if (size < 40) throw FormatError(name + ": extensible fmt chunk size " + std::to_string(size) + " < 40");
        r.u16("cbSize");
        r.u16("valid bits");
        r.u32("channel mask");
        fmt.format = r.u16("sub-format");
      }
      r.skip(size - (r.position() - start) + (size & 1u), "fmt chunk padding");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(name + ": data chunk precedes fmt chunk");
      if (r.remaining() < size) {
        throw FormatError(name + ": truncated file, data chunk size " + std::to_string(size) +
                          " exceeds remaining " + std::to_string(r.remaining()) + " bytes");
      }
      if (fmt.channels != 1) {
        throw FormatError(name + ": channel count " + std::to_string(fmt.channels) +
                          " unsupported (mono only)");
      }
      if (fmt.sample_rate == 0) throw FormatError(name + ": sample rate is 0");

      Waveform w;
      w.sample_rate = static_cast<int>(fmt.sample_rate);
      const unsigned char* p = r.here();
      if (fmt.format == kFormatPcm && fmt.bits_per_sample == 16) {
        w.samples.resize(size / 2);
        for (std::size_t i = 0; i < w.samples.size(); ++i) {
          auto v = static_cast<std::int16_t>(p[2 * i] | (p[2 * i + 1] << 8));
          w.samples[i] = v / kPcmScale;
        }
      } else if (fmt.format == kFormatFloat && fmt.bits_per_sample == 32) {
        w.samples.resize(size / 4);
        for (std::size_t i = 0; i < w.samples.size(); ++i) {
          std::uint32_t bits = p[4 * i] | (p[4 * i + 1] << 8) | (p[4 * i + 2] << 16) |
                               (static_cast<std::uint32_t>(p[4 * i + 3]) << 24);
          const float f = std::bit_cast<float>(bits);
          if (!std::isfinite(f)) throw FormatError(name + ": non-finite float sample at index " + std::to_string(i));
          w.samples[i] = f;
        }
      } else {
        throw FormatError(name + ": unsupported encoding (audio format " + std::to_string(fmt.format) +
                          ", bits per sample " + std::to_string(fmt.bits_per_sample) + ")");
      }
      return w;
    } else {
      r.skip(size + (size & 1u), "chunk '" + id + "'");
    }
  }
}

std::vector<double> quantize_pcm16(const std::vector<double>& samples) {
  std::vector<double> out(samples.size());
  std::transform(samples.begin(), samples.end(), out.begin(),
                 [](double s) { return to_pcm16(s) / kPcmScale; });
  return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  if (w.sample_rate <= 0) throw InvalidArgument("write_wav: sample rate must be positive");
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : w.samples) put_u16(out, static_cast<std::uint16_t>(to_pcm16(s)));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

Waveform resample_linear(const Waveform& w, int target_rate) {
  if (target_rate <= 0) throw InvalidArgument("resample_linear: target rate must be positive");
  if (target_rate == w.sample_rate || w.samples.empty()) {
    return Waveform{w.samples, target_rate};
  }
  const auto n_in = static_cast<std::uint64_t>(w.samples.size());
  const auto src = static_cast<std::uint64_t>(w.sample_rate);
  const auto dst = static_cast<std::uint64_t>(target_rate);
  const std::uint64_t n_out = std::max<std::uint64_t>(1, (n_in * dst + src / 2) / src);

  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::uint64_t j = 0; j < n_out; ++j) {
    // Input position j * src / dst, kept as integer + remainder so long
    // signals do not accumulate rounding drift.
    const std::uint64_t num = j * src;
    const std::uint64_t i = num / dst;
    const double frac = static_cast<double>(num % dst) / static_cast<double>(dst);
    if (i + 1 >= n_in) {
      out.samples[j] = w.samples[n_in - 1];
    } else {
      out.samples[j] = (1.0 - frac) * w.samples[i] + frac * w.samples[i + 1];
    }
  }
  return out;
}

Waveform add_gaussian_noise(const Waveform& w, double target_snr_db, std::uint64_t seed) {
  if (!std::isfinite(target_snr_db)) {
    throw InvalidArgument("add_gaussian_noise: target SNR must be finite");
  }
  double signal_energy = 0.0;
  for (double s : w.samples) signal_energy += s * s;
  if (!(signal_energy > 0.0)) throw InvalidArgument("add_gaussian_noise: input has zero energy");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(w.samples.size());
  double noise_energy = 0.0;
  for (double& n : noise) {
    n = normal(rng);
    noise_energy += n * n;
  }
  const double scale = std::sqrt(signal_energy / (noise_energy * std::pow(10.0, target_snr_db / 10.0)));

  Waveform out{w.samples, w.sample_rate};
  for (std::size_t i = 0; i < noise.size(); ++i) out.samples[i] += scale * noise[i];
  return out;
}

}  // namespace voicecloak::audio
