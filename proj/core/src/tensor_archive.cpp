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

#include "tensor_archive.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>

#include "voicecloak/error.hpp"

namespace voicecloak::detail {
namespace {

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

void write_archive(const std::filesystem::path& path, std::string_view format, int version,
                   nlohmann::json header, const std::vector<ArchiveEntry>& entries) {
  std::uint64_t offset = 0;
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& e : entries) {
    const std::uint64_t bytes = e.values.size() * 8;
    manifest.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", offset}, {"byte_length", bytes}});
    offset += bytes;
  }
  header["format"] = format;
  header["format_version"] = version;
  header["tensors"] = std::move(manifest);
  header["blob_bytes"] = offset;

  const std::string text = header.dump();
  std::string out;
  out.reserve(8 + text.size() + offset);
  put_u64(out, text.size());
  out += text;
  for (const auto& e : entries) {
    for (double v : e.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

Archive read_archive(const std::filesystem::path& path, std::string_view format, int version) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  const std::string name = path.string();

  if (bytes.size() < 8) throw FormatError(name + ": truncated header length");
  const std::uint64_t header_len = get_u64(bytes.data());
  if (header_len > bytes.size() - 8) throw FormatError(name + ": truncated JSON header");

  Archive archive;
  try {
    archive.header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(name + ": invalid JSON header: " + e.what());
  }
  const auto& h = archive.header;
  try {
    if (h.at("format").get<std::string>() != format) {
      throw FormatError(name + ": format '" + h.at("format").get<std::string>() + "', expected '" +
                        std::string(format) + "'");
    }
    const int file_version = h.at("format_version").get<int>();
    if (file_version != version) {
      throw FormatError(name + ": format_version " + std::to_string(file_version) + " unsupported (expected " +
                        std::to_string(version) + ")");
    }
    const std::uint64_t blob_bytes = h.at("blob_bytes").get<std::uint64_t>();
    const std::uint64_t available = bytes.size() - 8 - header_len;
    if (available != blob_bytes) {
      throw FormatError(name + ": blob length mismatch (manifest declares " + std::to_string(blob_bytes) +
                        " bytes, file holds " + std::to_string(available) + ")");
    }
    const unsigned char* blob = bytes.data() + 8 + header_len;

    for (const auto& t : h.at("tensors")) {
      ArchiveEntry entry;
      entry.name = t.at("name").get<std::string>();
      entry.shape = t.at("shape").get<std::vector<std::size_t>>();
      const std::uint64_t offset = t.at("offset").get<std::uint64_t>();
      const std::uint64_t length = t.at("byte_length").get<std::uint64_t>();
      std::uint64_t count = 1;
      for (auto d : entry.shape) count *= d;
      if (count * 8 != length) {
        throw FormatError(name + ": tensor '" + entry.name + "' shape holds " + std::to_string(count) +
                          " values but its blob extent is " + std::to_string(length) + " bytes");
      }
      if (offset % 8 != 0 || offset > blob_bytes || length > blob_bytes - offset) {
        throw FormatError(name + ": tensor '" + entry.name + "' extent lies outside the blob");
      }
      entry.values.resize(count);
      for (std::uint64_t i = 0; i < count; ++i) {
        const double v = std::bit_cast<double>(get_u64(blob + offset + 8 * i));
        if (!std::isfinite(v)) {
          throw FormatError(name + ": tensor '" + entry.name + "' holds a non-finite value at index " +
                            std::to_string(i));
        }
        entry.values[i] = v;
      }
      archive.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(name + ": malformed header: " + e.what());
  }
  return archive;
}

}  // namespace voicecloak::detail
