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

#ifndef VOICECLOAK_SRC_TENSOR_ARCHIVE_HPP_
#define VOICECLOAK_SRC_TENSOR_ARCHIVE_HPP_

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace voicecloak::detail {

struct ArchiveEntry {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

struct Archive {
  nlohmann::json header;
  std::vector<ArchiveEntry> entries;
};

// [u64 LE header length][JSON header][float64 LE blob]. `header` supplies
// extra fields; format/version/tensors/blob_bytes are filled in here.
void write_archive(const std::filesystem::path& path, std::string_view format, int version,
                   nlohmann::json header, const std::vector<ArchiveEntry>& entries);

Archive read_archive(const std::filesystem::path& path, std::string_view format, int version);

}  // namespace voicecloak::detail

#endif  // VOICECLOAK_SRC_TENSOR_ARCHIVE_HPP_
