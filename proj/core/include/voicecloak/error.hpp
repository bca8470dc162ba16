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

#ifndef VOICECLOAK_ERROR_HPP_
#define VOICECLOAK_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace voicecloak {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unsupported file contents (WAV headers, weight files,
// trial lists, archives).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Operating-system level I/O failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation's precondition (bad shape, bad config,
// degenerate input).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace voicecloak

#endif  // VOICECLOAK_ERROR_HPP_
