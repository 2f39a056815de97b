// Copyright 2026 The bnlu Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace bnlu {

enum class Errc {
  io,          // unreadable / unwritable file
  data,        // malformed dataset or input text
  too_long,    // utterance exceeds max_seq_len - 2
  shape,       // tensor dimension mismatch
  config,      // bad configuration key or value
  checkpoint,  // corrupt or incompatible checkpoint
  numeric,     // non-finite values
  usage,       // API contract violation
};

inline std::string_view errc_tag(Errc c) {
  switch (c) {
    case Errc::io: return "E_IO";
    case Errc::data: return "E_DATA";
    case Errc::too_long: return "E_TOO_LONG";
    case Errc::shape: return "E_SHAPE";
    case Errc::config: return "E_CONFIG";
    case Errc::checkpoint: return "E_CHECKPOINT";
    case Errc::numeric: return "E_NUMERIC";
    case Errc::usage: return "E_USAGE";
  }
  return "E_UNKNOWN";
}

// All library failures throw this. what() is "<TAG>: <message>" on one line.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_tag(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

namespace detail {

template <typename... Args>
[[noreturn]] void fail(Errc code, Args&&... args) {
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  throw Error(code, os.str());
}

template <typename... Args>
void check(bool cond, Errc code, Args&&... args) {
  if (!cond) fail(code, std::forward<Args>(args)...);
}

}  // namespace detail
}  // namespace bnlu
