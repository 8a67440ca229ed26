// Copyright 2026 The seqfuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SEQFUZZ_TARGETS_REGISTRY_HPP
#define SEQFUZZ_TARGETS_REGISTRY_HPP

#include "seqfuzz/targets/ftp_like.hpp"
#include "seqfuzz/targets/longprefix.hpp"
#include "seqfuzz/targets/platformer.hpp"

namespace seqfuzz {

struct TargetOptions {
  // Platformer level grid; empty selects the bundled level.
  std::string level_text;
  uint32_t longprefix_handshake = 100;
};

inline std::vector<std::string> target_names() {
  return {"ftp_like", "platformer", "longprefix"};
}

inline std::unique_ptr<Target> make_target(const std::string& name,
                                           const TargetOptions& opts = {}) {
  if (name == "ftp_like") return std::make_unique<FtpLikeTarget>();
  if (name == "platformer") {
    const std::string& text =
        opts.level_text.empty() ? kDefaultLevelText : opts.level_text;
    return std::make_unique<PlatformerTarget>(Level::parse(text));
  }
  if (name == "longprefix")
    return std::make_unique<LongPrefixTarget>(opts.longprefix_handshake);
  throw std::invalid_argument("unknown target '" + name + "'");
}

}  // namespace seqfuzz

#endif  // SEQFUZZ_TARGETS_REGISTRY_HPP
