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

// Snapshot placement policies. none always fuzzes from the root. For
// sequences shorter than four packets the other policies also pick the
// root. balanced picks the root 4% of the time, otherwise a uniform index
// over the whole sequence or only its second half (50/50). aggressive
// cycles indices from the end of the input backwards, stepping one packet
// earlier each time a snapshot goes a full reuse window without novelty,
// and wrapping from 1 back to the end.

#ifndef SEQFUZZ_FUZZ_POLICY_HPP
#define SEQFUZZ_FUZZ_POLICY_HPP

#include "seqfuzz/fuzz/queue.hpp"

namespace seqfuzz {

enum class Policy { kNone, kBalanced, kAggressive };

inline const char* policy_name(Policy p) {
  switch (p) {
    case Policy::kNone: return "none";
    case Policy::kBalanced: return "balanced";
    case Policy::kAggressive: return "aggressive";
  }
  return "?";
}

inline std::optional<Policy> parse_policy(std::string_view s) {
  if (s == "none") return Policy::kNone;
  if (s == "balanced") return Policy::kBalanced;
  if (s == "aggressive") return Policy::kAggressive;
  return std::nullopt;
}

struct PolicyConfig {
  Policy policy = Policy::kNone;
  uint32_t reuse_limit = 50;
  uint32_t min_packets_for_inc = 4;
  double balanced_root_prob = 0.04;
  // share of the non-root remainder drawn from the second half only
  double balanced_second_half_prob = 0.5;
};

struct Placement {
  bool root = true;
  uint32_t packet_index = 0;  // snapshot after this many packets, in [1, n-1]

  static Placement at_root() { return {true, 0}; }
  static Placement at(uint32_t k) { return {false, k}; }
  bool operator==(const Placement&) const = default;
};

inline Placement choose_placement(const PolicyConfig& cfg, QueueEntry& e, Rng& rng) {
  uint32_t n = e.packet_count;
  if (cfg.policy == Policy::kNone || e.unstable) return Placement::at_root();
  if (n < cfg.min_packets_for_inc) return Placement::at_root();

  if (cfg.policy == Policy::kBalanced) {
    if (rng.chance(cfg.balanced_root_prob)) return Placement::at_root();
    if (rng.chance(cfg.balanced_second_half_prob))
      return Placement::at(uint32_t(rng.range((n + 1) / 2, n - 1)));
    return Placement::at(uint32_t(rng.range(1, n - 1)));
  }

  // aggressive
  if (e.aggressive_cursor == 0) {
    e.aggressive_cursor = n - 1;  // first schedule: end of the input
  } else if (e.iters_since_new >= cfg.reuse_limit) {
    e.aggressive_cursor = e.aggressive_cursor > 1 ? e.aggressive_cursor - 1 : n - 1;
    e.iters_since_new = 0;
  }
  return Placement::at(e.aggressive_cursor);
}

}  // namespace seqfuzz

#endif  // SEQFUZZ_FUZZ_POLICY_HPP
