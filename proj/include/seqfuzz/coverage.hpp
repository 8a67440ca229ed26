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

// Edge-coverage hit-count map plus a global "virgin" map for novelty
// detection. The map lives outside all snapshotted state so restores never
// clear it; the last 64 slots are reserved for maximization feedback buckets
// written directly by targets (e.g. best progress so far).

#ifndef SEQFUZZ_COVERAGE_HPP
#define SEQFUZZ_COVERAGE_HPP

#include <fstream>

#include "seqfuzz/common.hpp"

namespace seqfuzz {

inline constexpr size_t kDefaultMapSize = 65536;
inline constexpr size_t kFeedbackSlots = 64;

enum class Novelty { kNone, kNewBucket, kNewEdge };

// Maps a raw hit count onto one of eight bucket bits:
// 1, 2, 3, 4-7, 8-15, 16-31, 32-127, 128+.
inline uint8_t bucket_class(uint8_t count) {
  if (count == 0) return 0;
  if (count == 1) return 1;
  if (count == 2) return 2;
  if (count == 3) return 4;
  if (count <= 7) return 8;
  if (count <= 15) return 16;
  if (count <= 31) return 32;
  if (count <= 127) return 64;
  return 128;
}

class CoverageMap {
 public:
  explicit CoverageMap(size_t size = kDefaultMapSize) : bits_(size, 0) {
    if (size < kFeedbackSlots * 2 || (size & (size - 1)) != 0)
      throw std::invalid_argument("coverage map size must be a power of two >= 128");
  }

  size_t size() const { return bits_.size(); }
  const std::vector<uint8_t>& bits() const { return bits_; }

  void record_edge(uint16_t prev_loc, uint16_t cur_loc) {
    size_t slot = (size_t(cur_loc) ^ (size_t(prev_loc) >> 1)) & (bits_.size() - 1);
    if (bits_[slot] != 0xff) bits_[slot]++;
  }

  // Feedback buckets occupy the reserved tail region.
  void record_feedback(size_t bucket) {
    size_t slot = bits_.size() - kFeedbackSlots + (bucket & (kFeedbackSlots - 1));
    if (bits_[slot] != 0xff) bits_[slot]++;
  }

  void clear() { std::fill(bits_.begin(), bits_.end(), 0); }

  bool operator==(const CoverageMap&) const = default;

 private:
  std::vector<uint8_t> bits_;
};

// Accumulated bucket classes per slot across a whole campaign. Merging only
// ever sets bits; it never removes them.
class GlobalCoverage {
 public:
  explicit GlobalCoverage(size_t size = kDefaultMapSize) : classes_(size, 0) {}

  size_t size() const { return classes_.size(); }

  // Classifies the per-exec map against the global one, merges, and clears
  // the per-exec map for the next run. Returns the strongest novelty seen.
  Novelty merge_and_classify(CoverageMap& map) {
    Novelty result = Novelty::kNone;
    const auto& bits = map.bits();
    for (size_t i = 0; i < bits.size(); i++) {
      uint8_t cls = bucket_class(bits[i]);
      if (cls == 0) continue;
      uint8_t seen = classes_[i];
      if ((cls & ~seen) != 0) {
        if (seen == 0) {
          result = Novelty::kNewEdge;
          edges_++;
        } else if (result == Novelty::kNone) {
          result = Novelty::kNewBucket;
        }
        classes_[i] = uint8_t(seen | cls);
      }
    }
    map.clear();
    return result;
  }

  uint64_t edges_found() const { return edges_; }
  const Bytes& classes() const { return classes_; }

  // Digest of the classified map of one execution, used to name queue files.
  static uint64_t map_hash(const CoverageMap& map) {
    Bytes classed(map.bits().size());
    for (size_t i = 0; i < classed.size(); i++)
      classed[i] = bucket_class(map.bits()[i]);
    return fnv1a64(classed);
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(reinterpret_cast<const char*>(classes_.data()), classes_.size());
  }

  bool load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return false;
    Bytes data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (data.size() != classes_.size()) return false;
    classes_ = std::move(data);
    edges_ = 0;
    for (uint8_t c : classes_)
      if (c) edges_++;
    return true;
  }

 private:
  Bytes classes_;
  uint64_t edges_ = 0;
};

}  // namespace seqfuzz

#endif  // SEQFUZZ_COVERAGE_HPP
