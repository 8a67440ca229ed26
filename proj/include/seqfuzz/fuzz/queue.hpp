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

// Corpus queue. Entries keep their program in canonical form (no snapshot
// marker; markers are a per-schedule concern) plus scheduling bookkeeping.

#ifndef SEQFUZZ_FUZZ_QUEUE_HPP
#define SEQFUZZ_FUZZ_QUEUE_HPP

#include <deque>

#include "seqfuzz/bytecode.hpp"

namespace seqfuzz {

struct QueueEntry {
  uint64_t id = 0;
  BytecodeProgram program;  // canonical, marker stripped
  uint64_t cov_hash = 0;
  uint32_t packet_count = 0;
  double exec_cost = 0;            // moving-average ops executed
  uint32_t aggressive_cursor = 0;  // 0 while unset; else in [1, packet_count-1]
  uint64_t iters_since_new = 0;    // execs since last novelty from this entry
  uint64_t times_scheduled = 0;
  bool unstable = false;

  void observe_cost(uint64_t ops) {
    exec_cost = exec_cost == 0 ? double(ops) : 0.75 * exec_cost + 0.25 * double(ops);
  }
};

// Data-bearing, non-producing ops: the packet positions placement policies
// count in.
inline uint32_t count_packets(const FormatSpec& spec, const BytecodeProgram& p) {
  uint32_t n = 0;
  for (const Op& op : p.ops) {
    const NodeType& node = spec.nodes[op.node_id];
    if (node.has_data() && !node.produces) n++;
  }
  return n;
}

// Op index directly after the k-th packet op (1-based), i.e. the snapshot
// marker position that freezes packets 1..k.
inline uint32_t op_index_after_packet(const FormatSpec& spec,
                                      const BytecodeProgram& p, uint32_t k) {
  uint32_t seen = 0;
  for (uint32_t i = 0; i < p.ops.size(); i++) {
    const NodeType& node = spec.nodes[p.ops[i].node_id];
    if (node.has_data() && !node.produces) {
      seen++;
      if (seen == k) return i + 1;
    }
  }
  throw std::out_of_range("program has fewer than k packets");
}

class Queue {
 public:
  QueueEntry& add(BytecodeProgram program, uint64_t cov_hash,
                  uint32_t packet_count, uint64_t first_cost) {
    QueueEntry e;
    e.id = next_id_++;
    e.program = std::move(program);
    e.cov_hash = cov_hash;
    e.packet_count = packet_count;
    e.observe_cost(first_cost);
    entries_.push_back(std::move(e));
    hashes_.push_back(cov_hash);
    return entries_.back();
  }

  bool contains_hash(uint64_t h) const {
    return std::find(hashes_.begin(), hashes_.end(), h) != hashes_.end();
  }

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  QueueEntry& at(size_t i) { return entries_[i]; }
  const QueueEntry& at(size_t i) const { return entries_[i]; }

  // Weighted pick favoring entries with recent novelty and low execution
  // cost; every fourth schedule walks round-robin instead, so each entry is
  // scheduled infinitely often regardless of weights.
  QueueEntry& schedule_next(Rng& rng) {
    if (entries_.empty()) throw std::logic_error("schedule on empty queue");
    schedules_++;
    if (schedules_ % 4 == 0) {
      QueueEntry& e = entries_[rr_cursor_ % entries_.size()];
      rr_cursor_++;
      return e;
    }
    double total = 0;
    std::vector<double> weights(entries_.size());
    for (size_t i = 0; i < entries_.size(); i++) {
      weights[i] = weight(entries_[i]);
      total += weights[i];
    }
    double x = double(rng.next() >> 11) / double(1ull << 53) * total;
    for (size_t i = 0; i < entries_.size(); i++) {
      x -= weights[i];
      if (x <= 0) return entries_[i];
    }
    return entries_.back();
  }

  // Random sample of queue programs used as splice donors.
  std::vector<BytecodeProgram> sample_corpus(Rng& rng, size_t max = 12) const {
    std::vector<BytecodeProgram> out;
    if (entries_.empty()) return out;
    size_t n = std::min(max, entries_.size());
    for (size_t i = 0; i < n; i++)
      out.push_back(entries_[rng.below(entries_.size())].program);
    return out;
  }

 private:
  static double weight(const QueueEntry& e) {
    double w = e.iters_since_new < 50 ? 4.0 : 1.0;
    w *= 256.0 / (256.0 + e.exec_cost);
    return w;
  }

  std::deque<QueueEntry> entries_;  // stable references across growth
  std::vector<uint64_t> hashes_;
  uint64_t next_id_ = 0;
  uint64_t schedules_ = 0;
  size_t rr_cursor_ = 0;
};

}  // namespace seqfuzz

#endif  // SEQFUZZ_FUZZ_QUEUE_HPP
