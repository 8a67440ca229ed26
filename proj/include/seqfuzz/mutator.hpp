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

// Mutation engine for bytecode programs. Ops before fuzz_from — the frozen
// snapshot prefix — are never modified. Every output validates: structural
// mutations fix up slot references and only pick candidates that keep the
// program well-formed.

#ifndef SEQFUZZ_MUTATOR_HPP
#define SEQFUZZ_MUTATOR_HPP

#include "seqfuzz/bytecode.hpp"

namespace seqfuzz {

namespace detail {

inline constexpr uint8_t kInterestingBytes[] = {0x00, 0x01, 0x7f, 0x80, 0xff,
                                                0x20, 0x0d, 0x0a, '0',  'A'};
inline constexpr size_t kMaxPayload = 4096;

inline void havoc_payload(Bytes& buf, Rng& rng) {
  switch (rng.below(8)) {
    case 0:  // bit flip
      if (!buf.empty()) buf[rng.below(buf.size())] ^= uint8_t(1u << rng.below(8));
      break;
    case 1:  // random byte
      if (!buf.empty()) buf[rng.below(buf.size())] = uint8_t(rng.next());
      break;
    case 2:  // interesting byte
      if (!buf.empty())
        buf[rng.below(buf.size())] =
            kInterestingBytes[rng.below(std::size(kInterestingBytes))];
      break;
    case 3:  // insert byte
      if (buf.size() < kMaxPayload)
        buf.insert(buf.begin() + rng.below(buf.size() + 1), uint8_t(rng.next()));
      break;
    case 4:  // delete byte
      if (!buf.empty()) buf.erase(buf.begin() + rng.below(buf.size()));
      break;
    case 5: {  // duplicate block
      if (buf.empty() || buf.size() >= kMaxPayload) break;
      size_t len = 1 + rng.below(std::min<size_t>(buf.size(), 16));
      size_t src = rng.below(buf.size() - len + 1);
      Bytes block(buf.begin() + src, buf.begin() + src + len);
      size_t dst = rng.below(buf.size() + 1);
      buf.insert(buf.begin() + dst, block.begin(), block.end());
      break;
    }
    case 6: {  // remove block
      if (buf.empty()) break;
      size_t len = 1 + rng.below(std::min<size_t>(buf.size(), 16));
      size_t src = rng.below(buf.size() - len + 1);
      buf.erase(buf.begin() + src, buf.begin() + src + len);
      break;
    }
    case 7: {  // overwrite run with one byte
      if (buf.empty()) break;
      size_t len = 1 + rng.below(std::min<size_t>(buf.size(), 8));
      size_t src = rng.below(buf.size() - len + 1);
      uint8_t v = kInterestingBytes[rng.below(std::size(kInterestingBytes))];
      std::fill(buf.begin() + src, buf.begin() + src + len, v);
      break;
    }
  }
}

// Shift refs after inserting an op at position t. Also keeps the snapshot
// marker counting the same prefix.
inline void fix_refs_after_insert(BytecodeProgram& p, uint32_t t) {
  for (size_t i = 0; i < p.ops.size(); i++) {
    if (i == t) continue;  // the inserted op's refs predate the shift
    for (uint32_t& r : p.ops[i].refs)
      if (r >= t) r++;
  }
  if (p.snapshot_index && *p.snapshot_index > t) (*p.snapshot_index)++;
}

inline void fix_refs_after_remove(BytecodeProgram& p, uint32_t t) {
  for (Op& op : p.ops)
    for (uint32_t& r : op.refs)
      if (r > t) r--;
  if (p.snapshot_index && *p.snapshot_index > t) (*p.snapshot_index)--;
}

// Slots before `limit` that produce the given handle kind.
inline std::vector<uint32_t> producers_of(const FormatSpec& spec,
                                          const BytecodeProgram& p, uint16_t kind,
                                          uint32_t limit) {
  std::vector<uint32_t> out;
  for (uint32_t i = 0; i < limit && i < p.ops.size(); i++) {
    const auto& produced = spec.nodes[p.ops[i].node_id].produces;
    if (produced && *produced == kind) out.push_back(i);
  }
  return out;
}

// Suffix ops that produce nothing and carry data: the "packet" class that
// duplicate/drop/swap/splice operate on.
inline std::vector<uint32_t> packet_ops(const FormatSpec& spec,
                                        const BytecodeProgram& p,
                                        uint32_t fuzz_from) {
  std::vector<uint32_t> out;
  for (uint32_t i = fuzz_from; i < p.ops.size(); i++) {
    const NodeType& n = spec.nodes[p.ops[i].node_id];
    if (!n.produces && n.has_data()) out.push_back(i);
  }
  return out;
}

enum class MutKind {
  kHavoc,
  kPacketDup,
  kPacketDrop,
  kPacketSwap,
  kSplice,
  kAppend,
};

inline Bytes random_payload(Rng& rng) {
  Bytes b(rng.below(17));
  for (auto& c : b) c = uint8_t(rng.next());
  return b;
}

// Applies one mutation from the catalogue. Returns false when the chosen
// kind is not applicable so the caller can fall back to another.
inline bool apply_one(const FormatSpec& spec, BytecodeProgram& p, Rng& rng,
                      std::span<const BytecodeProgram> corpus, uint32_t fuzz_from,
                      MutKind kind) {
  uint32_t len = uint32_t(p.ops.size());
  switch (kind) {
    case MutKind::kHavoc: {
      std::vector<uint32_t> cands;
      for (uint32_t i = fuzz_from; i < len; i++)
        if (spec.nodes[p.ops[i].node_id].has_data()) cands.push_back(i);
      if (cands.empty()) return false;
      havoc_payload(p.ops[cands[rng.below(cands.size())]].payload, rng);
      return true;
    }
    case MutKind::kPacketDup: {
      auto cands = packet_ops(spec, p, fuzz_from);
      if (cands.empty()) return false;
      uint32_t i = cands[rng.below(cands.size())];
      Op copy = p.ops[i];
      uint32_t t = i + 1;
      p.ops.insert(p.ops.begin() + t, std::move(copy));
      fix_refs_after_insert(p, t);
      return true;
    }
    case MutKind::kPacketDrop: {
      // Never empty the fuzzable suffix.
      if (len - fuzz_from < 2) return false;
      auto cands = packet_ops(spec, p, fuzz_from);
      if (cands.empty()) return false;
      uint32_t t = cands[rng.below(cands.size())];
      p.ops.erase(p.ops.begin() + t);
      fix_refs_after_remove(p, t);
      return true;
    }
    case MutKind::kPacketSwap: {
      auto cands = packet_ops(spec, p, fuzz_from);
      if (cands.size() < 2) return false;
      for (int tries = 0; tries < 8; tries++) {
        uint32_t a = cands[rng.below(cands.size())];
        uint32_t b = cands[rng.below(cands.size())];
        if (a == b) continue;
        uint32_t i = std::min(a, b), j = std::max(a, b);
        // The op moving earlier must not reference anything in [i, j).
        bool ok = true;
        for (uint32_t r : p.ops[j].refs)
          if (r >= i) ok = false;
        if (!ok) continue;
        std::swap(p.ops[i], p.ops[j]);
        return true;
      }
      return false;
    }
    case MutKind::kSplice: {
      if (corpus.empty()) return false;
      const BytecodeProgram& donor = corpus[rng.below(corpus.size())];
      auto donor_pkts = packet_ops(spec, donor, 0);
      if (donor_pkts.empty()) return false;
      Op op = donor.ops[donor_pkts[rng.below(donor_pkts.size())]];
      uint32_t t = uint32_t(fuzz_from + rng.below(len - fuzz_from + 1));
      const NodeType& node = spec.nodes[op.node_id];
      for (size_t a = 0; a < node.borrows.size(); a++) {
        auto prods = producers_of(spec, p, node.borrows[a], t);
        if (prods.empty()) return false;
        op.refs[a] = prods[rng.below(prods.size())];
      }
      p.ops.insert(p.ops.begin() + t, std::move(op));
      fix_refs_after_insert(p, t);
      return true;
    }
    case MutKind::kAppend: {
      for (int tries = 0; tries < 8; tries++) {
        uint16_t nid = uint16_t(rng.below(spec.nodes.size()));
        const NodeType& node = spec.nodes[nid];
        Op op;
        op.node_id = nid;
        bool ok = true;
        for (uint16_t kind_id : node.borrows) {
          auto prods = producers_of(spec, p, kind_id, len);
          if (prods.empty()) {
            ok = false;
            break;
          }
          op.refs.push_back(prods[rng.below(prods.size())]);
        }
        if (!ok) continue;
        if (node.has_data()) op.payload = random_payload(rng);
        p.ops.push_back(std::move(op));
        return true;
      }
      return false;
    }
  }
  return false;
}

}  // namespace detail

// Produces a mutant of p. A stack of 1-8 mutations is applied, each drawn
// uniformly from the applicable subset of the catalogue: payload havoc,
// packet duplicate, packet drop, packet swap, packet splice from the corpus,
// and packet append. Deterministic given the rng state.
inline BytecodeProgram mutate(const FormatSpec& spec, const BytecodeProgram& p,
                              Rng& rng, std::span<const BytecodeProgram> corpus,
                              uint32_t fuzz_from) {
  BytecodeProgram out = p;
  size_t stack = 1 + rng.below(8);
  using detail::MutKind;
  static constexpr MutKind kAll[] = {MutKind::kHavoc,      MutKind::kPacketDup,
                                     MutKind::kPacketDrop, MutKind::kPacketSwap,
                                     MutKind::kSplice,     MutKind::kAppend};
  for (size_t s = 0; s < stack; s++) {
    // One retry pass over a shuffled fallback order; if nothing applies the
    // program is left as is for this step.
    MutKind first = kAll[rng.below(std::size(kAll))];
    if (detail::apply_one(spec, out, rng, corpus, fuzz_from, first)) continue;
    for (MutKind k : kAll) {
      if (k == first) continue;
      if (detail::apply_one(spec, out, rng, corpus, fuzz_from, k)) break;
    }
  }
  return out;
}

}  // namespace seqfuzz

#endif  // SEQFUZZ_MUTATOR_HPP
