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

// Flat bytecode programs: an ordered list of typed node invocations with
// slot-indexed handle references, optionally carrying one snapshot marker.
// Wire format (little-endian): magic "NXB1", u32 op count, then per op
// u16 node id, u16 ref count, u32 per ref, u32 payload length, payload
// bytes. The snapshot marker is a reserved node id with no refs or payload.

#ifndef SEQFUZZ_BYTECODE_HPP
#define SEQFUZZ_BYTECODE_HPP

#include <optional>

#include "seqfuzz/format_spec.hpp"

namespace seqfuzz {

inline constexpr uint16_t kSnapshotMarkerId = 0xFFFF;
inline constexpr char kBytecodeMagic[4] = {'N', 'X', 'B', '1'};

struct Op {
  uint16_t node_id = 0;
  std::vector<uint32_t> refs;  // slots of earlier producing ops
  Bytes payload;
  bool operator==(const Op&) const = default;
};

struct BytecodeProgram {
  std::vector<Op> ops;
  // Take an incremental snapshot after executing the first k ops.
  std::optional<uint32_t> snapshot_index;

  bool operator==(const BytecodeProgram&) const = default;

  BytecodeProgram without_marker() const {
    BytecodeProgram p = *this;
    p.snapshot_index.reset();
    return p;
  }
  BytecodeProgram with_marker(uint32_t k) const {
    BytecodeProgram p = *this;
    p.snapshot_index = k;
    return p;
  }
};

struct Violation {
  size_t op_index;
  std::string message;
};

// Structural checks: reference ordering, kind agreement, payload presence,
// marker bounds. Returns all violations found; never throws.
inline std::vector<Violation> program_validate(const FormatSpec& spec,
                                               const BytecodeProgram& p) {
  std::vector<Violation> out;
  if (p.ops.empty()) {
    out.push_back({0, "empty program"});
    return out;
  }
  for (size_t i = 0; i < p.ops.size(); i++) {
    const Op& op = p.ops[i];
    if (op.node_id >= spec.nodes.size()) {
      out.push_back({i, "unknown node id " + std::to_string(op.node_id)});
      continue;
    }
    const NodeType& node = spec.nodes[op.node_id];
    if (op.refs.size() != node.borrows.size()) {
      out.push_back({i, "node '" + node.name + "' takes " +
                            std::to_string(node.borrows.size()) + " refs, got " +
                            std::to_string(op.refs.size())});
      continue;
    }
    for (size_t a = 0; a < op.refs.size(); a++) {
      uint32_t slot = op.refs[a];
      if (slot >= i) {
        out.push_back({i, "forward reference to slot " + std::to_string(slot)});
        continue;
      }
      const Op& def = p.ops[slot];
      if (def.node_id >= spec.nodes.size()) continue;  // already reported
      const auto& produced = spec.nodes[def.node_id].produces;
      if (!produced) {
        out.push_back({i, "ref to slot " + std::to_string(slot) +
                              " which produces no handle"});
      } else if (*produced != node.borrows[a]) {
        out.push_back({i, "ref kind mismatch at slot " + std::to_string(slot)});
      }
    }
    if (!node.has_data() && !op.payload.empty())
      out.push_back({i, "payload on dataless node '" + node.name + "'"});
  }
  if (p.snapshot_index) {
    uint32_t k = *p.snapshot_index;
    if (k == 0 || k >= p.ops.size())
      out.push_back({k, "snapshot marker out of bounds"});
  }
  return out;
}

inline Bytes program_serialize(const BytecodeProgram& p) {
  ByteWriter w;
  w.raw(std::span<const uint8_t>(
      reinterpret_cast<const uint8_t*>(kBytecodeMagic), 4));
  uint32_t total = uint32_t(p.ops.size()) + (p.snapshot_index ? 1 : 0);
  w.u32(total);
  auto emit = [&](const Op& op) {
    w.u16(op.node_id);
    w.u16(uint16_t(op.refs.size()));
    for (uint32_t r : op.refs) w.u32(r);
    w.blob(op.payload);
  };
  for (size_t i = 0; i < p.ops.size(); i++) {
    if (p.snapshot_index && *p.snapshot_index == i)
      emit(Op{kSnapshotMarkerId, {}, {}});
    emit(p.ops[i]);
  }
  return w.take();
}

class ProgramParseError : public std::runtime_error {
 public:
  explicit ProgramParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Decodes and validates. Throws ProgramParseError on any structural or
// semantic problem; truncated or garbage input must never abort or hang.
inline BytecodeProgram program_parse(const FormatSpec& spec,
                                     std::span<const uint8_t> data) {
  try {
    ByteReader r(data);
    Bytes magic = r.raw(4);
    if (std::memcmp(magic.data(), kBytecodeMagic, 4) != 0)
      throw ProgramParseError("bad magic");
    uint32_t count = r.u32();
    // Minimum encoded op is 8 bytes; bound before any allocation.
    if (count > r.remaining() / 8)
      throw ProgramParseError("op count exceeds input size");
    BytecodeProgram p;
    p.ops.reserve(count);
    for (uint32_t i = 0; i < count; i++) {
      Op op;
      op.node_id = r.u16();
      uint16_t nrefs = r.u16();
      if (size_t(nrefs) * 4 > r.remaining())
        throw ProgramParseError("ref count exceeds input size");
      op.refs.reserve(nrefs);
      for (uint16_t a = 0; a < nrefs; a++) op.refs.push_back(r.u32());
      op.payload = r.blob();
      if (op.node_id == kSnapshotMarkerId) {
        if (!op.refs.empty() || !op.payload.empty())
          throw ProgramParseError("snapshot marker with refs or payload");
        if (p.snapshot_index) throw ProgramParseError("duplicate snapshot marker");
        p.snapshot_index = uint32_t(p.ops.size());
      } else {
        p.ops.push_back(std::move(op));
      }
    }
    if (!r.done()) throw ProgramParseError("trailing bytes after program");
    auto violations = program_validate(spec, p);
    if (!violations.empty())
      throw ProgramParseError("invalid program: " + violations.front().message +
                              " (op " + std::to_string(violations.front().op_index) + ")");
    return p;
  } catch (const DecodeError& e) {
    throw ProgramParseError(e.what());
  }
}

// Canonical bytes of the first k ops, used to check that an incremental
// snapshot's frozen prefix was not modified.
inline Bytes prefix_bytes(const BytecodeProgram& p, uint32_t k) {
  ByteWriter w;
  for (uint32_t i = 0; i < k && i < p.ops.size(); i++) {
    const Op& op = p.ops[i];
    w.u16(op.node_id);
    w.u16(uint16_t(op.refs.size()));
    for (uint32_t r : op.refs) w.u32(r);
    w.blob(op.payload);
  }
  return w.take();
}

}  // namespace seqfuzz

#endif  // SEQFUZZ_BYTECODE_HPP
