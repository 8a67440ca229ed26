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

// Programmatic seed construction. Each call is logged; produced handles come
// back as tracking tokens that remember which call created them, so later
// calls can be wired to earlier results. build() flattens the log into a
// bytecode program with slot-indexed references.

#ifndef SEQFUZZ_BUILDER_HPP
#define SEQFUZZ_BUILDER_HPP

#include <atomic>

#include "seqfuzz/bytecode.hpp"

namespace seqfuzz {

class BuilderError : public std::logic_error {
 public:
  explicit BuilderError(const std::string& msg) : std::logic_error(msg) {}
};

class GraphBuilder {
 public:
  struct Token {
    uint64_t builder_id = 0;
    uint32_t slot = 0;
    uint16_t kind = 0;
  };

  explicit GraphBuilder(const FormatSpec& spec)
      : spec_(&spec), id_(next_id_.fetch_add(1) + 1) {}

  // Logs one node invocation. Returns a token when the node produces a handle.
  std::optional<Token> call(std::string_view node_name,
                            const std::vector<Token>& args = {},
                            Bytes payload = {}) {
    auto nid = spec_->node_id(node_name);
    if (!nid) throw BuilderError("unknown node '" + std::string(node_name) + "'");
    const NodeType& node = spec_->nodes[*nid];
    if (args.size() != node.borrows.size())
      throw BuilderError("node '" + node.name + "' takes " +
                         std::to_string(node.borrows.size()) + " handles, got " +
                         std::to_string(args.size()));
    Op op;
    op.node_id = *nid;
    for (size_t i = 0; i < args.size(); i++) {
      if (args[i].builder_id != id_)
        throw BuilderError("token from another builder");
      if (args[i].kind != node.borrows[i])
        throw BuilderError("handle kind mismatch for argument " + std::to_string(i));
      op.refs.push_back(args[i].slot);
    }
    if (!node.has_data() && !payload.empty())
      throw BuilderError("payload on dataless node '" + node.name + "'");
    op.payload = std::move(payload);
    uint32_t slot = uint32_t(log_.size());
    log_.push_back(std::move(op));
    if (node.produces) return Token{id_, slot, *node.produces};
    return std::nullopt;
  }

  BytecodeProgram build() const {
    if (log_.empty()) throw BuilderError("builder has no calls");
    BytecodeProgram p;
    p.ops = log_;
    return p;
  }

  size_t call_count() const { return log_.size(); }

 private:
  static inline std::atomic<uint64_t> next_id_{0};
  const FormatSpec* spec_;
  uint64_t id_;
  std::vector<Op> log_;
};

// Convenience: one connection plus one packet per payload, the canonical
// shape produced by seed import and used by all built-in targets.
inline BytecodeProgram make_stream_program(const FormatSpec& spec,
                                           const std::vector<Bytes>& packets) {
  auto open_id = spec.connection_open_node();
  auto pkt_id = spec.packet_node();
  if (!open_id || !pkt_id)
    throw BuilderError("spec lacks connection-open or packet node");
  GraphBuilder b(spec);
  auto con = b.call(spec.nodes[*open_id].name);
  for (const Bytes& payload : packets)
    b.call(spec.nodes[*pkt_id].name, {*con}, payload);
  return b.build();
}

}  // namespace seqfuzz

#endif  // SEQFUZZ_BUILDER_HPP
