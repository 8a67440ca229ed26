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

// Target with a long fixed handshake: the first N packets must match an
// expected script byte-for-byte or the session ends immediately. A small
// branching command space follows. Snapshots placed after the handshake
// skip nearly all of the per-test cost.

#ifndef SEQFUZZ_TARGETS_LONGPREFIX_HPP
#define SEQFUZZ_TARGETS_LONGPREFIX_HPP

#include "seqfuzz/guest.hpp"

namespace seqfuzz {

// The scripted handshake packet for step i.
inline Bytes longprefix_expected_packet(uint32_t i) {
  return Bytes{'H', 'S', uint8_t(i), uint8_t(i >> 8)};
}

class LongPrefixTarget : public Target {
  static constexpr uint64_t kPhase = 0x00;
  static constexpr uint64_t kListener = 0x04;
  static constexpr uint64_t kConn = 0x08;
  static constexpr uint64_t kIndex = 0x0c;        // handshake progress
  static constexpr uint64_t kSuffixCount = 0x10;  // commands after handshake

  enum Site : uint16_t {
    kSiteBoot = 0x301,
    kSiteAccept = 0x302,
    kSiteHandshakeOk = 0x303,
    kSiteHandshakeDone = 0x304,
    kSiteHandshakeFail = 0x305,
    kSiteCmdBase = 0x310,  // 'A'..'H' occupy 0x310..0x317
    kSiteCmdSubBase = 0x320,
    kSiteCmdOther = 0x330,
  };

 public:
  explicit LongPrefixTarget(uint32_t handshake_len = 100)
      : handshake_len_(handshake_len) {}

  std::string name() const override { return "longprefix"; }
  std::unique_ptr<Target> clone() const override {
    return std::make_unique<LongPrefixTarget>(*this);
  }
  uint32_t handshake_len() const { return handshake_len_; }

  StepOutcome step(TargetCtx& ctx) override {
    PagedMemory& m = ctx.mem;
    if (m.read_u32(kPhase) == 0) {
      HandleId l = ctx.net.listen("tcp:7777");
      m.write_u32(kListener, l + 1);
      m.write_u32(kPhase, 1);
      ctx.edge(kSiteBoot);
      return StepOutcome::progress();
    }

    HandleId listener = m.read_u32(kListener) - 1;
    uint32_t conn_plus = m.read_u32(kConn);
    std::vector<HandleId> handles{listener};
    if (conn_plus) handles.push_back(conn_plus - 1);
    auto ready = ctx.net.readiness(handles);
    if (ready.empty()) return StepOutcome::need_input();

    if (ready[0] == listener) {
      HandleId c = *ctx.net.accept(listener);
      if (!conn_plus) {
        m.write_u32(kConn, c + 1);
        ctx.edge(kSiteAccept);
      } else {
        ctx.net.close(c);
      }
      return StepOutcome::progress();
    }

    RecvResult r = ctx.net.recv(conn_plus - 1, 4096);
    if (r.kind == RecvResult::kPeerClosed) return StepOutcome::finished();
    if (r.kind == RecvResult::kWouldBlock) return StepOutcome::need_input();

    uint32_t idx = m.read_u32(kIndex);
    if (idx < handshake_len_) {
      if (r.data != longprefix_expected_packet(idx)) {
        ctx.edge(kSiteHandshakeFail);
        return StepOutcome::finished();  // early exit on any mismatch
      }
      m.write_u32(kIndex, idx + 1);
      ctx.edge(idx + 1 == handshake_len_ ? kSiteHandshakeDone : kSiteHandshakeOk);
      return StepOutcome::progress();
    }

    uint8_t b = r.data[0];
    if (b >= 'A' && b <= 'H') {
      ctx.edge(uint16_t(kSiteCmdBase + (b - 'A')));
      if (b == 'D' && r.data.size() >= 2 && r.data[1] >= '0' && r.data[1] <= '3')
        ctx.edge(uint16_t(kSiteCmdSubBase + (r.data[1] - '0')));
    } else {
      ctx.edge(kSiteCmdOther);
    }
    m.write_u32(kSuffixCount, m.read_u32(kSuffixCount) + 1);
    return StepOutcome::progress();
  }

 private:
  uint32_t handshake_len_;
};

}  // namespace seqfuzz

#endif  // SEQFUZZ_TARGETS_LONGPREFIX_HPP
