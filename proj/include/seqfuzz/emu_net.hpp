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

// In-process socket emulation. The execution engine delivers bytecode ops
// (connection opens, packets) into this layer; the target consumes them
// through a reduced socket API: listen/accept/recv/readiness plus alias and
// close for handle bookkeeping. Packet boundaries are preserved: one recv
// never returns bytes from more than one packet. All state serializes into
// the snapshot aux blob bit-exactly; per-run counters stay outside it.

#ifndef SEQFUZZ_EMU_NET_HPP
#define SEQFUZZ_EMU_NET_HPP

#include <deque>

#include "seqfuzz/common.hpp"

namespace seqfuzz {

using HandleId = uint32_t;

enum class HandleKind : uint8_t { kListener = 0, kConnection = 1 };

class EmuNetError : public std::logic_error {
 public:
  explicit EmuNetError(const std::string& msg) : std::logic_error(msg) {}
};

struct RecvResult {
  enum Kind { kData, kWouldBlock, kPeerClosed } kind;
  Bytes data;
};

class EmuNet {
 public:
  EmuNet() = default;

  // ---- target-facing calls ----

  HandleId listen(const std::string& addr) {
    for (const Listener& l : listeners_)
      if (l.open && l.addr == addr)
        throw EmuNetError("duplicate listener on " + addr);
    listeners_.push_back(Listener{addr, true});
    return new_handle(HandleKind::kListener, uint32_t(listeners_.size() - 1));
  }

  // Returns a fresh connection handle when the next pending connection-open
  // targets this listener; otherwise nothing (would-block).
  std::optional<HandleId> accept(HandleId listener) {
    const HandleRec& h = checked(listener, HandleKind::kListener);
    purge_dead_accepts();
    if (pending_accepts_.empty()) return std::nullopt;
    PendingAccept front = pending_accepts_.front();
    if (front.listener_index != h.index) return std::nullopt;
    pending_accepts_.pop_front();
    HandleId id = new_handle(HandleKind::kConnection, front.conn_index);
    conns_[front.conn_index].aliases.push_back(id);
    return id;
  }

  // Returns at most min(max, bytes left in the head packet); never crosses
  // a packet boundary. Would-block while the program may still deliver data,
  // peer-closed once it cannot.
  RecvResult recv(HandleId handle, size_t max) {
    const HandleRec& h = checked(handle, HandleKind::kConnection);
    Conn& c = conns_[h.index];
    if (c.queue.empty())
      return RecvResult{exhausted_ ? RecvResult::kPeerClosed : RecvResult::kWouldBlock, {}};
    Packet& head = c.queue.front();
    size_t n = std::min(max, head.data.size() - head.offset);
    RecvResult out{RecvResult::kData,
                   Bytes(head.data.begin() + head.offset,
                         head.data.begin() + head.offset + n)};
    head.offset += uint32_t(n);
    bytes_delivered_ += n;
    if (head.offset == head.data.size()) {
      c.queue.pop_front();
      packets_consumed_++;
    }
    return out;
  }

  // The subset of the given handles that can make progress right now: the
  // aliases of the connection holding the earliest undelivered packet, plus
  // the listener targeted by the front pending connection-open.
  std::vector<HandleId> readiness(const std::vector<HandleId>& handles) {
    purge_dead_accepts();
    std::optional<uint32_t> ready_conn;
    uint32_t best_op = UINT32_MAX;
    for (uint32_t ci = 0; ci < conns_.size(); ci++) {
      const Conn& c = conns_[ci];
      if (!c.freed && !c.queue.empty() && c.queue.front().op_index < best_op) {
        best_op = c.queue.front().op_index;
        ready_conn = ci;
      }
    }
    std::optional<uint32_t> ready_listener;
    if (!pending_accepts_.empty())
      ready_listener = pending_accepts_.front().listener_index;

    std::vector<HandleId> out;
    for (HandleId id : handles) {
      const HandleRec& h = checked_any(id);
      if (h.kind == HandleKind::kListener) {
        if (ready_listener && *ready_listener == h.index) out.push_back(id);
      } else {
        if (ready_conn && *ready_conn == h.index) out.push_back(id);
      }
    }
    return out;
  }

  HandleId alias(HandleId handle) {
    uint32_t conn_index = checked(handle, HandleKind::kConnection).index;
    HandleId id = new_handle(HandleKind::kConnection, conn_index);
    conns_[conn_index].aliases.push_back(id);
    return id;
  }

  void close(HandleId handle) {
    if (handle >= handles_.size()) throw EmuNetError("unknown handle");
    HandleRec& h = handles_[handle];
    if (!h.open) throw EmuNetError("double close");
    h.open = false;
    if (h.kind == HandleKind::kListener) {
      listeners_[h.index].open = false;
      return;
    }
    Conn& c = conns_[h.index];
    std::erase(c.aliases, handle);
    if (c.aliases.empty()) {
      c.freed = true;
      c.queue.clear();
    }
  }

  // Outbound data is recorded per connection and otherwise discarded; the
  // fuzzer does not react to responses.
  void send(HandleId handle, std::span<const uint8_t> data) {
    const HandleRec& h = checked(handle, HandleKind::kConnection);
    Bytes& t = conns_[h.index].transcript;
    t.insert(t.end(), data.begin(), data.end());
  }

  // ---- engine-facing delivery ----

  // Registers a pending connection for the first open listener. Dropped
  // when the target never listened.
  void deliver_conn_open(uint32_t producer_slot) {
    std::optional<uint32_t> li;
    for (uint32_t i = 0; i < listeners_.size(); i++)
      if (listeners_[i].open) {
        li = i;
        break;
      }
    if (!li) return;
    conns_.push_back(Conn{producer_slot, false, {}, {}, {}});
    pending_accepts_.push_back(PendingAccept{*li, uint32_t(conns_.size() - 1)});
  }

  // Queues a payload on the connection created by the op at producer_slot.
  // Packets for dropped or fully closed connections vanish; so do empty
  // payloads (sending zero bytes delivers nothing).
  void deliver_packet(uint32_t producer_slot, uint32_t op_index, Bytes payload) {
    if (payload.empty()) return;
    for (Conn& c : conns_) {
      if (c.producer_slot == producer_slot) {
        if (!c.freed) c.queue.push_back(Packet{op_index, 0, std::move(payload)});
        return;
      }
    }
  }

  void set_exhausted(bool v) { exhausted_ = v; }
  bool exhausted() const { return exhausted_; }

  // ---- per-run instrumentation (never serialized) ----

  void reset_run_counters() {
    packets_consumed_ = 0;
    bytes_delivered_ = 0;
  }
  uint64_t packets_consumed() const { return packets_consumed_; }
  uint64_t bytes_delivered() const { return bytes_delivered_; }

  Bytes transcript(HandleId handle) const {
    const HandleRec& h = checked(handle, HandleKind::kConnection);
    return conns_[h.index].transcript;
  }
  Bytes full_transcript() const {
    Bytes out;
    for (const Conn& c : conns_)
      out.insert(out.end(), c.transcript.begin(), c.transcript.end());
    return out;
  }

  // ---- snapshot support ----

  Bytes serialize() const {
    ByteWriter w;
    w.u32(1);  // version
    w.u8(exhausted_ ? 1 : 0);
    w.u32(uint32_t(listeners_.size()));
    for (const Listener& l : listeners_) {
      w.str(l.addr);
      w.u8(l.open ? 1 : 0);
    }
    w.u32(uint32_t(conns_.size()));
    for (const Conn& c : conns_) {
      w.u32(c.producer_slot);
      w.u8(c.freed ? 1 : 0);
      w.u32(uint32_t(c.aliases.size()));
      for (HandleId a : c.aliases) w.u32(a);
      w.u32(uint32_t(c.queue.size()));
      for (const Packet& p : c.queue) {
        w.u32(p.op_index);
        w.u32(p.offset);
        w.blob(p.data);
      }
      w.blob(c.transcript);
    }
    w.u32(uint32_t(handles_.size()));
    for (const HandleRec& h : handles_) {
      w.u8(uint8_t(h.kind));
      w.u8(h.open ? 1 : 0);
      w.u32(h.index);
    }
    w.u32(uint32_t(pending_accepts_.size()));
    for (const PendingAccept& p : pending_accepts_) {
      w.u32(p.listener_index);
      w.u32(p.conn_index);
    }
    return w.take();
  }

  static EmuNet deserialize(std::span<const uint8_t> data) {
    ByteReader r(data);
    uint32_t version = r.u32();
    if (version != 1) throw DecodeError("unsupported emu_net state version", 0);
    EmuNet net;
    net.exhausted_ = r.u8() != 0;
    uint32_t nl = r.u32();
    for (uint32_t i = 0; i < nl; i++) {
      Listener l;
      l.addr = r.str();
      l.open = r.u8() != 0;
      net.listeners_.push_back(std::move(l));
    }
    uint32_t nc = r.u32();
    for (uint32_t i = 0; i < nc; i++) {
      Conn c;
      c.producer_slot = r.u32();
      c.freed = r.u8() != 0;
      uint32_t na = r.u32();
      for (uint32_t a = 0; a < na; a++) c.aliases.push_back(r.u32());
      uint32_t nq = r.u32();
      for (uint32_t q = 0; q < nq; q++) {
        Packet p;
        p.op_index = r.u32();
        p.offset = r.u32();
        p.data = r.blob();
        c.queue.push_back(std::move(p));
      }
      c.transcript = r.blob();
      net.conns_.push_back(std::move(c));
    }
    uint32_t nh = r.u32();
    for (uint32_t i = 0; i < nh; i++) {
      HandleRec h;
      h.kind = HandleKind(r.u8());
      h.open = r.u8() != 0;
      h.index = r.u32();
      net.handles_.push_back(h);
    }
    uint32_t np = r.u32();
    for (uint32_t i = 0; i < np; i++) {
      PendingAccept p;
      p.listener_index = r.u32();
      p.conn_index = r.u32();
      net.pending_accepts_.push_back(p);
    }
    if (!r.done()) throw DecodeError("trailing bytes in emu_net state", r.pos());
    return net;
  }

 private:
  struct Listener {
    std::string addr;
    bool open = false;
  };
  struct Packet {
    uint32_t op_index = 0;
    uint32_t offset = 0;
    Bytes data;
  };
  struct Conn {
    uint32_t producer_slot = 0;
    bool freed = false;
    std::vector<HandleId> aliases;
    std::deque<Packet> queue;
    Bytes transcript;
  };
  struct HandleRec {
    HandleKind kind;
    bool open = false;
    uint32_t index = 0;
  };
  struct PendingAccept {
    uint32_t listener_index = 0;
    uint32_t conn_index = 0;
  };

  HandleId new_handle(HandleKind kind, uint32_t index) {
    handles_.push_back(HandleRec{kind, true, index});
    return HandleId(handles_.size() - 1);
  }

  const HandleRec& checked_any(HandleId id) const {
    if (id >= handles_.size()) throw EmuNetError("unknown handle");
    const HandleRec& h = handles_[id];
    if (!h.open) throw EmuNetError("closed handle");
    return h;
  }
  const HandleRec& checked(HandleId id, HandleKind kind) const {
    const HandleRec& h = checked_any(id);
    if (h.kind != kind) throw EmuNetError("wrong handle kind");
    return h;
  }

  void purge_dead_accepts() {
    while (!pending_accepts_.empty()) {
      const PendingAccept& front = pending_accepts_.front();
      if (listeners_[front.listener_index].open) break;
      pending_accepts_.pop_front();
    }
  }

  std::vector<Listener> listeners_;
  std::vector<Conn> conns_;
  std::vector<HandleRec> handles_;
  std::deque<PendingAccept> pending_accepts_;
  bool exhausted_ = false;

  uint64_t packets_consumed_ = 0;
  uint64_t bytes_delivered_ = 0;
};

}  // namespace seqfuzz

#endif  // SEQFUZZ_EMU_NET_HPP
