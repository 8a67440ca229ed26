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

// Deterministic simulated guests. A guest is a target's pure transition
// logic plus a paged memory and an aux blob (socket emulation tables, target
// RNG, edge-chain state); every piece of mutable target state lives in the
// memory or the aux so snapshots capture execution exactly.
//
// Targets are coroutine-style step functions returning control requests
// (progress / need-input / finished / crashed); the engine loops: it
// delivers one bytecode op into the emulation layer, then steps the target
// until it blocks. The root snapshot is taken automatically at the target's
// first input demand during boot, directly before the first byte of fuzz
// input. A snapshot marker inside a program triggers creation of the
// worker's incremental snapshot mid-run; later executions can start from it
// and pay only for the remaining suffix.

#ifndef SEQFUZZ_GUEST_HPP
#define SEQFUZZ_GUEST_HPP

#include "seqfuzz/bytecode.hpp"
#include "seqfuzz/coverage.hpp"
#include "seqfuzz/emu_net.hpp"
#include "seqfuzz/paged_state.hpp"

namespace seqfuzz {

inline constexpr uint64_t kDefaultStepBudget = 1'000'000;

struct StepOutcome {
  enum Kind { kProgress, kNeedInput, kFinished, kCrashed } kind = kProgress;
  uint32_t crash_site = 0;

  static StepOutcome progress() { return {kProgress, 0}; }
  static StepOutcome need_input() { return {kNeedInput, 0}; }
  static StepOutcome finished() { return {kFinished, 0}; }
  static StepOutcome crashed(uint32_t site) { return {kCrashed, site}; }
};

class TargetCtx {
 public:
  TargetCtx(PagedMemory& mem, EmuNet& net, CoverageMap* cov, uint64_t& rng_state,
            uint16_t& prev_loc)
      : mem(mem), net(net), cov_(cov), rng_state_(rng_state), prev_loc_(prev_loc) {}

  PagedMemory& mem;
  EmuNet& net;

  // AFL-style edge event: hashes (prev, cur) into the coverage map and
  // advances the chain. The chain state lives in the aux blob so snapshot
  // restores reproduce coverage exactly.
  void edge(uint16_t site) {
    if (cov_) cov_->record_edge(prev_loc_, site);
    prev_loc_ = site;
  }

  // Maximization feedback, written to the coverage map's reserved tail.
  void feedback(size_t bucket) {
    if (cov_) cov_->record_feedback(bucket);
  }

  uint64_t rng_next() {
    // xorshift64; state is part of the aux blob.
    uint64_t x = rng_state_ ? rng_state_ : 0x9e3779b97f4a7c15ull;
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    rng_state_ = x;
    return x;
  }

 private:
  CoverageMap* cov_;
  uint64_t& rng_state_;
  uint16_t& prev_loc_;
};

// Pure transition logic. Implementations must keep all mutable state in
// ctx.mem / ctx.net / the ctx rng, and must not record edges or touch state
// on a blocked probe (a step that just returns need_input), so that pausing
// and resuming delivery is unobservable.
class Target {
 public:
  virtual ~Target() = default;
  virtual std::string name() const = 0;
  virtual StepOutcome step(TargetCtx& ctx) = 0;
  virtual std::unique_ptr<Target> clone() const = 0;
  virtual size_t mem_pages() const { return 16; }
  virtual size_t mem_page_size() const { return 4096; }
};

struct ExecResult {
  enum Exit { kFinished, kCrashed, kTimeout } exit = kFinished;
  uint32_t crash_site = 0;
  uint64_t ops_executed = 0;
  uint64_t packets_consumed = 0;
  uint64_t bytes_delivered = 0;
  uint64_t steps = 0;
  bool snapshot_created = false;

  bool crashed() const { return exit == kCrashed; }
};

enum class StartPoint { kRoot, kIncremental };

struct ExecOptions {
  bool take_snapshot = false;        // create the incremental at the marker
  bool stop_after_snapshot = false;  // end the run right after creating it
  uint32_t remirror_interval = kDefaultRemirrorInterval;
};

enum class GuestStatus { kBooting, kAwaitingInput, kDone, kCrashed };

class BootError : public std::runtime_error {
 public:
  explicit BootError(const std::string& msg) : std::runtime_error(msg) {}
};

class ExecError : public std::logic_error {
 public:
  explicit ExecError(const std::string& msg) : std::logic_error(msg) {}
};

class Guest {
 public:
  // Runs the target's init until its first input demand, then captures the
  // root snapshot of memory and aux. Crash, exit, or budget exhaustion
  // during boot is an error.
  static Guest boot(std::unique_ptr<Target> target, const FormatSpec& spec,
                    uint64_t step_budget = kDefaultStepBudget) {
    Guest g(std::move(target), spec);
    g.status_ = GuestStatus::kBooting;
    uint64_t steps = 0;
    while (true) {
      if (steps++ >= step_budget) throw BootError("boot exceeded step budget");
      TargetCtx ctx(g.mem_, g.net_, nullptr, g.rng_state_, g.prev_loc_);
      StepOutcome out = g.target_->step(ctx);
      if (out.kind == StepOutcome::kNeedInput) break;
      if (out.kind == StepOutcome::kFinished)
        throw BootError("target finished during boot");
      if (out.kind == StepOutcome::kCrashed)
        throw BootError("target crashed during boot (site " +
                        std::to_string(out.crash_site) + ")");
    }
    g.root_ = g.mem_.snapshot_root(g.serialize_aux());
    g.status_ = GuestStatus::kAwaitingInput;
    return g;
  }

  // Fresh worker guest sharing this guest's root snapshot. Must be called
  // at the root point (right after boot).
  Guest clone_for_worker() const {
    Guest g(target_->clone(), *spec_);
    g.mem_ = mem_.clone();
    g.net_ = net_;
    g.rng_state_ = rng_state_;
    g.prev_loc_ = prev_loc_;
    g.root_ = root_;
    g.status_ = GuestStatus::kAwaitingInput;
    return g;
  }

  // Rebuilds a guest around transplanted state; behavior must be identical
  // to the original (no hidden state outside mem/aux).
  static Guest transplant(std::unique_ptr<Target> target, const FormatSpec& spec,
                          PagedMemory mem, const AuxState& aux, RootSnapshotPtr root) {
    Guest g(std::move(target), spec);
    g.mem_ = std::move(mem);
    g.restore_aux(aux);
    g.root_ = std::move(root);
    g.status_ = GuestStatus::kAwaitingInput;
    return g;
  }

  ExecResult execute(const BytecodeProgram& p, StartPoint start, CoverageMap& cov,
                     uint64_t step_budget = kDefaultStepBudget,
                     ExecOptions opts = {}) {
    uint32_t cursor = 0;
    if (start == StartPoint::kRoot) {
      mem_.restore_root(*root_);
      restore_aux(root_->aux());
    } else {
      if (!inc_) throw ExecError("no incremental snapshot to start from");
      if (!p.snapshot_index || *p.snapshot_index != inc_k_)
        throw ExecError("program snapshot marker does not match the snapshot");
      if (prefix_bytes(p, inc_k_) != inc_prefix_)
        throw ExecError("program prefix differs from the snapshot's frozen prefix");
      mem_.restore_incremental(*inc_);
      restore_aux(inc_->aux());
      cursor = inc_k_;
    }
    net_.reset_run_counters();

    ExecResult res;
    bool alive = true;
    uint32_t n = uint32_t(p.ops.size());
    for (uint32_t i = cursor; i < n; i++) {
      bool at_marker = p.snapshot_index && *p.snapshot_index == i &&
                       !(start == StartPoint::kIncremental && i == cursor);
      if (at_marker && alive && opts.take_snapshot) {
        inc_ = mem_.snapshot_incremental(root_, serialize_aux(), std::move(inc_),
                                         opts.remirror_interval);
        inc_k_ = i;
        inc_prefix_ = prefix_bytes(p, i);
        res.snapshot_created = true;
        if (opts.stop_after_snapshot) {
          res.exit = ExecResult::kFinished;
          return finish(res);
        }
      }
      deliver(p.ops[i], i);
      res.ops_executed++;
      if (alive) {
        alive = run_target(cov, step_budget, res);
        if (res.exit == ExecResult::kTimeout) return finish(res);
      }
    }
    net_.set_exhausted(true);
    if (alive) run_target(cov, step_budget, res);
    return finish(res);
  }

  const RootSnapshotPtr& root() const { return root_; }
  bool has_incremental() const { return inc_.has_value(); }
  uint32_t incremental_index() const { return inc_k_; }
  void drop_incremental() { inc_.reset(); }

  PagedMemory& mem() { return mem_; }
  const PagedMemory& mem() const { return mem_; }
  EmuNet& net() { return net_; }
  GuestStatus status() const { return status_; }
  const Target& target() const { return *target_; }
  const FormatSpec& spec() const { return *spec_; }

  AuxState serialize_aux() const {
    ByteWriter w;
    w.u32(1);  // version
    w.blob(net_.serialize());
    w.u64(rng_state_);
    w.u16(prev_loc_);
    return AuxState{w.take()};
  }

 private:
  Guest(std::unique_ptr<Target> target, const FormatSpec& spec)
      : target_(std::move(target)),
        spec_(&spec),
        mem_(target_->mem_pages(), target_->mem_page_size()) {}

  void restore_aux(const AuxState& aux) {
    ByteReader r(aux.blob);
    uint32_t version = r.u32();
    if (version != 1) throw DecodeError("unsupported aux version", 0);
    net_ = EmuNet::deserialize(r.blob());
    rng_state_ = r.u64();
    prev_loc_ = r.u16();
  }

  void deliver(const Op& op, uint32_t slot) {
    const NodeType& node = spec_->nodes[op.node_id];
    if (node.produces && node.borrows.empty()) {
      net_.deliver_conn_open(slot);
    } else if (node.has_data() && !node.borrows.empty()) {
      net_.deliver_packet(op.refs[0], slot, op.payload);
    }
    // other node shapes carry no network effect
  }

  // Steps the target until it blocks or the run ends. Returns whether the
  // target can still make progress.
  bool run_target(CoverageMap& cov, uint64_t step_budget, ExecResult& res) {
    while (true) {
      if (res.steps >= step_budget) {
        res.exit = ExecResult::kTimeout;
        return false;
      }
      TargetCtx ctx(mem_, net_, &cov, rng_state_, prev_loc_);
      StepOutcome out = target_->step(ctx);
      res.steps++;
      switch (out.kind) {
        case StepOutcome::kProgress:
          break;
        case StepOutcome::kNeedInput:
          if (net_.exhausted()) {
            // Input fully consumed and the target is idle: test finished.
            res.exit = ExecResult::kFinished;
            return false;
          }
          return true;
        case StepOutcome::kFinished:
          res.exit = ExecResult::kFinished;
          return false;
        case StepOutcome::kCrashed:
          res.exit = ExecResult::kCrashed;
          res.crash_site = out.crash_site;
          return false;
      }
    }
  }

  ExecResult finish(ExecResult res) {
    res.packets_consumed = net_.packets_consumed();
    res.bytes_delivered = net_.bytes_delivered();
    status_ = res.exit == ExecResult::kCrashed ? GuestStatus::kCrashed
                                               : GuestStatus::kDone;
    return res;
  }

  std::unique_ptr<Target> target_;
  const FormatSpec* spec_;
  PagedMemory mem_;
  EmuNet net_;
  uint64_t rng_state_ = 0;
  uint16_t prev_loc_ = 0;

  RootSnapshotPtr root_;
  std::optional<IncrementalSnapshot> inc_;
  uint32_t inc_k_ = 0;
  Bytes inc_prefix_;
  GuestStatus status_ = GuestStatus::kBooting;
};

}  // namespace seqfuzz

#endif  // SEQFUZZ_GUEST_HPP
