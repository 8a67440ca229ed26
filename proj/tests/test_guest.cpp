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

#include <catch2/catch_amalgamated.hpp>

#include "support/exec_helpers.hpp"

using namespace seqfuzz;
using namespace seqfuzz::testsupport;

namespace {

Guest boot_target(const std::string& name, TargetOptions opts = {}) {
  return Guest::boot(make_target(name, opts), stream_spec());
}

BytecodeProgram ftp_session(const std::vector<std::string>& lines) {
  std::vector<Bytes> pkts;
  for (const auto& l : lines) pkts.push_back(to_bytes(l));
  return make_stream_program(stream_spec(), pkts);
}

}  // namespace

TEST_CASE("boot snapshots before the first input byte") {
  Guest g = boot_target("ftp_like");
  REQUIRE(g.status() == GuestStatus::kAwaitingInput);
  REQUIRE(g.root() != nullptr);
  // no input was consumed during boot
  CoverageMap cov;
  ExecResult r = g.execute(ftp_session({"NOOP\r\n"}), StartPoint::kRoot, cov);
  REQUIRE(r.packets_consumed == 1);
}

TEST_CASE("boot is deterministic") {
  Guest a = boot_target("ftp_like");
  Guest b = boot_target("ftp_like");
  REQUIRE(a.root()->full_copy() == b.root()->full_copy());
  REQUIRE(a.root()->aux() == b.root()->aux());
}

TEST_CASE("a target that crashes during init fails boot") {
  struct CrashingTarget : Target {
    std::string name() const override { return "bad"; }
    std::unique_ptr<Target> clone() const override {
      return std::make_unique<CrashingTarget>(*this);
    }
    StepOutcome step(TargetCtx&) override { return StepOutcome::crashed(1); }
  };
  REQUIRE_THROWS_AS(Guest::boot(std::make_unique<CrashingTarget>(), stream_spec()),
                    BootError);
}

TEST_CASE("execution consumes packets and reports counters") {
  Guest g = boot_target("ftp_like");
  CoverageMap cov;
  BytecodeProgram p = ftp_session({"USER a\r\n", "PASS b\r\n", "LIST\r\n", "QUIT\r\n"});
  ExecResult r = g.execute(p, StartPoint::kRoot, cov);
  REQUIRE(r.exit == ExecResult::kFinished);
  REQUIRE(r.ops_executed == 5);
  REQUIRE(r.packets_consumed == 4);
  REQUIRE(r.bytes_delivered == 8 + 8 + 6 + 6);
}

TEST_CASE("executions from the root are deterministic incl. coverage") {
  Guest g = boot_target("ftp_like");
  BytecodeProgram p = ftp_session({"USER a\r\n", "PASS b\r\n", "LIST\r\n"});
  CoverageMap c1, c2;
  g.execute(p, StartPoint::kRoot, c1);
  Bytes mem1(g.mem().bytes().begin(), g.mem().bytes().end());
  g.execute(p, StartPoint::kRoot, c2);
  Bytes mem2(g.mem().bytes().begin(), g.mem().bytes().end());
  REQUIRE(c1 == c2);
  REQUIRE(mem1 == mem2);
}

TEST_CASE("step budget exhaustion yields a timeout result, not an error") {
  Guest g = boot_target("ftp_like");
  CoverageMap cov;
  BytecodeProgram p = ftp_session({"USER a\r\n", "PASS b\r\n"});
  ExecResult r = g.execute(p, StartPoint::kRoot, cov, 3);
  REQUIRE(r.exit == ExecResult::kTimeout);
}

TEST_CASE("the snapshot marker creates the incremental snapshot mid-run") {
  Guest g = boot_target("ftp_like");
  CoverageMap cov;
  BytecodeProgram p =
      ftp_session({"USER a\r\n", "PASS b\r\n", "LIST\r\n", "NOOP\r\n"}).with_marker(3);
  ExecOptions opts;
  opts.take_snapshot = true;
  ExecResult r = g.execute(p, StartPoint::kRoot, cov, kDefaultStepBudget, opts);
  REQUIRE(r.snapshot_created);
  REQUIRE(r.ops_executed == 5);  // marker does not count as an op
  REQUIRE(g.has_incremental());
  REQUIRE(g.incremental_index() == 3);

  // suffix-only execution from the incremental snapshot
  ExecResult r2 = g.execute(p, StartPoint::kIncremental, cov);
  REQUIRE(r2.ops_executed == 2);
  REQUIRE(r2.exit == ExecResult::kFinished);
}

TEST_CASE("without a snapshot request the marker only segments delivery") {
  Guest g = boot_target("ftp_like");
  CoverageMap cov;
  BytecodeProgram plain = ftp_session({"USER a\r\n", "PASS b\r\n", "LIST\r\n"});
  FinalState base = run_full(g, plain);
  BytecodeProgram marked = plain.with_marker(2);
  CoverageMap cov2;
  ExecResult r = g.execute(marked, StartPoint::kRoot, cov2);
  REQUIRE_FALSE(r.snapshot_created);
  REQUIRE(capture(g, cov2, r) == base);
}

TEST_CASE("incremental starts demand a matching frozen prefix") {
  Guest g = boot_target("ftp_like");
  CoverageMap cov;
  BytecodeProgram p = ftp_session({"USER a\r\n", "PASS b\r\n", "LIST\r\n"}).with_marker(2);
  ExecOptions opts;
  opts.take_snapshot = true;
  g.execute(p, StartPoint::kRoot, cov, kDefaultStepBudget, opts);
  REQUIRE(g.has_incremental());

  BytecodeProgram tampered = p;
  tampered.ops[1].payload = to_bytes("USER z\r\n");
  REQUIRE_THROWS_AS(g.execute(tampered, StartPoint::kIncremental, cov), ExecError);

  BytecodeProgram wrong_k = p.with_marker(1);
  REQUIRE_THROWS_AS(g.execute(wrong_k, StartPoint::kIncremental, cov), ExecError);

  g.drop_incremental();
  REQUIRE_THROWS_AS(g.execute(p, StartPoint::kIncremental, cov), ExecError);
}

TEST_CASE("suffix mutations may keep referencing prefix connections") {
  Guest g = boot_target("ftp_like");
  CoverageMap cov;
  BytecodeProgram p = ftp_session({"USER a\r\n", "PASS b\r\n", "NOOP\r\n"}).with_marker(2);
  ExecOptions opts;
  opts.take_snapshot = true;
  opts.stop_after_snapshot = true;
  g.execute(p, StartPoint::kRoot, cov, kDefaultStepBudget, opts);

  Rng rng(4);
  for (int i = 0; i < 50; i++) {
    BytecodeProgram m = mutate(stream_spec(), p, rng, {}, 2);
    ExecResult r = g.execute(m, StartPoint::kIncremental, cov);
    REQUIRE(r.exit != ExecResult::kTimeout);
  }
}

TEST_CASE("incremental-execution equivalence on random ftp programs") {
  Guest g = boot_target("ftp_like");
  Rng rng(2024);
  auto pool = payload_pool("ftp_like");
  int checked = 0;
  for (int round = 0; round < 60; round++) {
    BytecodeProgram p = random_program(rng, stream_spec(), pool);
    FinalState base = run_full(g, p);
    for (uint32_t k = 1; k < p.ops.size(); k++) {
      auto dec = run_decomposed(g, p, k);
      if (!dec) continue;  // target ended before the marker
      checked++;
      if (!(*dec == base)) {
        CAPTURE(round, k, p.ops.size());
        REQUIRE(dec->mem == base.mem);
        REQUIRE(dec->aux == base.aux);
        REQUIRE(dec->cov == base.cov);
        REQUIRE(dec->exit == base.exit);
      }
    }
  }
  REQUIRE(checked > 100);
}

TEST_CASE("no hidden state: transplanted mem+aux reproduce behavior") {
  Guest g = boot_target("ftp_like");
  CoverageMap cov;
  BytecodeProgram p = ftp_session({"USER a\r\n", "PASS b\r\n"});
  g.execute(p, StartPoint::kRoot, cov);

  Guest shell = Guest::transplant(make_target("ftp_like"), stream_spec(),
                                  g.mem().clone(), g.serialize_aux(), g.root());
  BytecodeProgram next = ftp_session({"USER x\r\n", "LIST\r\n", "QUIT\r\n"});
  CoverageMap ca, cb;
  ExecResult ra = g.execute(next, StartPoint::kRoot, ca);
  ExecResult rb = shell.execute(next, StartPoint::kRoot, cb);
  REQUIRE(ra.exit == rb.exit);
  REQUIRE(ca == cb);
  REQUIRE(Bytes(g.mem().bytes().begin(), g.mem().bytes().end()) ==
          Bytes(shell.mem().bytes().begin(), shell.mem().bytes().end()));
  REQUIRE(g.serialize_aux() == shell.serialize_aux());
}

TEST_CASE("worker clones share one root snapshot") {
  int64_t before = RootSnapshot::live_count();
  {
    Guest g = boot_target("ftp_like");
    std::vector<Guest> workers;
    for (int i = 0; i < 8; i++) workers.push_back(g.clone_for_worker());
    REQUIRE(RootSnapshot::live_count() == before + 1);
    CoverageMap cov;
    BytecodeProgram p = ftp_session({"USER a\r\n", "QUIT\r\n"});
    for (Guest& w : workers) {
      ExecResult r = w.execute(p, StartPoint::kRoot, cov);
      REQUIRE(r.exit == ExecResult::kFinished);
    }
    REQUIRE(RootSnapshot::live_count() == before + 1);
  }
  REQUIRE(RootSnapshot::live_count() == before);
}
