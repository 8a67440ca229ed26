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

#include "seqfuzz/config.hpp"
#include "seqfuzz/fuzz/campaign.hpp"
#include "support/exec_helpers.hpp"

using namespace seqfuzz;
using namespace seqfuzz::testsupport;

namespace {

QueueEntry make_entry(uint32_t packets) {
  QueueEntry e;
  std::vector<Bytes> pkts(packets, to_bytes("x"));
  e.program = make_stream_program(stream_spec(), pkts);
  e.packet_count = packets;
  return e;
}

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() / ("seqfuzz_" + name + "_" +
                                                     std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("policy none always selects the root") {
  PolicyConfig cfg;
  cfg.policy = Policy::kNone;
  QueueEntry e = make_entry(10);
  Rng rng(1);
  for (int i = 0; i < 100; i++) REQUIRE(choose_placement(cfg, e, rng).root);
}

TEST_CASE("short sequences select the root under every policy") {
  Rng rng(2);
  for (Policy p : {Policy::kBalanced, Policy::kAggressive}) {
    PolicyConfig cfg;
    cfg.policy = p;
    QueueEntry e = make_entry(3);
    for (int i = 0; i < 200; i++) REQUIRE(choose_placement(cfg, e, rng).root);
  }
}

TEST_CASE("balanced picks the root 4% of the time at n=10") {
  PolicyConfig cfg;
  cfg.policy = Policy::kBalanced;
  QueueEntry e = make_entry(10);
  Rng rng(3);
  int root = 0, second_half = 0, total = 100000;
  for (int i = 0; i < total; i++) {
    Placement pl = choose_placement(cfg, e, rng);
    if (pl.root) {
      root++;
    } else {
      REQUIRE(pl.packet_index >= 1);
      REQUIRE(pl.packet_index <= 9);
      if (pl.packet_index >= 5) second_half++;
    }
  }
  double root_freq = double(root) / total;
  REQUIRE(root_freq > 0.035);
  REQUIRE(root_freq < 0.045);
  // second-half draws come from both branches; must clearly dominate
  REQUIRE(double(second_half) / (total - root) > 0.6);
}

TEST_CASE("aggressive cursor cycles n-1 .. 1 then wraps") {
  PolicyConfig cfg;
  cfg.policy = Policy::kAggressive;
  QueueEntry e = make_entry(5);
  Rng rng(4);
  std::vector<uint32_t> seen;
  for (int round = 0; round < 10; round++) {
    Placement pl = choose_placement(cfg, e, rng);
    REQUIRE_FALSE(pl.root);
    seen.push_back(pl.packet_index);
    e.iters_since_new = cfg.reuse_limit;  // force a stall
  }
  REQUIRE(seen == std::vector<uint32_t>{4, 3, 2, 1, 4, 3, 2, 1, 4, 3});
  // the decrement consumes the stall counter
  choose_placement(cfg, e, rng);
  REQUIRE(e.iters_since_new == 0);
}

TEST_CASE("aggressive cursor stays put while novelty flows") {
  PolicyConfig cfg;
  cfg.policy = Policy::kAggressive;
  QueueEntry e = make_entry(8);
  Rng rng(5);
  for (int i = 0; i < 5; i++) {
    Placement pl = choose_placement(cfg, e, rng);
    REQUIRE(pl.packet_index == 7);
    e.iters_since_new = 10;  // below the reuse limit
  }
}

TEST_CASE("scheduling: single entry, starvation freedom, novelty weighting") {
  Rng rng(6);
  Queue q;
  q.add(make_entry(2).program, 1, 2, 10);
  for (int i = 0; i < 50; i++) REQUIRE(q.schedule_next(rng).id == 0);

  Queue q10;
  for (int i = 0; i < 10; i++) q10.add(make_entry(2).program, uint64_t(i + 1), 2, 100);
  std::vector<int> picked(10, 0);
  for (int i = 0; i < 10000; i++) picked[size_t(q10.schedule_next(rng).id)]++;
  for (int i = 0; i < 10; i++) REQUIRE(picked[size_t(i)] >= 1);

  Queue q2;
  QueueEntry& fresh = q2.add(make_entry(2).program, 1, 2, 100);
  QueueEntry& stale = q2.add(make_entry(2).program, 2, 2, 100);
  fresh.iters_since_new = 0;
  stale.iters_since_new = 1000;
  int fresh_picks = 0, total = 20000;
  for (int i = 0; i < total; i++)
    if (q2.schedule_next(rng).id == fresh.id) fresh_picks++;
  REQUIRE(fresh_picks > total / 2);  // 4:1 weight plus RR floor
  (void)stale;
}

TEST_CASE("policy none never creates incremental snapshots") {
  Guest g = Guest::boot(make_target("ftp_like"), stream_spec());
  Queue queue;
  GlobalCoverage global;
  CoverageMap cov;
  Rng rng(7);
  FuzzContext ctx;
  ctx.spec = &stream_spec();
  ctx.policy.policy = Policy::kNone;
  ctx.policy.reuse_limit = 10;
  ctx.guest = &g;
  ctx.queue = &queue;
  ctx.global = &global;
  ctx.cov = &cov;
  ctx.rng = &rng;

  QueueEntry& e = queue.add(make_entry(6).program, 1, 6, 10);
  for (int i = 0; i < 20; i++) fuzz_entry(e, ctx);
  REQUIRE(ctx.inc_created == 0);
  REQUIRE(g.mem().snapshot_creations() == 1);  // the root only
}

TEST_CASE("incremental rounds skip the frozen prefix and count it") {
  TargetOptions opts;
  opts.longprefix_handshake = 10;
  Guest g = Guest::boot(make_target("longprefix", opts), stream_spec());

  std::vector<Bytes> pkts;
  for (uint32_t i = 0; i < 10; i++) pkts.push_back(longprefix_expected_packet(i));
  for (int i = 0; i < 4; i++) pkts.push_back(to_bytes("A"));
  BytecodeProgram seed = make_stream_program(stream_spec(), pkts);

  Queue queue;
  GlobalCoverage global;
  CoverageMap cov;
  Rng rng(8);
  FuzzContext ctx;
  ctx.spec = &stream_spec();
  ctx.policy.policy = Policy::kAggressive;
  ctx.policy.reuse_limit = 50;
  ctx.guest = &g;
  ctx.queue = &queue;
  ctx.global = &global;
  ctx.cov = &cov;
  ctx.rng = &rng;

  QueueEntry& e = queue.add(seed, 1, count_packets(stream_spec(), seed), 15);
  REQUIRE(e.packet_count == 14);
  FuzzOutcome out = fuzz_entry(e, ctx);
  REQUIRE_FALSE(out.placement.root);
  REQUIRE(out.placement.packet_index == 13);  // first schedule: end of input
  REQUIRE(ctx.inc_created == 1);
  REQUIRE(ctx.inc_reuses == 50);
  REQUIRE(ctx.packets_skipped == 50 * 13);
  REQUIRE(ctx.execs == 51);
  // mean ops per exec: one 15-op prefix run plus 50 suffix runs of ~1 op
  // (mutations may append a few); far below the 15-op full cost
  double mean = 0;
  (void)mean;
}

TEST_CASE("prefix that cannot reach the marker falls back to root") {
  Guest g = Guest::boot(make_target("ftp_like"), stream_spec());
  // QUIT at packet 2 ends the session long before a packet-5 snapshot
  std::vector<Bytes> pkts{to_bytes("USER a\r\n"), to_bytes("QUIT\r\n"),
                          to_bytes("NOOP\r\n"), to_bytes("NOOP\r\n"),
                          to_bytes("NOOP\r\n"), to_bytes("NOOP\r\n")};
  BytecodeProgram seed = make_stream_program(stream_spec(), pkts);

  Queue queue;
  GlobalCoverage global;
  CoverageMap cov;
  Rng rng(9);
  FuzzContext ctx;
  ctx.spec = &stream_spec();
  ctx.policy.policy = Policy::kAggressive;
  ctx.policy.reuse_limit = 5;
  ctx.guest = &g;
  ctx.queue = &queue;
  ctx.global = &global;
  ctx.cov = &cov;
  ctx.rng = &rng;

  QueueEntry& e = queue.add(seed, 1, 6, 7);
  FuzzOutcome out = fuzz_entry(e, ctx);
  REQUIRE(out.fell_back_to_root);
  REQUIRE(e.unstable);
  REQUIRE(ctx.inc_created == 0);
  // subsequent schedules go straight to the root
  Placement pl = choose_placement(ctx.policy, e, rng);
  REQUIRE(pl.root);
}

TEST_CASE("crash store: dedup by site, reproducers listed, replay contract") {
  TempDir tmp("crash_store");
  CrashStore store(tmp.path);
  Guest g = Guest::boot(make_target("ftp_like"), stream_spec());

  auto crasher = [&](const std::string& user) {
    std::vector<Bytes> pkts{to_bytes("USER " + user + "\r\n"), to_bytes("PASS b\r\n"),
                            to_bytes("MODE X\r\n"), to_bytes("CRSH\r\n")};
    return make_stream_program(stream_spec(), pkts);
  };

  CrashRecord first = store.report(g, crasher("a"), kCrashFtpStateful);
  REQUIRE_FALSE(first.duplicate);
  REQUIRE_FALSE(first.quarantined);
  CrashRecord second = store.report(g, crasher("zz"), kCrashFtpStateful);
  REQUIRE(second.duplicate);
  REQUIRE(store.unique_count() == 1);
  REQUIRE(store.reproducers(first.id).size() == 2);

  // the filed reproducer replays as a crash 3/3
  BytecodeProgram repro = program_parse(stream_spec(), read_file(first.path));
  for (int i = 0; i < 3; i++) {
    CoverageMap cov;
    ExecResult r = g.execute(repro, StartPoint::kRoot, cov);
    REQUIRE(r.exit == ExecResult::kCrashed);
    REQUIRE(r.crash_site == kCrashFtpStateful);
  }
}

TEST_CASE("flaky crashes are quarantined, not filed") {
  // Deliberately hides state outside mem/aux so the crash does not replay.
  struct FlakyTarget : Target {
    std::shared_ptr<int> counter = std::make_shared<int>(0);
    std::string name() const override { return "flaky"; }
    std::unique_ptr<Target> clone() const override {
      return std::make_unique<FlakyTarget>(*this);
    }
    StepOutcome step(TargetCtx& ctx) override {
      if (ctx.mem.read_u32(0) == 0) {
        ctx.net.listen("x");
        ctx.mem.write_u32(0, 1);
        return StepOutcome::progress();
      }
      if ((*counter)++ == 1) return StepOutcome::crashed(77);
      return StepOutcome::need_input();
    }
  };
  TempDir tmp("quarantine");
  CrashStore store(tmp.path);
  Guest g = Guest::boot(std::make_unique<FlakyTarget>(), stream_spec());
  BytecodeProgram p = make_stream_program(stream_spec(), {to_bytes("x")});
  CrashRecord rec = store.report(g, p, 77);
  REQUIRE(rec.quarantined);
  REQUIRE(store.unique_count() == 0);
  REQUIRE(store.quarantined_count() == 1);
}

TEST_CASE("campaign finds the stateful ftp crash from the session seed") {
  TempDir tmp("campaign_ftp");
  CampaignConfig cfg;
  cfg.target = "ftp_like";
  cfg.policy.policy = Policy::kBalanced;
  cfg.workers = 1;
  cfg.rng_seed = 1234;
  cfg.max_execs = 300000;
  cfg.duration_sec = 120;
  cfg.out_dir = tmp.path + "/out";
  cfg.stop_on_crash_site = kCrashFtpStateful;

  std::vector<Bytes> session{to_bytes("USER a\r\n"), to_bytes("PASS b\r\n"),
                             to_bytes("MODE S\r\n"), to_bytes("LIST\r\n"),
                             to_bytes("CRSH\r\n"),  to_bytes("QUIT\r\n")};
  Campaign c(cfg, {make_stream_program(stream_spec(), session)});
  CampaignSummary s = c.run();
  REQUIRE(s.stopped_on_crash);
  REQUIRE(s.crashes_unique >= 1);
  REQUIRE(s.root_snapshots_live == 1);
  REQUIRE(std::filesystem::exists(cfg.out_dir + "/stats.csv"));
  REQUIRE(std::filesystem::exists(cfg.out_dir + "/config"));
  REQUIRE(std::filesystem::exists(cfg.out_dir + "/global_cov.bin"));
}

TEST_CASE("single-worker campaigns are deterministic given a seed") {
  auto artifacts = [](const std::string& dir, uint64_t seed) {
    CampaignConfig cfg;
    cfg.target = "ftp_like";
    cfg.policy.policy = Policy::kAggressive;
    cfg.workers = 1;
    cfg.rng_seed = seed;
    cfg.max_execs = 3000;
    cfg.out_dir = dir;
    cfg.sync_interval_sec = 1e9;  // keep the trajectory free of rescans
    std::vector<Bytes> session{to_bytes("USER a\r\n"), to_bytes("PASS b\r\n"),
                               to_bytes("LIST\r\n"), to_bytes("NOOP\r\n"),
                               to_bytes("QUIT\r\n")};
    Campaign c(cfg, {make_stream_program(stream_spec(), session)});
    CampaignSummary s = c.run();
    std::vector<std::string> names;
    for (const auto& f : std::filesystem::directory_iterator(dir + "/queue"))
      names.push_back(f.path().filename().string());
    std::sort(names.begin(), names.end());
    Bytes global = read_file(dir + "/global_cov.bin");
    return std::tuple(s.execs, s.edges_found, names, global, s.crashes_unique);
  };
  TempDir a("det_a"), b("det_b");
  auto ra = artifacts(a.path + "/out", 99);
  auto rb = artifacts(b.path + "/out", 99);
  REQUIRE(ra == rb);
}

TEST_CASE("config files parse key=value with comments") {
  ConfigMap m = parse_config_text(
      "# campaign defaults\n"
      "policy=aggressive\n"
      "reuse_limit=50   # iterations per snapshot\n"
      "\n"
      "op_budget=1000000\n",
      "test");
  REQUIRE(m.at("policy") == "aggressive");
  REQUIRE(m.at("reuse_limit") == "50");
  REQUIRE(m.at("op_budget") == "1000000");
  REQUIRE_THROWS_AS(parse_config_text("nonsense\n", "test"), ConfigError);
}
