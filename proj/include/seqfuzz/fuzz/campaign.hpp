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

// The campaign loop. fuzz_entry runs one scheduling round for one queue
// entry: pick a snapshot placement, establish the incremental snapshot by
// executing the prefix once from the root, then run reuse_limit mutated
// suffixes against it before discarding it and returning to the root.
// Workers are independent single-threaded loops sharing only the immutable
// root snapshot and the campaign directories (append-only files, atomic
// renames); they exchange corpus entries by rescanning the shared queue
// directory every 30 seconds.

#ifndef SEQFUZZ_FUZZ_CAMPAIGN_HPP
#define SEQFUZZ_FUZZ_CAMPAIGN_HPP

#include <atomic>
#include <chrono>
#include <functional>
#include <set>
#include <thread>

#include "seqfuzz/builder.hpp"
#include "seqfuzz/fuzz/crash_store.hpp"
#include "seqfuzz/fuzz/policy.hpp"
#include "seqfuzz/fuzz/queue.hpp"
#include "seqfuzz/mutator.hpp"
#include "seqfuzz/targets/registry.hpp"

namespace seqfuzz {

struct FuzzContext {
  const FormatSpec* spec = nullptr;
  PolicyConfig policy;
  uint64_t step_budget = kDefaultStepBudget;
  uint32_t remirror_interval = kDefaultRemirrorInterval;
  Guest* guest = nullptr;
  Queue* queue = nullptr;
  GlobalCoverage* global = nullptr;
  CoverageMap* cov = nullptr;
  CrashStore* crashes = nullptr;  // may be null (no filing, reports returned raw)
  Rng* rng = nullptr;

  // round instrumentation, aggregated by the caller
  uint64_t execs = 0;
  uint64_t inc_created = 0;
  uint64_t inc_reuses = 0;
  uint64_t packets_skipped = 0;
};

struct NovelEntry {
  BytecodeProgram program;  // canonical, marker stripped
  uint64_t cov_hash = 0;
};

struct FuzzOutcome {
  Placement placement;
  std::vector<NovelEntry> novel;
  std::vector<CrashRecord> filed;  // after 3x replay, when a store is set
  uint64_t crashes_seen = 0;
  bool fell_back_to_root = false;
};

namespace detail {

struct PendingCrash {
  BytecodeProgram program;
  uint32_t site;
};

// Executes, classifies coverage against the worker's global map, queues
// novel inputs (canonical form), and collects crashes for deferred filing
// (replaying immediately would tear down the active incremental snapshot).
inline ExecResult run_and_classify(FuzzContext& ctx, QueueEntry& e,
                                   const BytecodeProgram& prog, StartPoint sp,
                                   ExecOptions opts, FuzzOutcome& out,
                                   std::vector<PendingCrash>& pending) {
  ExecResult r = ctx.guest->execute(prog, sp, *ctx.cov, ctx.step_budget, opts);
  ctx.execs++;
  e.observe_cost(r.ops_executed);
  uint64_t hash = GlobalCoverage::map_hash(*ctx.cov);
  Novelty nov = ctx.global->merge_and_classify(*ctx.cov);
  if (r.crashed()) {
    pending.push_back(PendingCrash{prog.without_marker(), r.crash_site});
    out.crashes_seen++;
  }
  if (nov != Novelty::kNone) {
    e.iters_since_new = 0;
    if (!r.crashed()) {
      BytecodeProgram canonical = prog.without_marker();
      if (!ctx.queue->contains_hash(hash)) {
        ctx.queue->add(canonical, hash, count_packets(*ctx.spec, canonical),
                       r.ops_executed);
        out.novel.push_back(NovelEntry{std::move(canonical), hash});
      }
    }
  } else {
    e.iters_since_new++;
  }
  return r;
}

}  // namespace detail

// One scheduling round for one entry.
inline FuzzOutcome fuzz_entry(QueueEntry& e, FuzzContext& ctx) {
  FuzzOutcome out;
  e.times_scheduled++;
  out.placement = choose_placement(ctx.policy, e, *ctx.rng);
  std::vector<BytecodeProgram> corpus = ctx.queue->sample_corpus(*ctx.rng);
  std::vector<detail::PendingCrash> pending;

  bool use_root = out.placement.root;
  uint32_t iterations = ctx.policy.reuse_limit;

  if (!use_root) {
    uint32_t op_k = op_index_after_packet(*ctx.spec, e.program,
                                          out.placement.packet_index);
    BytecodeProgram marked = e.program.with_marker(op_k);
    ExecOptions opts;
    opts.take_snapshot = true;
    opts.stop_after_snapshot = true;
    opts.remirror_interval = ctx.remirror_interval;
    ExecResult pre =
        detail::run_and_classify(ctx, e, marked, StartPoint::kRoot, opts, out, pending);
    if (!pre.snapshot_created) {
      // The entry cannot reach the marker (early exit, crash, or timeout in
      // the prefix): flag it and fall back to the root for this round.
      e.unstable = true;
      use_root = true;
      out.fell_back_to_root = true;
      iterations = iterations > 0 ? iterations - 1 : 0;
    } else {
      ctx.inc_created++;
      for (uint32_t i = 0; i < iterations; i++) {
        BytecodeProgram m = mutate(*ctx.spec, marked, *ctx.rng, corpus, op_k);
        detail::run_and_classify(ctx, e, m, StartPoint::kIncremental, {}, out, pending);
        ctx.inc_reuses++;
        ctx.packets_skipped += out.placement.packet_index;
      }
      ctx.guest->drop_incremental();
    }
  }

  if (use_root) {
    for (uint32_t i = 0; i < iterations; i++) {
      BytecodeProgram m = mutate(*ctx.spec, e.program, *ctx.rng, corpus, 0);
      detail::run_and_classify(ctx, e, m, StartPoint::kRoot, {}, out, pending);
    }
  }

  // File crashes now that no incremental snapshot is in play.
  if (ctx.crashes) {
    for (const auto& pc : pending)
      out.filed.push_back(
          ctx.crashes->report(*ctx.guest, pc.program, pc.site, ctx.step_budget));
  }
  return out;
}

struct CampaignConfig {
  std::string target = "ftp_like";
  TargetOptions target_opts;
  PolicyConfig policy;
  uint32_t workers = 1;
  double duration_sec = 0;  // 0: no wall-clock limit
  uint64_t max_execs = 0;   // 0: no execution limit
  uint64_t rng_seed = 1;
  uint64_t step_budget = kDefaultStepBudget;
  uint32_t remirror_interval = kDefaultRemirrorInterval;
  size_t map_size = kDefaultMapSize;
  std::string out_dir = "campaign_out";
  double sync_interval_sec = 30;
  double stats_interval_sec = 1;
  uint32_t stop_on_crash_site = 0;  // stop once this site is filed
};

struct CampaignSummary {
  uint64_t execs = 0;
  uint64_t edges_found = 0;
  uint64_t corpus_size = 0;
  uint64_t crashes_unique = 0;
  uint64_t crashes_quarantined = 0;
  uint64_t inc_snapshots_created = 0;
  uint64_t inc_reuses = 0;
  uint64_t packets_skipped = 0;
  int64_t root_snapshots_live = 0;
  bool stopped_on_crash = false;
  double seconds = 0;
};

class Campaign {
 public:
  Campaign(CampaignConfig cfg, std::vector<BytecodeProgram> seeds,
           const FormatSpec& spec = stream_spec())
      : cfg_(std::move(cfg)), seeds_(std::move(seeds)), spec_(&spec) {}

  CampaignSummary run(const std::function<bool()>& external_stop = {}) {
    namespace fs = std::filesystem;
    int64_t roots_at_entry = RootSnapshot::live_count();
    fs::create_directories(cfg_.out_dir);
    fs::create_directories(cfg_.out_dir + "/queue");
    write_config_snapshot();

    CrashStore crash_store(cfg_.out_dir);
    Guest booted = Guest::boot(make_target(cfg_.target, cfg_.target_opts), *spec_,
                               cfg_.step_budget);
    if (seeds_.empty()) seeds_.push_back(default_seed());

    start_ = std::chrono::steady_clock::now();
    last_row_time_ = start_;
    last_row_execs_ = 0;
    stop_.store(false);
    total_execs_.store(0);
    std::vector<std::unique_ptr<WorkerState>> workers;
    std::vector<std::thread> threads;
    for (uint32_t w = 0; w < std::max(1u, cfg_.workers); w++) {
      workers.push_back(std::make_unique<WorkerState>());
      workers.back()->index = w;
    }
    for (auto& ws : workers) {
      WorkerState* wsp = ws.get();
      Guest guest = booted.clone_for_worker();
      threads.emplace_back([this, wsp, &crash_store, g = std::move(guest)]() mutable {
        worker_loop(*wsp, std::move(g), crash_store);
      });
    }
    int64_t roots_live = RootSnapshot::live_count() - roots_at_entry;

    std::ofstream stats = open_stats();
    auto last_row = start_;
    auto last_save = start_;
    while (!stop_.load()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      auto now = std::chrono::steady_clock::now();
      if (cfg_.duration_sec > 0 && elapsed(now) >= cfg_.duration_sec) stop_.store(true);
      if (cfg_.max_execs > 0 && total_execs_.load() >= cfg_.max_execs) stop_.store(true);
      if (external_stop && external_stop()) stop_.store(true);
      if (std::chrono::duration<double>(now - last_row).count() >=
          cfg_.stats_interval_sec) {
        write_stats_row(stats, workers, crash_store);
        last_row = now;
      }
      if (std::chrono::duration<double>(now - last_save).count() >= 10) {
        save_global(workers);
        last_save = now;
      }
    }
    for (auto& t : threads) t.join();
    write_stats_row(stats, workers, crash_store);
    save_global(workers);

    CampaignSummary s;
    s.execs = total_execs_.load();
    for (auto& ws : workers) {
      s.inc_snapshots_created += ws->inc_created.load();
      s.inc_reuses += ws->inc_reuses.load();
      s.packets_skipped += ws->packets_skipped.load();
    }
    s.edges_found = merged_edges(workers);
    s.corpus_size = count_queue_files();
    s.crashes_unique = crash_store.unique_count();
    s.crashes_quarantined = crash_store.quarantined_count();
    s.root_snapshots_live = roots_live;
    s.stopped_on_crash = crash_stop_hit_.load();
    s.seconds = elapsed(std::chrono::steady_clock::now());
    return s;
  }

 private:
  struct WorkerState {
    uint32_t index = 0;
    std::atomic<uint64_t> execs{0};
    std::atomic<uint64_t> inc_created{0};
    std::atomic<uint64_t> inc_reuses{0};
    std::atomic<uint64_t> packets_skipped{0};
    std::atomic<uint64_t> queue_size{0};
    std::mutex publish_mutex;
    Bytes published_global;  // serialized class map, refreshed off the hot path
  };

  BytecodeProgram default_seed() const {
    std::vector<Bytes> pkts(4, to_bytes("AA\r\n"));
    return make_stream_program(*spec_, pkts);
  }

  double elapsed(std::chrono::steady_clock::time_point now) const {
    return std::chrono::duration<double>(now - start_).count();
  }

  void write_config_snapshot() const {
    std::string text;
    text += "target=" + cfg_.target + "\n";
    text += std::string("policy=") + policy_name(cfg_.policy.policy) + "\n";
    text += "reuse_limit=" + std::to_string(cfg_.policy.reuse_limit) + "\n";
    text += "min_packets_for_inc=" + std::to_string(cfg_.policy.min_packets_for_inc) + "\n";
    text += "remirror_interval=" + std::to_string(cfg_.remirror_interval) + "\n";
    text += "op_budget=" + std::to_string(cfg_.step_budget) + "\n";
    text += "map_size=" + std::to_string(cfg_.map_size) + "\n";
    text += "workers=" + std::to_string(cfg_.workers) + "\n";
    text += "rng_seed=" + std::to_string(cfg_.rng_seed) + "\n";
    Bytes b = to_bytes(text);
    write_file_atomic(cfg_.out_dir + "/config", b);
  }

  std::ofstream open_stats() {
    std::string path = cfg_.out_dir + "/stats.csv";
    bool fresh = !std::filesystem::exists(path);
    std::ofstream f(path, std::ios::app);
    if (fresh)
      f << "unix_ts,execs,execs_per_sec,edges_found,corpus_size,crashes_unique,"
           "inc_snapshots_created,inc_reuses,packets_skipped\n";
    return f;
  }

  void write_stats_row(std::ofstream& f,
                       const std::vector<std::unique_ptr<WorkerState>>& workers,
                       const CrashStore& crashes) {
    uint64_t execs = total_execs_.load();
    auto now = std::chrono::system_clock::now();
    uint64_t ts = uint64_t(
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch())
            .count());
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              last_row_time_)
                    .count();
    double eps = dt > 0 ? double(execs - last_row_execs_) / dt : 0;
    last_row_time_ = std::chrono::steady_clock::now();
    last_row_execs_ = execs;
    uint64_t inc_created = 0, reuses = 0, skipped = 0;
    for (auto& ws : workers) {
      inc_created += ws->inc_created.load();
      reuses += ws->inc_reuses.load();
      skipped += ws->packets_skipped.load();
    }
    f << ts << ',' << execs << ',' << uint64_t(eps) << ','
      << merged_edges(workers) << ',' << count_queue_files() << ','
      << crashes.unique_count() << ',' << inc_created << ',' << reuses << ','
      << skipped << '\n';
    f.flush();
  }

  uint64_t merged_edges(const std::vector<std::unique_ptr<WorkerState>>& workers) {
    Bytes merged(cfg_.map_size, 0);
    for (auto& ws : workers) {
      std::lock_guard<std::mutex> lock(ws->publish_mutex);
      for (size_t i = 0; i < ws->published_global.size() && i < merged.size(); i++)
        merged[i] |= ws->published_global[i];
    }
    uint64_t edges = 0;
    for (uint8_t b : merged)
      if (b) edges++;
    merged_snapshot_ = std::move(merged);
    return edges;
  }

  void save_global(const std::vector<std::unique_ptr<WorkerState>>& workers) {
    merged_edges(workers);
    write_file_atomic(cfg_.out_dir + "/global_cov.bin", merged_snapshot_);
  }

  uint64_t count_queue_files() const {
    uint64_t n = 0;
    for (const auto& f :
         std::filesystem::directory_iterator(cfg_.out_dir + "/queue"))
      if (f.path().extension() == ".nxb") n++;
    return n;
  }

  static std::string queue_file_name(uint64_t hash) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "q_%016llx.nxb", (unsigned long long)hash);
    return buf;
  }

  void publish_global(WorkerState& ws, const GlobalCoverage& global) {
    std::lock_guard<std::mutex> lock(ws.publish_mutex);
    ws.published_global = global.classes();
  }

  void worker_loop(WorkerState& ws, Guest guest, CrashStore& crash_store) {
    Rng rng(cfg_.rng_seed * 0x9e3779b97f4a7c15ull + ws.index * 0xda942042e4dd58b5ull + 1);
    Queue queue;
    GlobalCoverage global(cfg_.map_size);
    CoverageMap cov(cfg_.map_size);
    global.load(cfg_.out_dir + "/global_cov.bin");  // resume, if present

    FuzzContext ctx;
    ctx.spec = spec_;
    ctx.policy = cfg_.policy;
    ctx.step_budget = cfg_.step_budget;
    ctx.remirror_interval = cfg_.remirror_interval;
    ctx.guest = &guest;
    ctx.queue = &queue;
    ctx.global = &global;
    ctx.cov = &cov;
    ctx.crashes = &crash_store;
    ctx.rng = &rng;

    std::set<std::string> imported;
    auto ingest = [&](const BytecodeProgram& p, std::optional<uint64_t> known_hash) {
      if (!program_validate(*spec_, p).empty()) return;
      ExecResult r = guest.execute(p, StartPoint::kRoot, cov, cfg_.step_budget);
      ctx.execs++;
      uint64_t hash = known_hash ? *known_hash : GlobalCoverage::map_hash(cov);
      global.merge_and_classify(cov);
      if (r.crashed()) {
        crash_store.report(guest, p, r.crash_site, cfg_.step_budget);
        return;
      }
      if (!queue.contains_hash(hash)) {
        queue.add(p.without_marker(), hash, count_packets(*spec_, p), r.ops_executed);
        write_queue_file(p, hash);
      }
    };

    for (const BytecodeProgram& seed : seeds_) ingest(seed, std::nullopt);
    scan_queue_dir(imported, ingest);
    if (queue.empty()) ingest(default_seed(), std::nullopt);
    flush_round(ws, ctx);
    publish_global(ws, global);

    auto last_sync = std::chrono::steady_clock::now();
    while (!stop_.load()) {
      if (cfg_.max_execs > 0 && total_execs_.load() >= cfg_.max_execs) {
        stop_.store(true);
        break;
      }
      QueueEntry& e = queue.schedule_next(rng);
      FuzzOutcome outcome = fuzz_entry(e, ctx);
      for (const NovelEntry& ne : outcome.novel)
        write_queue_file(ne.program, ne.cov_hash);
      for (const CrashRecord& rec : outcome.filed) {
        if (!rec.quarantined && cfg_.stop_on_crash_site != 0 &&
            rec.site == cfg_.stop_on_crash_site) {
          crash_stop_hit_.store(true);
          stop_.store(true);
        }
      }
      flush_round(ws, ctx);
      ws.queue_size.store(queue.size());

      auto now = std::chrono::steady_clock::now();
      if (std::chrono::duration<double>(now - last_sync).count() >=
          cfg_.sync_interval_sec) {
        scan_queue_dir(imported, ingest);
        last_sync = now;
      }
      publish_global(ws, global);
    }
    publish_global(ws, global);
    flush_round(ws, ctx);
  }

  void write_queue_file(const BytecodeProgram& p, uint64_t hash) const {
    std::string path = cfg_.out_dir + "/queue/" + queue_file_name(hash);
    if (std::filesystem::exists(path)) return;
    write_file_atomic(path, program_serialize(p.without_marker()));
  }

  template <typename Ingest>
  void scan_queue_dir(std::set<std::string>& imported, Ingest&& ingest) {
    for (const auto& f :
         std::filesystem::directory_iterator(cfg_.out_dir + "/queue")) {
      std::string name = f.path().filename().string();
      if (f.path().extension() != ".nxb" || imported.count(name)) continue;
      imported.insert(name);
      try {
        BytecodeProgram p = program_parse(*spec_, read_file(f.path().string()));
        uint64_t hash = 0;
        if (name.size() >= 22 && name.rfind("q_", 0) == 0)
          hash = std::stoull(name.substr(2, 16), nullptr, 16);
        ingest(p, hash ? std::optional<uint64_t>(hash) : std::nullopt);
      } catch (const std::exception&) {
        // foreign junk in the queue directory is ignored
      }
    }
  }

  void flush_round(WorkerState& ws, FuzzContext& ctx) {
    total_execs_.fetch_add(ctx.execs);
    ws.execs.fetch_add(ctx.execs);
    ws.inc_created.fetch_add(ctx.inc_created);
    ws.inc_reuses.fetch_add(ctx.inc_reuses);
    ws.packets_skipped.fetch_add(ctx.packets_skipped);
    ctx.execs = ctx.inc_created = ctx.inc_reuses = ctx.packets_skipped = 0;
  }

  CampaignConfig cfg_;
  std::vector<BytecodeProgram> seeds_;
  const FormatSpec* spec_;
  std::atomic<bool> stop_{false};
  std::atomic<bool> crash_stop_hit_{false};
  std::atomic<uint64_t> total_execs_{0};
  std::chrono::steady_clock::time_point start_;
  std::chrono::steady_clock::time_point last_row_time_;
  uint64_t last_row_execs_ = 0;
  Bytes merged_snapshot_;
};

}  // namespace seqfuzz

#endif  // SEQFUZZ_FUZZ_CAMPAIGN_HPP
