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

// Operator CLI: run campaigns, import packet dumps into seed programs,
// replay crash reproducers, and run the snapshot microbenchmark.
//
// Exit codes: 0 ok, 1 usage error, 2 io/data error, 10 crash reproduced
// (replay).

#include <CLI11.hpp>
#include <csignal>
#include <iostream>

#include "seqfuzz/config.hpp"
#include "seqfuzz/fuzz/campaign.hpp"
#include "seqfuzz/seed_import.hpp"

namespace {

using namespace seqfuzz;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitCrashReproduced = 10;

std::atomic<bool> g_interrupted{false};

void handle_signal(int) { g_interrupted.store(true); }

// Flag beats config file beats built-in default.
struct Settings {
  ConfigMap config;
  CLI::App* cmd = nullptr;

  std::string str(const std::string& flag, const std::string& key,
                  const std::string& cli_value, const std::string& fallback) const {
    if (cmd->count(flag)) return cli_value;
    if (auto it = config.find(key); it != config.end()) return it->second;
    return fallback;
  }
  uint64_t num(const std::string& flag, const std::string& key, uint64_t cli_value,
               uint64_t fallback) const {
    if (cmd->count(flag)) return cli_value;
    if (auto it = config.find(key); it != config.end())
      return std::stoull(it->second);
    return fallback;
  }
  double real(const std::string& flag, const std::string& key, double cli_value,
              double fallback) const {
    if (cmd->count(flag)) return cli_value;
    if (auto it = config.find(key); it != config.end()) return std::stod(it->second);
    return fallback;
  }
};

FormatSpec load_spec_or_default(const std::string& path) {
  if (path.empty()) return stream_spec();
  Bytes text = read_file(path);
  return parse_format_spec(std::string(text.begin(), text.end()));
}

std::vector<BytecodeProgram> load_seed_dir(const FormatSpec& spec,
                                           const std::string& dir) {
  std::vector<BytecodeProgram> seeds;
  if (dir.empty()) return seeds;
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("seed directory not found: " + dir);
  std::vector<std::string> names;
  for (const auto& f : std::filesystem::directory_iterator(dir))
    if (f.path().extension() == ".nxb") names.push_back(f.path().string());
  std::sort(names.begin(), names.end());
  for (const std::string& name : names) {
    try {
      seeds.push_back(program_parse(spec, read_file(name)));
    } catch (const std::exception& e) {
      std::cerr << "warning: skipping seed " << name << ": " << e.what() << "\n";
    }
  }
  return seeds;
}

struct FuzzFlags {
  std::string target, spec_path, seeds_dir, policy, out;
  uint64_t workers = 1, rng_seed = 1;
  double duration = 0;
  uint64_t reuse_limit = 0, min_packets = 0, op_budget = 0, remirror = 0,
           map_size = 0, max_execs = 0;
};

int cmd_fuzz(const Settings& st, const FuzzFlags& fl) {
  CampaignConfig cfg;
  cfg.target = st.str("--target", "target", fl.target, "ftp_like");
  std::string policy = st.str("--policy", "policy", fl.policy, "none");
  auto parsed = parse_policy(policy);
  if (!parsed) {
    std::cerr << "unknown policy '" << policy << "'\n";
    return kExitUsage;
  }
  cfg.policy.policy = *parsed;
  cfg.policy.reuse_limit =
      uint32_t(st.num("--reuse-limit", "reuse_limit", fl.reuse_limit, 50));
  cfg.policy.min_packets_for_inc =
      uint32_t(st.num("--min-packets-for-inc", "min_packets_for_inc", fl.min_packets, 4));
  cfg.workers = uint32_t(st.num("--workers", "workers", fl.workers, 1));
  cfg.duration_sec = st.real("--duration", "duration", fl.duration, 0);
  cfg.max_execs = st.num("--max-execs", "max_execs", fl.max_execs, 0);
  cfg.rng_seed = st.num("--rng-seed", "rng_seed", fl.rng_seed, 1);
  cfg.step_budget = st.num("--op-budget", "op_budget", fl.op_budget, kDefaultStepBudget);
  cfg.remirror_interval =
      uint32_t(st.num("--remirror-interval", "remirror_interval", fl.remirror, 2000));
  cfg.map_size = st.num("--map-size", "map_size", fl.map_size, kDefaultMapSize);
  cfg.out_dir = st.str("--out", "out", fl.out, "campaign_out");
  if (auto it = st.config.find("level_file"); it != st.config.end())
    cfg.target_opts.level_text = to_string(read_file(it->second));
  if (auto it = st.config.find("longprefix_handshake"); it != st.config.end())
    cfg.target_opts.longprefix_handshake = uint32_t(std::stoul(it->second));

  try {
    make_target(cfg.target, cfg.target_opts);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  FormatSpec spec;
  std::vector<BytecodeProgram> seeds;
  try {
    spec = load_spec_or_default(st.str("--spec", "spec", fl.spec_path, ""));
    seeds = load_seed_dir(spec, st.str("--seeds", "seeds", fl.seeds_dir, ""));
    std::filesystem::create_directories(cfg.out_dir);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  }

  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  Campaign campaign(cfg, std::move(seeds), spec);
  CampaignSummary s = campaign.run([] { return g_interrupted.load(); });
  std::cout << "execs=" << s.execs << " edges=" << s.edges_found
            << " corpus=" << s.corpus_size << " crashes_unique=" << s.crashes_unique
            << " inc_snapshots=" << s.inc_snapshots_created
            << " inc_reuses=" << s.inc_reuses
            << " packets_skipped=" << s.packets_skipped
            << " seconds=" << uint64_t(s.seconds) << "\n";
  return kExitOk;
}

int cmd_bench_snapshot(uint64_t page_size, uint64_t reps, uint64_t rng_seed) {
  std::cout << "num_pages,page_size,n,reps,create_us_mean,restore_us_mean,"
               "pages_copied_per_restore,bitmap_scan_cost,flush_events_per_cycle\n";
  Rng rng(rng_seed);
  for (size_t num_pages : {size_t(1) << 17, size_t(1) << 20}) {
    PagedMemory mem(num_pages, page_size);
    auto root = mem.snapshot_root(AuxState{});
    std::vector<uint32_t> pool(num_pages);
    for (uint32_t i = 0; i < num_pages; i++) pool[i] = i;

    for (size_t n : {10, 100, 1000, 10000, 100000}) {
      if (n > num_pages / 2) {
        std::cerr << "# note: skipping n=" << n << " for num_pages=" << num_pages
                  << " (cannot reliably dirty that many pages)\n";
        continue;
      }
      auto dirty_n = [&]() {
        for (size_t i = 0; i < n; i++) {
          size_t j = i + rng.below(num_pages - i);
          std::swap(pool[i], pool[j]);
          mem.write_u8(uint64_t(pool[i]) * page_size, uint8_t(rng.next()));
        }
      };
      std::optional<IncrementalSnapshot> inc;
      double create_ns = 0, restore_ns = 0;
      uint64_t copied_total = 0;
      uint64_t flush_before = mem.flush_events();
      for (uint64_t rep = 0; rep < reps; rep++) {
        dirty_n();
        auto t0 = std::chrono::steady_clock::now();
        inc = mem.snapshot_incremental(root, AuxState{}, std::move(inc));
        auto t1 = std::chrono::steady_clock::now();
        dirty_n();
        auto t2 = std::chrono::steady_clock::now();
        copied_total += mem.restore_incremental(*inc);
        auto t3 = std::chrono::steady_clock::now();
        create_ns += std::chrono::duration<double, std::nano>(t1 - t0).count();
        restore_ns += std::chrono::duration<double, std::nano>(t3 - t2).count();
        mem.restore_root(*root);
      }
      double flush_per_cycle =
          double(mem.flush_events() - flush_before) / double(reps);
      std::cout << num_pages << ',' << page_size << ',' << n << ',' << reps << ','
                << create_ns / 1000.0 / double(reps) << ','
                << restore_ns / 1000.0 / double(reps) << ','
                << double(copied_total) / double(reps) << ',' << num_pages << ','
                << flush_per_cycle << '\n';
    }
  }
  return kExitOk;
}

int cmd_replay(const std::string& input, const std::string& target,
               const std::string& spec_path, uint64_t op_budget) {
  FormatSpec spec;
  BytecodeProgram program;
  try {
    spec = load_spec_or_default(spec_path);
    program = program_parse(spec, read_file(input));
  } catch (const std::exception& e) {
    std::cerr << "replay: " << e.what() << "\n";
    return kExitIo;
  }
  std::unique_ptr<Target> tgt;
  try {
    tgt = make_target(target);
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }
  Guest guest = Guest::boot(std::move(tgt), spec);
  int crashes = 0;
  uint32_t site = 0;
  ExecResult last;
  for (int i = 0; i < 3; i++) {
    CoverageMap cov;
    last = guest.execute(program, StartPoint::kRoot, cov, op_budget);
    if (last.exit == ExecResult::kCrashed) {
      crashes++;
      site = last.crash_site;
    }
  }
  const char* kind = last.exit == ExecResult::kCrashed  ? "crash"
                     : last.exit == ExecResult::kTimeout ? "timeout"
                                                         : "finished";
  std::cout << "exit=" << kind;
  if (crashes) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04x", site);
    std::cout << " crash_site=" << buf << " reproduced=" << crashes << "/3";
  }
  std::cout << " ops_executed=" << last.ops_executed
            << " packets_consumed=" << last.packets_consumed << "\n";
  return crashes == 3 ? kExitCrashReproduced : kExitOk;
}

int cmd_import(const std::string& in, const std::string& format_str,
               const std::string& dissector_str, const std::string& out,
               const std::string& spec_path) {
  auto format = parse_dump_format(format_str);
  auto dissector = parse_dissector(dissector_str);
  if (!format || !dissector) {
    std::cerr << "unknown format or dissector\n";
    return kExitUsage;
  }
  try {
    FormatSpec spec = load_spec_or_default(spec_path);
    std::filesystem::create_directories(out);
    std::vector<std::pair<std::string, std::string>> inputs;  // (path, stem)
    if (*format == DumpFormat::kJsonl && std::filesystem::is_directory(in)) {
      for (const auto& f : std::filesystem::directory_iterator(in))
        if (f.path().extension() == ".jsonl")
          inputs.emplace_back(f.path().string(), f.path().stem().string());
      std::sort(inputs.begin(), inputs.end());
    } else {
      inputs.emplace_back(in, std::filesystem::path(in).stem().string());
    }
    if (inputs.empty()) throw ImportError("no dump files in " + in);
    for (const auto& [path, stem] : inputs) {
      PacketDump dump = load_dump(path, *format);
      BytecodeProgram seed = build_seed(spec, dissect(dump, *dissector));
      std::string out_path = out + "/" + stem + ".nxb";
      write_file_atomic(out_path, program_serialize(seed));
      std::cout << out_path << ": " << seed.ops.size() << " ops\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "import: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"snapshot fuzzer for message-sequence targets"};
  app.require_subcommand(1);

  // fuzz
  auto* fuzz = app.add_subcommand("fuzz", "run a fuzzing campaign");
  FuzzFlags fl;
  fl.target = "ftp_like";
  fl.policy = "none";
  fl.out = "campaign_out";
  std::string config_path;
  fuzz->add_option("--target", fl.target, "ftp_like|platformer|longprefix");
  fuzz->add_option("--spec", fl.spec_path, "format spec file");
  fuzz->add_option("--seeds", fl.seeds_dir, "directory of .nxb seed programs");
  fuzz->add_option("--policy", fl.policy, "none|balanced|aggressive");
  fuzz->add_option("--workers", fl.workers, "worker count");
  fuzz->add_option("--duration", fl.duration, "seconds to run (0 = until signal)");
  fuzz->add_option("--out", fl.out, "campaign directory");
  fuzz->add_option("--config", config_path, "key=value config file");
  fuzz->add_option("--rng-seed", fl.rng_seed, "campaign rng seed");
  fuzz->add_option("--reuse-limit", fl.reuse_limit, "execs per incremental snapshot");
  fuzz->add_option("--min-packets-for-inc", fl.min_packets, "");
  fuzz->add_option("--op-budget", fl.op_budget, "target steps per execution");
  fuzz->add_option("--remirror-interval", fl.remirror, "");
  fuzz->add_option("--map-size", fl.map_size, "coverage map slots");
  fuzz->add_option("--max-execs", fl.max_execs, "stop after this many executions");

  // bench-snapshot
  auto* bench = app.add_subcommand("bench-snapshot",
                                   "incremental snapshot create/restore costs");
  uint64_t bench_page_size = 64, bench_reps = 1000, bench_seed = 1;
  bench->add_option("--page-size", bench_page_size, "bytes per page");
  bench->add_option("--reps", bench_reps, "repetitions per row");
  bench->add_option("--rng-seed", bench_seed, "");

  // replay
  auto* replay = app.add_subcommand("replay", "replay a bytecode program 3x");
  std::string replay_input, replay_target = "ftp_like", replay_spec;
  uint64_t replay_budget = kDefaultStepBudget;
  replay->add_option("input", replay_input, ".nxb program")->required();
  replay->add_option("--target", replay_target, "");
  replay->add_option("--spec", replay_spec, "");
  replay->add_option("--op-budget", replay_budget, "");

  // import
  auto* import = app.add_subcommand("import", "convert packet dumps to seeds");
  std::string imp_in, imp_format = "jsonl", imp_dissector = "crlf", imp_out,
              imp_spec;
  import->add_option("--in", imp_in, "dump file or directory")->required();
  import->add_option("--format", imp_format, "jsonl|rawdir");
  import->add_option("--dissector", imp_dissector, "crlf|lenprefix|asis");
  import->add_option("--out", imp_out, "seed output directory")->required();
  import->add_option("--spec", imp_spec, "format spec file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (fuzz->parsed()) {
      Settings st;
      st.cmd = fuzz;
      if (!config_path.empty()) st.config = load_config_file(config_path);
      return cmd_fuzz(st, fl);
    }
    if (bench->parsed())
      return cmd_bench_snapshot(bench_page_size, bench_reps, bench_seed);
    if (replay->parsed())
      return cmd_replay(replay_input, replay_target, replay_spec, replay_budget);
    if (import->parsed())
      return cmd_import(imp_in, imp_format, imp_dissector, imp_out, imp_spec);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}
