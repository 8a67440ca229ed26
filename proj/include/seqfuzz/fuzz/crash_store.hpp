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

// Crash filing: deduplicate by (target, crash site), replay three times from
// the root before filing, quarantine anything that does not reproduce.
// Reproducers are written as bytecode files under crashes/<id>/.

#ifndef SEQFUZZ_FUZZ_CRASH_STORE_HPP
#define SEQFUZZ_FUZZ_CRASH_STORE_HPP

#include <mutex>
#include <set>

#include "seqfuzz/guest.hpp"

namespace seqfuzz {

struct CrashRecord {
  std::string id;          // "<target>_site_<hex>"
  uint32_t site = 0;
  bool duplicate = false;  // site already known; reproducer still listed
  bool quarantined = false;
  std::string path;
};

class CrashStore {
 public:
  explicit CrashStore(const std::string& campaign_dir)
      : crashes_dir_(campaign_dir + "/crashes"),
        quarantine_dir_(campaign_dir + "/quarantine") {
    std::filesystem::create_directories(crashes_dir_);
    std::filesystem::create_directories(quarantine_dir_);
    // resuming a campaign: re-learn known sites from the directory layout
    for (const auto& d : std::filesystem::directory_iterator(crashes_dir_))
      if (d.is_directory()) known_.insert(d.path().filename().string());
  }

  // Replays the program three times on the worker's guest. All three runs
  // must crash at the reported site; flaky crashes are quarantined.
  CrashRecord report(Guest& guest, const BytecodeProgram& program, uint32_t site,
                     uint64_t step_budget = kDefaultStepBudget) {
    BytecodeProgram canonical = program.without_marker();
    Bytes wire = program_serialize(canonical);
    bool reproduced = true;
    for (int i = 0; i < 3 && reproduced; i++) {
      CoverageMap scratch;
      ExecResult r = guest.execute(canonical, StartPoint::kRoot, scratch, step_budget);
      reproduced = r.exit == ExecResult::kCrashed && r.crash_site == site;
    }

    std::lock_guard<std::mutex> lock(mutex_);
    CrashRecord rec;
    rec.site = site;
    char idbuf[64];
    std::snprintf(idbuf, sizeof idbuf, "%s_site_%04x",
                  guest.target().name().c_str(), site);
    rec.id = idbuf;
    if (!reproduced) {
      rec.quarantined = true;
      rec.path = quarantine_dir_ + "/" + hash_name(wire);
      write_file_atomic(rec.path, wire);
      quarantined_++;
      return rec;
    }
    rec.duplicate = known_.count(rec.id) > 0;
    if (!rec.duplicate) {
      known_.insert(rec.id);
      unique_++;
    }
    std::string dir = crashes_dir_ + "/" + rec.id;
    std::filesystem::create_directories(dir);
    rec.path = dir + "/" + hash_name(wire);
    write_file_atomic(rec.path, wire);
    return rec;
  }

  uint64_t unique_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return unique_;
  }
  uint64_t quarantined_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return quarantined_;
  }
  std::vector<std::string> reproducers(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<std::string> out;
    std::string dir = crashes_dir_ + "/" + id;
    if (!std::filesystem::exists(dir)) return out;
    for (const auto& f : std::filesystem::directory_iterator(dir))
      out.push_back(f.path().string());
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static std::string hash_name(const Bytes& wire) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx.nxb",
                  (unsigned long long)fnv1a64(wire));
    return buf;
  }

  std::string crashes_dir_;
  std::string quarantine_dir_;
  mutable std::mutex mutex_;
  std::set<std::string> known_;
  uint64_t unique_ = 0;
  uint64_t quarantined_ = 0;
};

}  // namespace seqfuzz

#endif  // SEQFUZZ_FUZZ_CRASH_STORE_HPP
