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

// Paged memory with software dirty-page tracking, plus two snapshot levels:
// a full root snapshot and a cheap incremental snapshot backed by a
// copy-on-write style mirror of the root. Restores walk the dirty stack, so
// their cost is proportional to the pages touched since the snapshot point,
// never to the total memory size.

#ifndef SEQFUZZ_PAGED_STATE_HPP
#define SEQFUZZ_PAGED_STATE_HPP

#include <atomic>
#include <cstring>
#include <memory>
#include <optional>
#include <unordered_map>

#include "seqfuzz/common.hpp"

namespace seqfuzz {

// Hardware page-modification logs hold this many entries before the CPU
// flushes them to the hypervisor. Modeled as an instrumentation counter only.
inline constexpr size_t kPmlFlushPages = 512;

inline constexpr uint32_t kDefaultRemirrorInterval = 2000;

// Opaque serialized device/emulation state bundled with every snapshot.
// Round-trips bit-exactly; the paged layer never looks inside.
struct AuxState {
  Bytes blob;
  bool operator==(const AuxState&) const = default;
};

class SnapshotMismatch : public std::logic_error {
 public:
  explicit SnapshotMismatch(const std::string& msg) : std::logic_error(msg) {}
};

class RootSnapshot {
 public:
  RootSnapshot(size_t num_pages, size_t page_size, Bytes full_copy, AuxState aux)
      : num_pages_(num_pages),
        page_size_(page_size),
        full_copy_(std::move(full_copy)),
        aux_(std::move(aux)),
        id_(next_id_.fetch_add(1) + 1) {
    live_count_.fetch_add(1);
  }
  ~RootSnapshot() { live_count_.fetch_sub(1); }
  RootSnapshot(const RootSnapshot&) = delete;
  RootSnapshot& operator=(const RootSnapshot&) = delete;

  size_t num_pages() const { return num_pages_; }
  size_t page_size() const { return page_size_; }
  uint64_t id() const { return id_; }
  const AuxState& aux() const { return aux_; }
  const Bytes& full_copy() const { return full_copy_; }
  std::span<const uint8_t> page(size_t idx) const {
    return std::span<const uint8_t>(full_copy_).subspan(idx * page_size_, page_size_);
  }

  // Number of root snapshots currently alive in the process. A campaign
  // must hold exactly one no matter how many workers share it.
  static int64_t live_count() { return live_count_.load(); }

 private:
  static inline std::atomic<uint64_t> next_id_{0};
  static inline std::atomic<int64_t> live_count_{0};

  size_t num_pages_;
  size_t page_size_;
  Bytes full_copy_;
  AuxState aux_;
  uint64_t id_;
};

using RootSnapshotPtr = std::shared_ptr<const RootSnapshot>;

// Second-level snapshot: a logical full-memory view equal to the root
// overlaid with privately captured pages. Recreated on demand; at most one
// lives per worker. Captured page copies are recycled between creations and
// the whole overlay is dropped back to a pristine root view every
// remirror_interval creations, bounding worst-case memory at one extra root.
class IncrementalSnapshot {
 public:
  IncrementalSnapshot(RootSnapshotPtr root, uint32_t remirror_interval)
      : root_(std::move(root)), remirror_interval_(remirror_interval) {
    page_to_slab_.assign(root_->num_pages(), -1);
  }
  IncrementalSnapshot(IncrementalSnapshot&&) = default;
  IncrementalSnapshot& operator=(IncrementalSnapshot&&) = default;
  IncrementalSnapshot(const IncrementalSnapshot&) = delete;

  const RootSnapshotPtr& root() const { return root_; }
  uint64_t token() const { return token_; }
  const AuxState& aux() const { return aux_; }
  uint32_t creations_since_remirror() const { return creations_since_remirror_; }
  uint32_t remirror_interval() const { return remirror_interval_; }
  const std::vector<uint32_t>& captured_pages() const { return captured_list_; }
  const std::vector<uint32_t>& last_capture() const { return last_capture_; }
  bool page_captured(size_t idx) const { return page_to_slab_[idx] >= 0; }

  // Reads the mirror view: the private copy when captured, root otherwise.
  std::span<const uint8_t> mirror_page(size_t idx) const {
    int32_t slab = page_to_slab_[idx];
    if (slab >= 0)
      return std::span<const uint8_t>(slab_).subspan(
          size_t(slab) * root_->page_size(), root_->page_size());
    return root_->page(idx);
  }

 private:
  friend class PagedMemory;

  uint8_t* slab_page(int32_t slab, size_t page_size) {
    return slab_.data() + size_t(slab) * page_size;
  }

  RootSnapshotPtr root_;
  uint32_t remirror_interval_;
  uint32_t creations_since_remirror_ = 0;
  uint64_t token_ = 0;
  AuxState aux_;
  std::vector<uint32_t> captured_list_;  // slab order; union between re-mirrors
  std::vector<int32_t> page_to_slab_;    // -1 when not captured
  std::vector<uint32_t> last_capture_;   // pages captured by the latest creation
  Bytes slab_;                           // private page copies, contiguous

  static inline std::atomic<uint64_t> next_token_{0};
};

class PagedMemory {
 public:
  PagedMemory(size_t num_pages, size_t page_size) {
    if (num_pages == 0) throw std::invalid_argument("num_pages must be >= 1");
    if (page_size < 64 || (page_size & (page_size - 1)) != 0)
      throw std::invalid_argument("page_size must be a power of two >= 64");
    if (num_pages > SIZE_MAX / page_size)
      throw std::invalid_argument("memory size overflows");
    num_pages_ = num_pages;
    page_size_ = page_size;
    data_.assign(num_pages * page_size, 0);
    dirty_flags_.assign(num_pages, 0);
    delta_flags_.assign(num_pages, 0);
  }

  PagedMemory(PagedMemory&&) = default;
  PagedMemory& operator=(PagedMemory&&) = default;

  // Explicit deep copy (used to spawn per-worker memories from a booted
  // guest). Carries tracking state and snapshot binding.
  PagedMemory clone() const { return PagedMemory(*this); }

  size_t num_pages() const { return num_pages_; }
  size_t page_size() const { return page_size_; }
  size_t size_bytes() const { return data_.size(); }

  void write(uint64_t addr, std::span<const uint8_t> bytes) {
    check_range(addr, bytes.size());
    if (bytes.empty()) return;
    std::memcpy(data_.data() + addr, bytes.data(), bytes.size());
    size_t first = addr / page_size_;
    size_t last = (addr + bytes.size() - 1) / page_size_;
    for (size_t p = first; p <= last; p++) mark_dirty(uint32_t(p));
  }

  Bytes read(uint64_t addr, size_t len) const {
    check_range(addr, len);
    return Bytes(data_.begin() + addr, data_.begin() + addr + len);
  }

  void read_into(uint64_t addr, std::span<uint8_t> out) const {
    check_range(addr, out.size());
    if (!out.empty()) std::memcpy(out.data(), data_.data() + addr, out.size());
  }

  void write_u8(uint64_t addr, uint8_t v) { write(addr, std::span<const uint8_t>(&v, 1)); }
  void write_u16(uint64_t addr, uint16_t v) { write_le(addr, v); }
  void write_u32(uint64_t addr, uint32_t v) { write_le(addr, v); }
  void write_u64(uint64_t addr, uint64_t v) { write_le(addr, v); }
  uint8_t read_u8(uint64_t addr) const { return read_le<uint8_t>(addr); }
  uint16_t read_u16(uint64_t addr) const { return read_le<uint16_t>(addr); }
  uint32_t read_u32(uint64_t addr) const { return read_le<uint32_t>(addr); }
  uint64_t read_u64(uint64_t addr) const { return read_le<uint64_t>(addr); }

  std::span<const uint8_t> page(size_t idx) const {
    return std::span<const uint8_t>(data_).subspan(idx * page_size_, page_size_);
  }
  std::span<const uint8_t> bytes() const { return data_; }

  const std::vector<uint32_t>& dirty_stack() const { return dirty_stack_; }
  bool page_dirty(size_t idx) const { return dirty_flags_[idx] != 0; }
  size_t dirty_count() const { return dirty_stack_.size(); }

  // --- instrumentation ---
  uint64_t pages_copied() const { return pages_copied_; }
  uint64_t flush_events() const { return flush_events_; }
  uint64_t snapshot_creations() const { return snapshot_creations_; }

  // --- snapshot operations ---

  // Full copy of memory plus aux. Clears dirty tracking and binds the
  // memory to the new root.
  RootSnapshotPtr snapshot_root(AuxState aux) {
    account_flush();
    auto root = std::make_shared<RootSnapshot>(num_pages_, page_size_, data_,
                                               std::move(aux));
    clear_dirty();
    clear_delta();
    bound_root_id_ = root->id();
    bound_inc_token_ = 0;
    snapshot_creations_++;
    return root;
  }

  // Restores memory to the root state. Copies only pages dirtied since the
  // root point (the current dirty set plus pages the active incremental
  // snapshot had diverged), walking the dirty stack rather than scanning the
  // per-page bitmap. Returns the number of pages copied.
  size_t restore_root(const RootSnapshot& root) {
    if (root.num_pages() != num_pages_ || root.page_size() != page_size_)
      throw SnapshotMismatch("root snapshot geometry differs from memory");
    if (root.id() != bound_root_id_)
      throw SnapshotMismatch("root snapshot was not taken from this memory lineage");
    account_flush();
    size_t copied = 0;
    for (uint32_t p : dirty_stack_) {
      copy_page_from(root.full_copy(), p);
      copied++;
    }
    for (uint32_t p : delta_list_) {
      if (!dirty_flags_[p]) {
        copy_page_from(root.full_copy(), p);
        copied++;
      }
    }
    clear_dirty();
    clear_delta();
    bound_inc_token_ = 0;
    pages_copied_ += copied;
    return copied;
  }

  // Captures the pages dirtied since the last snapshot point into the
  // incremental mirror. A prior snapshot is recycled in place: the pages it
  // captured last time and that were not re-dirtied are first overwritten
  // with root content, and every remirror_interval creations the overlay is
  // reset to a pristine root view before capturing. Consumes the prior
  // snapshot. Precondition for restore exactness: the dirty set reflects
  // all writes since the last restore to the root.
  IncrementalSnapshot snapshot_incremental(
      const RootSnapshotPtr& root, AuxState aux,
      std::optional<IncrementalSnapshot> prior = std::nullopt,
      uint32_t remirror_interval = kDefaultRemirrorInterval) {
    if (root->id() != bound_root_id_)
      throw SnapshotMismatch("incremental snapshot must be taken over the bound root");
    if (prior && prior->root_->id() != root->id())
      throw SnapshotMismatch("prior incremental snapshot belongs to another root");
    account_flush();

    IncrementalSnapshot inc = prior ? std::move(*prior)
                                    : IncrementalSnapshot(root, remirror_interval);
    inc.remirror_interval_ = remirror_interval;
    inc.creations_since_remirror_++;
    if (inc.creations_since_remirror_ >= inc.remirror_interval_) {
      // Re-mirror: drop all private copies, view becomes the pristine root.
      for (uint32_t p : inc.captured_list_) inc.page_to_slab_[p] = -1;
      inc.captured_list_.clear();
      inc.slab_.clear();
      inc.last_capture_.clear();
      inc.creations_since_remirror_ = 0;
    } else {
      // Recycle: only the previous capture can differ from root content;
      // reset those pages not about to be overwritten. Older materialized
      // copies already hold root bytes and are reused as is.
      for (uint32_t p : inc.last_capture_) {
        if (!dirty_flags_[p])
          std::memcpy(inc.slab_page(inc.page_to_slab_[p], page_size_),
                      root->page(p).data(), page_size_);
      }
    }
    inc.last_capture_.assign(dirty_stack_.begin(), dirty_stack_.end());
    for (uint32_t p : dirty_stack_) {
      int32_t slab = inc.page_to_slab_[p];
      if (slab < 0) {
        slab = int32_t(inc.captured_list_.size());
        inc.captured_list_.push_back(p);
        inc.page_to_slab_[p] = slab;
        inc.slab_.resize(inc.slab_.size() + page_size_);
      }
      std::memcpy(inc.slab_page(slab, page_size_),
                  data_.data() + size_t(p) * page_size_, page_size_);
    }
    inc.aux_ = std::move(aux);
    inc.token_ = IncrementalSnapshot::next_token_.fetch_add(1) + 1;

    // Memory's divergence from root now includes this run's dirty set.
    for (uint32_t p : dirty_stack_) {
      if (!delta_flags_[p]) {
        delta_flags_[p] = 1;
        delta_list_.push_back(p);
      }
    }
    clear_dirty();
    bound_inc_token_ = inc.token_;
    snapshot_creations_++;
    return inc;
  }

  // Restores memory to the incremental snapshot point. Copies only pages
  // dirtied since that snapshot was created. Rejects snapshots that are not
  // the memory's current one (e.g. the root was restored in between).
  size_t restore_incremental(const IncrementalSnapshot& inc) {
    if (inc.token_ == 0 || inc.token_ != bound_inc_token_)
      throw SnapshotMismatch("stale incremental snapshot");
    account_flush();
    size_t copied = 0;
    for (uint32_t p : dirty_stack_) {
      auto src = inc.mirror_page(p);
      std::memcpy(data_.data() + size_t(p) * page_size_, src.data(), page_size_);
      copied++;
    }
    clear_dirty();
    pages_copied_ += copied;
    return copied;
  }

 private:
  PagedMemory(const PagedMemory&) = default;

  void check_range(uint64_t addr, size_t len) const {
    if (addr > data_.size() || len > data_.size() - addr)
      throw std::out_of_range("access outside paged memory");
  }

  void mark_dirty(uint32_t p) {
    if (!dirty_flags_[p]) {
      dirty_flags_[p] = 1;
      dirty_stack_.push_back(p);
    }
  }

  void copy_page_from(const Bytes& src, uint32_t p) {
    std::memcpy(data_.data() + size_t(p) * page_size_,
                src.data() + size_t(p) * page_size_, page_size_);
  }

  void clear_dirty() {
    for (uint32_t p : dirty_stack_) dirty_flags_[p] = 0;
    dirty_stack_.clear();
  }

  void clear_delta() {
    for (uint32_t p : delta_list_) delta_flags_[p] = 0;
    delta_list_.clear();
  }

  void account_flush() {
    flush_events_ += (dirty_stack_.size() + kPmlFlushPages - 1) / kPmlFlushPages;
  }

  template <typename T>
  void write_le(uint64_t addr, T v) {
    uint8_t buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); i++) buf[i] = uint8_t(v >> (8 * i));
    write(addr, buf);
  }
  template <typename T>
  T read_le(uint64_t addr) const {
    check_range(addr, sizeof(T));
    T v = 0;
    for (size_t i = 0; i < sizeof(T); i++)
      v = T(v | (T(data_[addr + i]) << (8 * i)));
    return v;
  }

  size_t num_pages_ = 0;
  size_t page_size_ = 0;
  Bytes data_;
  std::vector<uint8_t> dirty_flags_;
  std::vector<uint32_t> dirty_stack_;

  // Pages whose content may differ from the bound root at the current
  // snapshot point (i.e. pages captured by incremental snapshots). Restoring
  // the root must reset these in addition to the current dirty set.
  std::vector<uint8_t> delta_flags_;
  std::vector<uint32_t> delta_list_;

  uint64_t bound_root_id_ = 0;
  uint64_t bound_inc_token_ = 0;

  uint64_t pages_copied_ = 0;
  uint64_t flush_events_ = 0;
  uint64_t snapshot_creations_ = 0;
};

}  // namespace seqfuzz

#endif  // SEQFUZZ_PAGED_STATE_HPP
