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

// Deterministic side-scrolling grid world. Each packet payload is one
// frame's button byte (bit 0 left, bit 1 right, bit 2 jump). Integer
// velocity and gravity; pits kill; reaching the flag ends the run at a
// dedicated crash site so campaigns can detect a solve. Per-frame best-x
// progress is written into the coverage map's reserved maximization buckets.
//
// Level grids are plain text: '#' solid, '.' empty, 'F' flag, 'P' start.

#ifndef SEQFUZZ_TARGETS_PLATFORMER_HPP
#define SEQFUZZ_TARGETS_PLATFORMER_HPP

#include "seqfuzz/guest.hpp"

namespace seqfuzz {

inline constexpr uint32_t kCrashFlagReached = 0x02F1;

inline constexpr uint8_t kButtonLeft = 1;
inline constexpr uint8_t kButtonRight = 2;
inline constexpr uint8_t kButtonJump = 4;

struct Level {
  std::vector<std::string> rows;
  int width = 0;
  int height = 0;
  int spawn_x = 0;
  int spawn_y = 0;

  bool solid(int x, int y) const {
    if (x < 0 || x >= width) return true;  // side walls
    if (y < 0 || y >= height) return false;
    return rows[y][size_t(x)] == '#';
  }
  char tile(int x, int y) const {
    if (x < 0 || x >= width || y < 0 || y >= height) return '.';
    return rows[y][size_t(x)];
  }

  static Level parse(std::string_view text) {
    Level lv;
    std::string row;
    for (size_t i = 0; i <= text.size(); i++) {
      if (i == text.size() || text[i] == '\n') {
        if (!row.empty()) lv.rows.push_back(row);
        row.clear();
      } else if (text[i] != '\r') {
        row.push_back(text[i]);
      }
    }
    if (lv.rows.empty()) throw std::invalid_argument("empty level");
    for (const auto& r : lv.rows)
      lv.width = std::max(lv.width, int(r.size()));
    lv.height = int(lv.rows.size());
    bool has_flag = false, has_spawn = false;
    for (int y = 0; y < lv.height; y++) {
      lv.rows[y].resize(size_t(lv.width), '.');
      for (int x = 0; x < lv.width; x++) {
        char c = lv.rows[y][size_t(x)];
        if (c == 'P') {
          lv.spawn_x = x;
          lv.spawn_y = y;
          has_spawn = true;
          lv.rows[y][size_t(x)] = '.';
        } else if (c == 'F') {
          has_flag = true;
        } else if (c != '#' && c != '.') {
          throw std::invalid_argument("bad level tile '" + std::string(1, c) + "'");
        }
      }
    }
    if (!has_spawn) throw std::invalid_argument("level has no 'P' start");
    if (!has_flag) throw std::invalid_argument("level has no 'F' flag");
    return lv;
  }
};

// Bundled level: a long flat approach, then a seven-cell pit that the
// seven-column jump arc clears only when taken from the very last ground
// cell, then the flag.
inline constexpr const char* kDefaultLevelText =
    "................................................................................................\n"
    "................................................................................................\n"
    "................................................................................................\n"
    "................................................................................................\n"
    "................................................................................................\n"
    "................................................................................................\n"
    "................................................................................................\n"
    ".P........................................................................................F.....\n"
    "#########################################################################.......################\n";

class PlatformerTarget : public Target {
  static constexpr uint64_t kPhase = 0x00;
  static constexpr uint64_t kListener = 0x04;
  static constexpr uint64_t kConn = 0x08;
  static constexpr uint64_t kX = 0x0c;       // i32
  static constexpr uint64_t kY = 0x10;       // i32
  static constexpr uint64_t kVy = 0x14;      // i32
  static constexpr uint64_t kMaxX = 0x18;    // i32
  static constexpr uint64_t kFrame = 0x1c;   // u32
  static constexpr uint64_t kDead = 0x20;    // u8

  enum Site : uint16_t {
    kSiteBoot = 0x201,
    kSiteAccept = 0x202,
    kSiteJump = 0x210,
    kSiteWalk = 0x211,
    kSiteBlocked = 0x212,
    kSiteLand = 0x213,
    kSitePit = 0x214,
    kSiteIdle = 0x215,
  };

 public:
  explicit PlatformerTarget(Level level) : level_(std::move(level)) {}

  std::string name() const override { return "platformer"; }
  std::unique_ptr<Target> clone() const override {
    return std::make_unique<PlatformerTarget>(*this);
  }
  const Level& level() const { return level_; }

  StepOutcome step(TargetCtx& ctx) override {
    PagedMemory& m = ctx.mem;
    if (m.read_u32(kPhase) == 0) {
      HandleId l = ctx.net.listen("game:1");
      m.write_u32(kListener, l + 1);
      m.write_u32(kX, uint32_t(level_.spawn_x));
      m.write_u32(kY, uint32_t(level_.spawn_y));
      m.write_u32(kMaxX, uint32_t(level_.spawn_x));
      m.write_u32(kPhase, 1);
      ctx.edge(kSiteBoot);
      return StepOutcome::progress();
    }
    if (m.read_u8(kDead)) return StepOutcome::finished();

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
    return simulate_frame(ctx, r.data.empty() ? 0 : r.data[0]);
  }

 private:
  StepOutcome simulate_frame(TargetCtx& ctx, uint8_t buttons) {
    PagedMemory& m = ctx.mem;
    int x = int(m.read_u32(kX));
    int y = int(m.read_u32(kY));
    int vy = int(m.read_u32(kVy));

    bool grounded = level_.solid(x, y + 1);
    if ((buttons & kButtonJump) && grounded) {
      vy = -4;  // becomes -3 after this frame's gravity
      ctx.edge(kSiteJump);
    }
    vy = (grounded && vy >= 0) ? 0 : std::min(vy + 1, 3);

    int dx = ((buttons & kButtonRight) ? 1 : 0) - ((buttons & kButtonLeft) ? 1 : 0);
    if (dx != 0) {
      if (!level_.solid(x + dx, y)) {
        x += dx;
        ctx.edge(kSiteWalk);
      } else {
        ctx.edge(kSiteBlocked);
      }
    } else {
      ctx.edge(kSiteIdle);
    }

    int steps = vy < 0 ? -vy : vy;
    int dy = vy < 0 ? -1 : 1;
    for (int s = 0; s < steps; s++) {
      int ny = y + dy;
      if (ny < 0) {
        vy = 0;
        break;
      }
      if (ny >= level_.height) {
        // fell past the bottom row: pit
        m.write_u8(kDead, 1);
        ctx.edge(kSitePit);
        return StepOutcome::finished();
      }
      if (level_.solid(x, ny)) {
        if (dy > 0) ctx.edge(kSiteLand);
        vy = 0;
        break;
      }
      y = ny;
    }

    m.write_u32(kX, uint32_t(x));
    m.write_u32(kY, uint32_t(y));
    m.write_u32(kVy, uint32_t(vy));
    m.write_u32(kFrame, m.read_u32(kFrame) + 1);

    if (level_.tile(x, y) == 'F') return StepOutcome::crashed(kCrashFlagReached);

    int max_x = int(m.read_u32(kMaxX));
    if (x > max_x) {
      m.write_u32(kMaxX, uint32_t(x));
      ctx.feedback(size_t(x) * kFeedbackSlots / size_t(level_.width));
    }
    return StepOutcome::progress();
  }

  Level level_;
};

}  // namespace seqfuzz

#endif  // SEQFUZZ_TARGETS_PLATFORMER_HPP
