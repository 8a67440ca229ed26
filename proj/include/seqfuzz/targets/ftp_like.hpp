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

// Line-oriented stateful command protocol (greeting, USER/PASS login, then
// session commands). Two planted crash sites: one reachable only through a
// four-command stateful sequence (USER, PASS, MODE <non-default>, CRSH) and
// one guarded by an eight-byte magic compared in a single branch (XMAG).
// All session state lives in paged memory.

#ifndef SEQFUZZ_TARGETS_FTP_LIKE_HPP
#define SEQFUZZ_TARGETS_FTP_LIKE_HPP

#include "seqfuzz/guest.hpp"

namespace seqfuzz {

inline constexpr uint32_t kCrashFtpStateful = 0xF7A0;  // site A
inline constexpr uint32_t kCrashFtpMagic = 0xF7B0;     // site B

inline constexpr uint8_t kFtpMagic[8] = {0xD3, 0x5C, 0xB2, 0x1E,
                                         0x7A, 0x44, 0x9F, 0x08};

class FtpLikeTarget : public Target {
  // page 0: session control block
  static constexpr uint64_t kPhase = 0x000;      // u32: 0 boot, 1 serving
  static constexpr uint64_t kListener = 0x004;   // u32: handle + 1
  static constexpr uint64_t kConn = 0x008;       // u32: handle + 1
  static constexpr uint64_t kLoggedIn = 0x00c;   // u8
  static constexpr uint64_t kGotUser = 0x00d;    // u8
  static constexpr uint64_t kMode = 0x00e;       // u8, default 'S'
  static constexpr uint64_t kCmdCount = 0x010;   // u32
  static constexpr uint64_t kUserLen = 0x014;    // u32
  static constexpr uint64_t kUser = 0x018;       // 32 bytes
  // page 1: receive line buffer
  static constexpr uint64_t kLineLen = 0x1000;   // u32
  static constexpr uint64_t kLine = 0x1004;
  static constexpr size_t kLineCap = 1024;

  enum Site : uint16_t {
    kSiteBoot = 0x101,
    kSiteAccept = 0x102,
    kSiteLine = 0x103,
    kSitePeerClosed = 0x104,
    kSiteOverflow = 0x105,
    kSiteUser = 0x110,
    kSitePass = 0x111,
    kSitePassBad = 0x112,
    kSiteMode = 0x113,
    kSiteType = 0x114,
    kSiteList = 0x115,
    kSiteRetr = 0x116,
    kSiteStor = 0x117,
    kSiteNoop = 0x118,
    kSiteQuit = 0x119,
    kSiteHelp = 0x11a,
    kSiteUnknown = 0x11b,
    kSiteDenied = 0x11c,
    kSiteCrshRejected = 0x11d,
    kSiteXmagBad = 0x11e,
    kSiteDrain = 0x11f,
  };

 public:
  std::string name() const override { return "ftp_like"; }
  std::unique_ptr<Target> clone() const override {
    return std::make_unique<FtpLikeTarget>(*this);
  }

  StepOutcome step(TargetCtx& ctx) override {
    PagedMemory& m = ctx.mem;
    if (m.read_u32(kPhase) == 0) {
      HandleId l = ctx.net.listen("tcp:21");
      m.write_u32(kListener, l + 1);
      m.write_u8(kMode, 'S');
      m.write_u32(kPhase, 1);
      ctx.edge(kSiteBoot);
      return StepOutcome::progress();
    }

    // A complete buffered line is handled before asking for more input.
    if (has_full_line(m)) return process_line(ctx);

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
        char greet[64];
        int n = std::snprintf(greet, sizeof greet, "220 seqftp ready %08x\r\n",
                              unsigned(ctx.rng_next() & 0xffffffffu));
        ctx.net.send(c, std::span<const uint8_t>(
                            reinterpret_cast<const uint8_t*>(greet), size_t(n)));
        ctx.edge(kSiteAccept);
      } else {
        // Single-session server: surplus connections are refused.
        ctx.net.close(c);
        ctx.edge(kSiteDrain);
      }
      return StepOutcome::progress();
    }

    HandleId conn = conn_plus - 1;
    RecvResult r = ctx.net.recv(conn, 64);
    if (r.kind == RecvResult::kPeerClosed) {
      ctx.edge(kSitePeerClosed);
      return StepOutcome::finished();
    }
    if (r.kind == RecvResult::kWouldBlock) return StepOutcome::need_input();

    uint32_t len = m.read_u32(kLineLen);
    if (len + r.data.size() > kLineCap) {
      m.write_u32(kLineLen, 0);
      reply(ctx, "500 line too long\r\n");
      ctx.edge(kSiteOverflow);
      return StepOutcome::progress();
    }
    m.write(kLine + len, r.data);
    m.write_u32(kLineLen, len + uint32_t(r.data.size()));
    ctx.edge(kSiteLine);
    return StepOutcome::progress();
  }

 private:
  bool has_full_line(const PagedMemory& m) const {
    uint32_t len = m.read_u32(kLineLen);
    Bytes buf = m.read(kLine, len);
    return std::find(buf.begin(), buf.end(), '\n') != buf.end();
  }

  void reply(TargetCtx& ctx, std::string_view text) {
    HandleId conn = ctx.mem.read_u32(kConn) - 1;
    ctx.net.send(conn, std::span<const uint8_t>(
                           reinterpret_cast<const uint8_t*>(text.data()),
                           text.size()));
  }

  StepOutcome process_line(TargetCtx& ctx) {
    PagedMemory& m = ctx.mem;
    uint32_t len = m.read_u32(kLineLen);
    Bytes buf = m.read(kLine, len);
    auto nl = std::find(buf.begin(), buf.end(), '\n');
    Bytes line(buf.begin(), nl);
    Bytes rest(nl + 1, buf.end());
    m.write_u32(kLineLen, uint32_t(rest.size()));
    if (!rest.empty()) m.write(kLine, rest);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    m.write_u32(kCmdCount, m.read_u32(kCmdCount) + 1);

    std::string s = to_string(line);
    std::string verb = s.substr(0, s.find(' '));
    std::string arg = s.size() > verb.size() ? s.substr(verb.size() + 1) : "";
    bool logged_in = m.read_u8(kLoggedIn) != 0;

    if (verb == "USER") {
      ctx.edge(kSiteUser);
      uint32_t ulen = uint32_t(std::min<size_t>(arg.size(), 32));
      m.write_u32(kUserLen, ulen);
      if (ulen) m.write(kUser, std::span<const uint8_t>(
                                   reinterpret_cast<const uint8_t*>(arg.data()), ulen));
      m.write_u8(kGotUser, 1);
      reply(ctx, "331 password required\r\n");
    } else if (verb == "PASS") {
      if (m.read_u8(kGotUser)) {
        ctx.edge(kSitePass);
        m.write_u8(kLoggedIn, 1);
        reply(ctx, "230 logged in\r\n");
      } else {
        ctx.edge(kSitePassBad);
        reply(ctx, "503 login with USER first\r\n");
      }
    } else if (verb == "MODE") {
      if (logged_in) {
        ctx.edge(kSiteMode);
        m.write_u8(kMode, arg.empty() ? 0 : uint8_t(arg[0]));
        reply(ctx, "200 mode set\r\n");
      } else {
        ctx.edge(kSiteDenied);
        reply(ctx, "530 not logged in\r\n");
      }
    } else if (verb == "TYPE") {
      ctx.edge(kSiteType);
      reply(ctx, logged_in ? "200 type set\r\n" : "530 not logged in\r\n");
    } else if (verb == "LIST") {
      ctx.edge(kSiteList);
      reply(ctx, logged_in ? "150 listing\r\n226 done\r\n" : "530 not logged in\r\n");
    } else if (verb == "RETR") {
      ctx.edge(kSiteRetr);
      reply(ctx, logged_in ? "550 no such file\r\n" : "530 not logged in\r\n");
    } else if (verb == "STOR") {
      ctx.edge(kSiteStor);
      reply(ctx, logged_in ? "452 no space\r\n" : "530 not logged in\r\n");
    } else if (verb == "NOOP") {
      ctx.edge(kSiteNoop);
      reply(ctx, "200 ok\r\n");
    } else if (verb == "HELP") {
      ctx.edge(kSiteHelp);
      reply(ctx, "214 USER PASS MODE TYPE LIST RETR STOR NOOP QUIT\r\n");
    } else if (verb == "QUIT") {
      ctx.edge(kSiteQuit);
      reply(ctx, "221 bye\r\n");
      return StepOutcome::finished();
    } else if (verb == "CRSH") {
      uint8_t mode = m.read_u8(kMode);
      if (logged_in && mode != 'S' && mode != 0)
        return StepOutcome::crashed(kCrashFtpStateful);
      ctx.edge(kSiteCrshRejected);
      reply(ctx, "502 not available\r\n");
    } else if (verb == "XMAG") {
      if (arg.size() >= 8 && std::memcmp(arg.data(), kFtpMagic, 8) == 0)
        return StepOutcome::crashed(kCrashFtpMagic);
      ctx.edge(kSiteXmagBad);
      reply(ctx, "501 bad magic\r\n");
    } else {
      ctx.edge(kSiteUnknown);
      reply(ctx, "500 unknown command\r\n");
    }
    return StepOutcome::progress();
  }
};

}  // namespace seqfuzz

#endif  // SEQFUZZ_TARGETS_FTP_LIKE_HPP
