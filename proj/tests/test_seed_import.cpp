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

#include "seqfuzz/seed_import.hpp"
#include "support/exec_helpers.hpp"

using namespace seqfuzz;

namespace {

struct TempDir {
  std::string path;
  explicit TempDir(const std::string& name) {
    path = std::filesystem::temp_directory_path() /
           ("seqfuzz_import_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

void put(const std::string& path, std::string_view text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

}  // namespace

TEST_CASE("jsonl dumps load records in order") {
  TempDir tmp("jsonl");
  std::string path = tmp.path + "/dump.jsonl";
  put(path,
      R"({"dir":"c2s","data":"55534552206120"})"
      "\n"
      R"({"dir":"s2c","data":"323230"})"
      "\n"
      R"({"dir":"c2s","data":"0d0a"})"
      "\n");
  PacketDump d = load_dump(path, DumpFormat::kJsonl);
  REQUIRE(d.records.size() == 3);
  REQUIRE(d.records[0].to_target);
  REQUIRE_FALSE(d.records[1].to_target);
  REQUIRE(d.records[0].payload == to_bytes("USER a "));
  REQUIRE(d.to_target_stream() == to_bytes("USER a \r\n"));
}

TEST_CASE("bad hex names the line") {
  TempDir tmp("badhex");
  std::string path = tmp.path + "/dump.jsonl";
  put(path,
      R"({"dir":"c2s","data":"00"})"
      "\n"
      R"({"dir":"c2s","data":"zz"})"
      "\n");
  try {
    load_dump(path, DumpFormat::kJsonl);
    FAIL("expected ImportError");
  } catch (const ImportError& e) {
    REQUIRE(std::string(e.what()).find(":2:") != std::string::npos);
  }
  put(path, R"({"dir":"up","data":"00"})" "\n");
  REQUIRE_THROWS_AS(load_dump(path, DumpFormat::kJsonl), ImportError);
  put(path, R"({"dir":"c2s","data":""})" "\n");
  REQUIRE_THROWS_AS(load_dump(path, DumpFormat::kJsonl), ImportError);
  put(path, "not json\n");
  REQUIRE_THROWS_AS(load_dump(path, DumpFormat::kJsonl), ImportError);
}

TEST_CASE("rawdir dumps load numbered files in lexical order") {
  TempDir tmp("rawdir");
  put(tmp.path + "/001_c2s.bin", "hello");
  put(tmp.path + "/002_s2c.bin", "ok");
  put(tmp.path + "/003_c2s.bin", "world");
  PacketDump d = load_dump(tmp.path, DumpFormat::kRawdir);
  REQUIRE(d.records.size() == 3);
  REQUIRE(d.records[2].payload == to_bytes("world"));
  REQUIRE(d.to_target_stream() == to_bytes("helloworld"));

  put(tmp.path + "/004_weird.dat", "x");
  REQUIRE_THROWS_AS(load_dump(tmp.path, DumpFormat::kRawdir), ImportError);
}

TEST_CASE("crlf dissector keeps delimiters and trailing partials") {
  auto pkts = dissect_stream(to_bytes("USER a\r\nPASS b\r\n"), Dissector::kCrlf);
  REQUIRE(pkts == std::vector<Bytes>{to_bytes("USER a\r\n"), to_bytes("PASS b\r\n")});

  REQUIRE(dissect_stream(to_bytes("abc"), Dissector::kCrlf) ==
          std::vector<Bytes>{to_bytes("abc")});

  REQUIRE(dissect_stream({}, Dissector::kCrlf).empty());

  // bare CR or LF do not split
  REQUIRE(dissect_stream(to_bytes("a\rb\nc"), Dissector::kCrlf).size() == 1);
}

TEST_CASE("crlf dissection is lossless over the to-target stream") {
  Rng rng(5);
  for (int round = 0; round < 200; round++) {
    Bytes stream(rng.below(200));
    for (auto& b : stream) b = uint8_t(rng.next());
    for (size_t i = 0; i + 1 < stream.size() && i < 40; i += 1 + rng.below(20)) {
      stream[i] = 0x0d;
      stream[i + 1] = 0x0a;
    }
    Bytes joined;
    for (const Bytes& p : dissect_stream(stream, Dissector::kCrlf))
      joined.insert(joined.end(), p.begin(), p.end());
    REQUIRE(joined == stream);
  }
}

TEST_CASE("lenprefix dissector reads 2-byte big-endian frames") {
  Bytes stream{0x00, 0x03, 'x', 'y', 'z', 0x00, 0x01, 'q'};
  auto pkts = dissect_stream(stream, Dissector::kLenPrefix);
  REQUIRE(pkts == std::vector<Bytes>{to_bytes("xyz"), to_bytes("q")});

  Bytes truncated{0x00, 0x05, 'a'};
  REQUIRE_THROWS_AS(dissect_stream(truncated, Dissector::kLenPrefix), ImportError);
  Bytes half_header{0x00};
  REQUIRE_THROWS_AS(dissect_stream(half_header, Dissector::kLenPrefix), ImportError);
}

TEST_CASE("asis keeps record boundaries and drops responses") {
  PacketDump d;
  d.records.push_back({true, to_bytes("one")});
  d.records.push_back({false, to_bytes("resp")});
  d.records.push_back({true, to_bytes("two")});
  auto pkts = dissect(d, Dissector::kAsIs);
  REQUIRE(pkts == std::vector<Bytes>{to_bytes("one"), to_bytes("two")});
}

TEST_CASE("build_seed produces one connection plus one op per packet") {
  BytecodeProgram p = build_seed(stream_spec(), {to_bytes("a"), to_bytes("b")});
  REQUIRE(p.ops.size() == 3);
  REQUIRE(program_validate(stream_spec(), p).empty());
  REQUIRE_THROWS_AS(build_seed(stream_spec(), {}), ImportError);

  FormatSpec no_pkt = parse_format_spec("handle e_con\nnode con_open produces e_con\n");
  REQUIRE_THROWS_AS(build_seed(no_pkt, {to_bytes("a")}), ImportError);
}

TEST_CASE("imported ftp session replays to the same transcript as a built seed") {
  TempDir tmp("replay");
  std::string path = tmp.path + "/session.jsonl";
  std::vector<std::string> lines{"USER a\r\n", "PASS b\r\n", "LIST\r\n", "QUIT\r\n"};
  std::string jsonl;
  for (const auto& l : lines) {
    jsonl += R"({"dir":"c2s","data":")" + hex_encode(to_bytes(l)) + "\"}\n";
    jsonl += R"({"dir":"s2c","data":"323030"})" "\n";  // responses, ignored
  }
  put(path, jsonl);

  PacketDump dump = load_dump(path, DumpFormat::kJsonl);
  BytecodeProgram imported = build_seed(stream_spec(), dissect(dump, Dissector::kCrlf));

  // the to-target bytes survive import losslessly
  Bytes joined;
  for (const Bytes& p : dissect(dump, Dissector::kCrlf))
    joined.insert(joined.end(), p.begin(), p.end());
  REQUIRE(joined == dump.to_target_stream());

  std::vector<Bytes> direct;
  for (const auto& l : lines) direct.push_back(to_bytes(l));
  BytecodeProgram built = make_stream_program(stream_spec(), direct);

  Guest g = Guest::boot(make_target("ftp_like"), stream_spec());
  CoverageMap cov;
  g.execute(imported, StartPoint::kRoot, cov);
  Bytes t1 = g.net().full_transcript();
  g.execute(built, StartPoint::kRoot, cov);
  Bytes t2 = g.net().full_transcript();
  REQUIRE(t1 == t2);
  REQUIRE_FALSE(t1.empty());
}
