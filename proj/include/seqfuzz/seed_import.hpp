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

// Converts captured packet dumps into bytecode seed programs. Two portable
// dump formats are supported: jsonl (one {"dir","data"} record per line,
// hex payloads) and rawdir (numbered NNN_c2s.bin / NNN_s2c.bin files in
// lexical order). Stream dissectors split the to-target byte stream into
// logical packets; response bytes only guide dissection and never enter the
// seed. PCAPs are ingested by converting them to jsonl with a capture tool
// one-liner (see the README).

#ifndef SEQFUZZ_SEED_IMPORT_HPP
#define SEQFUZZ_SEED_IMPORT_HPP

#include <json.hpp>

#include "seqfuzz/builder.hpp"

namespace seqfuzz {

class ImportError : public std::runtime_error {
 public:
  explicit ImportError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DumpRecord {
  bool to_target = true;
  Bytes payload;
};

struct PacketDump {
  std::vector<DumpRecord> records;
  std::string source;

  Bytes to_target_stream() const {
    Bytes out;
    for (const DumpRecord& r : records)
      if (r.to_target) out.insert(out.end(), r.payload.begin(), r.payload.end());
    return out;
  }
};

enum class DumpFormat { kJsonl, kRawdir };
enum class Dissector { kCrlf, kLenPrefix, kAsIs };

inline std::optional<DumpFormat> parse_dump_format(std::string_view s) {
  if (s == "jsonl") return DumpFormat::kJsonl;
  if (s == "rawdir") return DumpFormat::kRawdir;
  return std::nullopt;
}

inline std::optional<Dissector> parse_dissector(std::string_view s) {
  if (s == "crlf") return Dissector::kCrlf;
  if (s == "lenprefix") return Dissector::kLenPrefix;
  if (s == "asis") return Dissector::kAsIs;
  return std::nullopt;
}

inline PacketDump load_dump(const std::string& path, DumpFormat format) {
  PacketDump dump;
  dump.source = path;
  if (format == DumpFormat::kJsonl) {
    std::ifstream f(path);
    if (!f) throw ImportError("cannot read " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(f, line)) {
      line_no++;
      if (line.empty()) continue;
      auto fail = [&](const std::string& why) {
        throw ImportError(path + ":" + std::to_string(line_no) + ": " + why);
      };
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) fail("not a JSON object");
      if (!j.contains("dir") || !j.contains("data")) fail("missing dir/data field");
      std::string dir = j["dir"].is_string() ? j["dir"].get<std::string>() : "";
      if (dir != "c2s" && dir != "s2c") fail("dir must be c2s or s2c");
      if (!j["data"].is_string()) fail("data must be a hex string");
      DumpRecord rec;
      rec.to_target = dir == "c2s";
      if (!hex_decode(j["data"].get<std::string>(), rec.payload)) fail("bad hex payload");
      if (rec.payload.empty()) fail("empty payload");
      dump.records.push_back(std::move(rec));
    }
  } else {
    if (!std::filesystem::is_directory(path))
      throw ImportError(path + " is not a directory");
    std::vector<std::string> names;
    for (const auto& e : std::filesystem::directory_iterator(path))
      if (e.is_regular_file()) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    for (const std::string& name : names) {
      bool c2s = name.find("_c2s.bin") != std::string::npos;
      bool s2c = name.find("_s2c.bin") != std::string::npos;
      if (c2s == s2c)
        throw ImportError(path + "/" + name + ": expected NNN_c2s.bin or NNN_s2c.bin");
      DumpRecord rec;
      rec.to_target = c2s;
      rec.payload = read_file(path + "/" + name);
      if (rec.payload.empty())
        throw ImportError(path + "/" + name + ": empty payload");
      dump.records.push_back(std::move(rec));
    }
  }
  return dump;
}

// Splits a flat to-target byte stream into logical packets. crlf keeps the
// delimiter with its packet and keeps a trailing partial packet; lenprefix
// reads 2-byte big-endian length headers and rejects truncated frames.
inline std::vector<Bytes> dissect_stream(std::span<const uint8_t> stream,
                                         Dissector kind) {
  std::vector<Bytes> packets;
  switch (kind) {
    case Dissector::kCrlf: {
      size_t start = 0;
      for (size_t i = 0; i + 1 < stream.size(); i++) {
        if (stream[i] == 0x0d && stream[i + 1] == 0x0a) {
          packets.emplace_back(stream.begin() + start, stream.begin() + i + 2);
          start = i + 2;
          i++;  // skip the LF
        }
      }
      if (start < stream.size())
        packets.emplace_back(stream.begin() + start, stream.end());
      break;
    }
    case Dissector::kLenPrefix: {
      size_t pos = 0;
      while (pos < stream.size()) {
        if (pos + 2 > stream.size())
          throw ImportError("lenprefix: truncated length header");
        size_t len = size_t(stream[pos]) << 8 | stream[pos + 1];
        pos += 2;
        if (pos + len > stream.size())
          throw ImportError("lenprefix: truncated frame body");
        packets.emplace_back(stream.begin() + pos, stream.begin() + pos + len);
        pos += len;
      }
      break;
    }
    case Dissector::kAsIs:
      throw ImportError("asis dissector needs record boundaries, not a stream");
  }
  return packets;
}

inline std::vector<Bytes> dissect(const PacketDump& dump, Dissector kind) {
  if (kind == Dissector::kAsIs) {
    std::vector<Bytes> packets;
    for (const DumpRecord& r : dump.records)
      if (r.to_target) packets.push_back(r.payload);
    return packets;
  }
  return dissect_stream(dump.to_target_stream(), kind);
}

// One connection open followed by one packet op per payload.
inline BytecodeProgram build_seed(const FormatSpec& spec,
                                  const std::vector<Bytes>& packets) {
  if (packets.empty()) throw ImportError("no packets to build a seed from");
  if (!spec.connection_open_node() || !spec.packet_node())
    throw ImportError("spec lacks a connection-open or packet node");
  BytecodeProgram p = make_stream_program(spec, packets);
  auto violations = program_validate(spec, p);
  if (!violations.empty())
    throw ImportError("built seed fails validation: " + violations[0].message);
  return p;
}

}  // namespace seqfuzz

#endif  // SEQFUZZ_SEED_IMPORT_HPP
