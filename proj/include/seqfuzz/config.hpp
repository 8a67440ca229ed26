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

// key=value config files. Every CLI flag has a config key; the flag wins on
// conflict.

#ifndef SEQFUZZ_CONFIG_HPP
#define SEQFUZZ_CONFIG_HPP

#include <map>

#include "seqfuzz/common.hpp"

namespace seqfuzz {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config_text(std::string_view text, const std::string& source) {
  ConfigMap out;
  size_t line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    pos = end + 1;
    line_no++;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
    while (!line.empty() && is_space(line.back())) line.pop_back();
    size_t first = 0;
    while (first < line.size() && is_space(line[first])) first++;
    line = line.substr(first);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key=value");
    out[line.substr(0, eq)] = line.substr(eq + 1);
    if (pos > text.size()) break;
  }
  return out;
}

inline ConfigMap load_config_file(const std::string& path) {
  Bytes data = read_file(path);
  return parse_config_text(std::string(data.begin(), data.end()), path);
}

}  // namespace seqfuzz

#endif  // SEQFUZZ_CONFIG_HPP
