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

#include "seqfuzz/builder.hpp"
#include "seqfuzz/mutator.hpp"

using namespace seqfuzz;

namespace {

BytecodeProgram stream_seed(size_t packets) {
  std::vector<Bytes> payloads;
  for (size_t i = 0; i < packets; i++)
    payloads.push_back(to_bytes("packet-" + std::to_string(i)));
  return make_stream_program(stream_spec(), payloads);
}

}  // namespace

TEST_CASE("the frozen prefix is never modified") {
  const FormatSpec& spec = stream_spec();
  BytecodeProgram p = stream_seed(4).with_marker(3);
  Rng rng(1);
  for (int i = 0; i < 2000; i++) {
    BytecodeProgram m = mutate(spec, p, rng, {}, 3);
    REQUIRE(prefix_bytes(m, 3) == prefix_bytes(p, 3));
    REQUIRE(m.snapshot_index == 3u);
    REQUIRE(m.ops.size() > 3);  // suffix never empties
    REQUIRE(program_validate(spec, m).empty());
  }
}

TEST_CASE("drop on a one-packet suffix falls back to payload havoc") {
  const FormatSpec& spec = stream_spec();
  BytecodeProgram p = stream_seed(1);  // con_open + one packet
  Rng rng(7);
  for (int i = 0; i < 500; i++) {
    BytecodeProgram m = mutate(spec, p, rng, {}, 1);
    REQUIRE(m.ops.size() >= 2);
    REQUIRE(program_validate(spec, m).empty());
  }
}

TEST_CASE("identical rng seeds give identical mutants") {
  const FormatSpec& spec = stream_spec();
  BytecodeProgram p = stream_seed(5);
  std::vector<BytecodeProgram> corpus{stream_seed(2), stream_seed(3)};
  Rng a(1234), b(1234);
  for (int i = 0; i < 200; i++)
    REQUIRE(mutate(spec, p, a, corpus, 0) == mutate(spec, p, b, corpus, 0));
}

TEST_CASE("closure under mutation, with and without corpus splicing") {
  const FormatSpec& spec = stream_spec();
  std::vector<BytecodeProgram> corpus{stream_seed(1), stream_seed(6), stream_seed(3)};
  Rng rng(42);
  BytecodeProgram p = stream_seed(4);
  for (int i = 0; i < 20000; i++) {
    uint32_t fuzz_from = uint32_t(rng.below(p.ops.size() + 1));
    BytecodeProgram m = mutate(spec, p, rng, corpus, fuzz_from);
    auto violations = program_validate(spec, m);
    if (!violations.empty()) {
      CAPTURE(i, fuzz_from, violations[0].message);
      FAIL("mutant failed validation");
    }
    // occasionally walk forward so mutants mutate mutants
    if (i % 8 == 0 && m.ops.size() < 600) p = std::move(m);
  }
}

TEST_CASE("mutations eventually use the whole catalogue") {
  const FormatSpec& spec = stream_spec();
  std::vector<BytecodeProgram> corpus{stream_seed(2)};
  BytecodeProgram p = stream_seed(4);
  Rng rng(5);
  bool grew = false, shrank = false, changed_payload = false;
  for (int i = 0; i < 3000; i++) {
    BytecodeProgram m = mutate(spec, p, rng, corpus, 1);
    if (m.ops.size() > p.ops.size()) grew = true;
    if (m.ops.size() < p.ops.size()) shrank = true;
    if (m.ops.size() == p.ops.size() && !(m == p)) changed_payload = true;
  }
  REQUIRE(grew);
  REQUIRE(shrank);
  REQUIRE(changed_payload);
}

TEST_CASE("fuzz_from == len(ops) only appends") {
  const FormatSpec& spec = stream_spec();
  BytecodeProgram p = stream_seed(3);
  Rng rng(9);
  for (int i = 0; i < 500; i++) {
    BytecodeProgram m = mutate(spec, p, rng, {}, uint32_t(p.ops.size()));
    REQUIRE(m.ops.size() >= p.ops.size());
    for (size_t k = 0; k < p.ops.size(); k++) REQUIRE(m.ops[k] == p.ops[k]);
    REQUIRE(program_validate(spec, m).empty());
  }
}
