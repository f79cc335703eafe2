#include <set>
#include <sstream>

#include "doctest.h"
#include "pem/machine.hpp"
#include "pem/step_fuzz.hpp"

using namespace pem;

namespace {

std::vector<Payload> plain(std::size_t n) { return std::vector<Payload>(n); }

std::vector<AtomId> ids(std::span<const AtomId> s) { return {s.begin(), s.end()}; }

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::ConfigError;
}

}  // namespace

TEST_SUITE("machine") {

TEST_CASE("initial layout packs B atoms per block") {
  MachineState s({2, 4, 2, 4}, plain(4));
  CHECK(s.block_count() == 2);
  CHECK(ids(s.block(0)) == std::vector<AtomId>{0, 1});
  CHECK(ids(s.block(1)) == std::vector<AtomId>{2, 3});
  CHECK(s.io_count() == 0);

  MachineState t({1, 2, 1, 3}, plain(3));
  CHECK(t.block_count() == 3);
  for (BlockIndex b = 0; b < 3; ++b) CHECK(t.block(b).size() == 1);
}

TEST_CASE("configuration limits") {
  CHECK(code_of([] { MachineState s({8, 4, 2, 8}, plain(8)); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { MachineState s({1, 3, 2, 8}, plain(8)); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { MachineState s({1, 4, 2, 8}, plain(7)); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { MachineConfig{0, 4, 2, 8}.validate(); }) == ErrorCode::ConfigError);
  CHECK_NOTHROW(MachineConfig{4, 4, 2, 8}.validate());
}

TEST_CASE("initial atoms carry their own provenance") {
  MachineState s({1, 4, 2, 4}, plain(4));
  for (AtomId id = 0; id < 4; ++id) CHECK(s.atom(id).provenance == std::vector<AtomId>{id});
}

TEST_CASE("an idle step still costs one I/O") {
  MachineState s({2, 4, 2, 4}, plain(4));
  auto before = s.snapshot_block_permutation();
  s.execute_step(ParallelStep::all_idle(2));
  CHECK(s.io_count() == 1);
  CHECK(s.snapshot_block_permutation() == before);
}

TEST_CASE("concurrent reads of one block") {
  MachineState s({2, 4, 2, 4}, plain(4));
  s.execute_step({{IoRequest::read(0), IoRequest::read(0)}});
  CHECK(ids(s.cache(0)) == std::vector<AtomId>{0, 1});
  CHECK(ids(s.cache(1)) == std::vector<AtomId>{0, 1});
  CHECK(ids(s.block(0)) == std::vector<AtomId>{0, 1});
  CHECK(s.instances(0) == 3);
  CHECK(s.io_count() == 1);
}

TEST_CASE("two writers of one block") {
  MachineState s({2, 4, 2, 4}, plain(4));
  s.execute_step({{IoRequest::read(0), IoRequest::read(1)}});
  auto before = s.snapshot_block_permutation();
  CHECK(code_of([&] { s.execute_step({{IoRequest::write(3, {0}), IoRequest::write(3, {2})}}); }) ==
        ErrorCode::CrewViolation);
  CHECK(s.io_count() == 1);
  CHECK(s.snapshot_block_permutation() == before);
}

TEST_CASE("writes move atoms out of the cache") {
  MachineState s({1, 4, 2, 4}, plain(4));
  s.execute_step({{IoRequest::read(0)}});
  s.execute_step({{IoRequest::write(0, {1, 0})}});
  CHECK(s.cache(0).empty());
  auto snap = s.snapshot_block_permutation();
  CHECK(snap[0] == std::set<AtomId>{0, 1});
  CHECK(snap[1] == std::set<AtomId>{2, 3});
}

TEST_CASE("an empty write leaves an empty block") {
  MachineState s({1, 4, 2, 4}, plain(4));
  s.execute_step({{IoRequest::write(1, {})}});
  auto snap = s.snapshot_block_permutation();
  REQUIRE(snap.count(1) == 1);
  CHECK(snap[1].empty());
  CHECK(s.instances(2) == 0);
}

TEST_CASE("writes past the end grow shared memory") {
  MachineState s({1, 4, 2, 4}, plain(4));
  s.execute_step({{IoRequest::read(0)}});
  s.execute_step({{IoRequest::write(5, {0})}});
  CHECK(s.block_count() == 6);
  CHECK(ids(s.block(5)) == std::vector<AtomId>{0});
  CHECK(s.block(3).empty());
}

TEST_CASE("reads see the memory as it was before the step") {
  MachineState s({2, 4, 2, 4}, plain(4));
  s.execute_step({{IoRequest::read(1), IoRequest::idle()}});
  s.execute_step({{IoRequest::write(0, {2, 3}), IoRequest::read(0)}});
  CHECK(ids(s.cache(1)) == std::vector<AtomId>{0, 1});
  CHECK(ids(s.block(0)) == std::vector<AtomId>{2, 3});
}

TEST_CASE("copy and delete") {
  MachineState s({1, 2, 1, 2}, std::vector<Payload>{IntervalPayload{0, 1}, IntervalPayload{1, 2}});
  s.execute_step({{IoRequest::read(0)}});
  AtomId c = s.copy_atom(0, 0);
  CHECK(c == 2);
  CHECK(s.atom(c).payload == Payload{IntervalPayload{0, 1}});
  CHECK(s.atom(c).provenance == std::vector<AtomId>{0});
  CHECK(s.op_log().back().kind == OpKind::Copy);
  CHECK(s.io_count() == 1);
  CHECK(code_of([&] { s.copy_atom(0, 0); }) == ErrorCode::CacheOverflow);
  s.delete_atom(0, c);
  s.delete_atom(0, 0);
  CHECK(code_of([&] { s.delete_atom(0, 0); }) == ErrorCode::NotResident);
  CHECK(code_of([&] { s.execute_step({{IoRequest::write(1, {0})}}); }) == ErrorCode::NotResident);
}

TEST_CASE("capacity errors") {
  MachineState s({1, 4, 2, 8}, plain(8));
  s.execute_step({{IoRequest::read(0)}});
  s.execute_step({{IoRequest::read(1)}});
  CHECK(code_of([&] { s.execute_step({{IoRequest::read(2)}}); }) == ErrorCode::CacheOverflow);
  CHECK(code_of([&] { s.execute_step({{IoRequest::write(0, {0, 1, 2})}}); }) == ErrorCode::BlockOverflow);
  CHECK(code_of([&] { s.execute_step({{IoRequest::read(40)}}); }) == ErrorCode::NoSuchBlock);
  CHECK(code_of([&] { s.execute_step(ParallelStep::all_idle(2)); }) == ErrorCode::ConfigError);
  CHECK(s.io_count() == 2);
}

TEST_CASE("error precedence") {
  MachineState s({2, 4, 2, 4}, plain(4), {true, TraceMode::Steps});
  // Mixed kinds outrank the CREW conflict in normalized mode.
  CHECK(code_of([&] { s.execute_step({{IoRequest::read(0), IoRequest::write(0, {9})}}); }) ==
        ErrorCode::NotNormalized);
  MachineState t({2, 4, 2, 4}, plain(4));
  CHECK(code_of([&] { s.execute_step({{IoRequest::write(0, {0, 1, 2}), IoRequest::write(0, {})}}); }) ==
        ErrorCode::CrewViolation);
  // Processor order decides between per-processor errors.
  CHECK(code_of([&] { t.execute_step({{IoRequest::write(1, {7}), IoRequest::read(9)}}); }) ==
        ErrorCode::NotResident);
  CHECK(code_of([&] { t.execute_step({{IoRequest::read(9), IoRequest::write(1, {7})}}); }) ==
        ErrorCode::NoSuchBlock);
}

TEST_CASE("normalized mode accepts single-kind steps") {
  MachineState s({2, 4, 2, 4}, plain(4), {true, TraceMode::Steps});
  s.execute_step({{IoRequest::read(0), IoRequest::read(1)}});
  s.execute_step({{IoRequest::write(0, {0}), IoRequest::write(1, {2})}});
  CHECK(s.io_count() == 2);
}

TEST_CASE("block pool reuses released blocks") {
  MachineState s({1, 4, 2, 4}, plain(4));
  auto a = s.acquire_blocks(3);
  CHECK(a == std::vector<BlockIndex>{2, 3, 4});
  s.release_blocks(std::vector<BlockIndex>{3});
  CHECK(s.acquire_blocks(2) == std::vector<BlockIndex>{3, 5});
  CHECK(s.io_count() == 0);
}

TEST_CASE("trace records every step") {
  MachineState s({1, 4, 2, 4}, plain(4), {false, TraceMode::Full});
  s.execute_step({{IoRequest::read(1)}});
  s.execute_step({{IoRequest::write(2, {3})}});
  REQUIRE(s.trace().size() == 2);
  CHECK(s.trace().steps[0].read_contents[0] == std::vector<AtomId>{2, 3});
  std::ostringstream out;
  write_trace(out, s.trace());
  CHECK(out.str().find("1,0,write,2,3") != std::string::npos);

  MachineState off({1, 4, 2, 4}, plain(4), {false, TraceMode::Off});
  off.execute_step({{IoRequest::read(1)}});
  CHECK(off.trace().size() == 0);
  CHECK(off.io_count() == 1);
}

TEST_CASE("step observer sees the state before the step") {
  MachineState s({1, 4, 2, 4}, plain(4));
  std::vector<std::size_t> seen;
  s.set_step_observer([&](const MachineState& m) { seen.push_back(m.cache(0).size()); });
  s.execute_step({{IoRequest::read(0)}});
  s.execute_step({{IoRequest::read(1)}});
  CHECK(seen == std::vector<std::size_t>{0, 2});
}

TEST_CASE("random steps against the reference model") {
  auto out = fuzz::run(20000, 11);
  CHECK(out.steps == 20000);
  CHECK(out.invalid > 1000);
  CHECK(out.silent == 0);
  CHECK(out.wrong_code == 0);
  CHECK(out.false_reject == 0);
  CHECK(out.divergent == 0);
  for (ErrorCode c : {ErrorCode::CrewViolation, ErrorCode::CacheOverflow, ErrorCode::BlockOverflow,
                      ErrorCode::NoSuchBlock, ErrorCode::NotResident, ErrorCode::NotNormalized,
                      ErrorCode::ConfigError})
    CHECK(out.by_code[c] > 0);
}

}
