#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "pem/list_ranking.hpp"

using namespace pem;

namespace {

struct Fixture {
  LinkedListInstance list;
  MachineState state;
  ListRankingState run;

  Fixture(std::vector<std::uint64_t> succ, MachineConfig cfg)
      : list(LinkedListInstance::from_successors(succ)),
        state((cfg.N = succ.size(), cfg), list_payloads(list), MachineOptions{false, TraceMode::Off}),
        run(start_ranking(state, list)) {}
};

std::uint64_t live_weight(const ListRankingState& run) {
  std::uint64_t w = 0;
  for (auto x : run.live) w += run.list.weight[x];
  return w;
}

}  // namespace

TEST_SUITE("list_ranking") {

TEST_CASE("sequential oracle") {
  CHECK(sequential_rank_oracle(std::vector<std::uint64_t>{1, 2, kTail}) == RankAssignment{2, 1, 0});
  CHECK(sequential_rank_oracle(std::vector<std::uint64_t>{kTail}) == RankAssignment{0});
  auto succ = random_list(100000, 4);
  auto ranks = sequential_rank_oracle(succ);
  std::vector<bool> hit(ranks.size(), false);
  for (auto r : ranks) {
    REQUIRE(r < ranks.size());
    hit[r] = true;
  }
  CHECK(std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }));
}

TEST_CASE("path check") {
  CHECK_NOTHROW(check_path(std::vector<std::uint64_t>{1, 2, kTail}));
  for (std::vector<std::uint64_t> bad : {std::vector<std::uint64_t>{2, 2, kTail},
                                         std::vector<std::uint64_t>{1, 0, kTail},
                                         std::vector<std::uint64_t>{1, 2, 5},
                                         std::vector<std::uint64_t>{kTail, kTail}}) {
    try {
      check_path(bad);
      FAIL("accepted a broken path");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotAPath);
    }
  }
}

TEST_CASE("doubly linking a chain") {
  Fixture f({1, 2, kTail}, {1, 4, 1, 0});
  make_doubly_linked(f.state, f.run);
  CHECK(f.run.list.pred == std::vector<std::uint64_t>{kHead, 0, 1});
  CHECK(f.state.io_count() > 0);

  Fixture one({kTail}, {1, 2, 1, 0});
  make_doubly_linked(one.state, one.run);
  CHECK(one.run.list.pred == std::vector<std::uint64_t>{kHead});
  CHECK(one.run.list.succ == std::vector<std::uint64_t>{kTail});
}

TEST_CASE("doubly linking random lists") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto succ = random_list(500, seed);
    Fixture f(succ, {4, 8, 4, 0});
    make_doubly_linked(f.state, f.run);
    for (std::uint64_t x = 0; x < 500; ++x)
      if (succ[x] != kTail) CHECK(f.run.list.pred[succ[x]] == x);
  }
}

TEST_CASE("independent set rule") {
  Fixture f({1, 2, 3, 4, kTail}, {1, 4, 1, 0});
  CHECK(sample_independent_set(f.run, CoinVector{1, 0, 1, 1, 0}) == std::vector<std::uint64_t>{0, 3});
  CHECK(sample_independent_set(f.run, CoinVector{0, 0, 0, 0, 0}).empty());
  // The tail never qualifies: it has no successor.
  CHECK(sample_independent_set(f.run, CoinVector{0, 0, 0, 0, 1}).empty());
}

TEST_CASE("independent set size and independence") {
  const std::size_t n = 1024;
  auto succ = random_list(n, 9);
  Fixture f(succ, {4, 8, 4, 0});
  double sum = 0, sq = 0;
  const int trials = 10000;
  std::size_t adjacent = 0;
  for (int t = 0; t < trials; ++t) {
    auto s = sample_independent_set(f.run, draw_coins(n, 77, t));
    std::vector<bool> in(n, false);
    for (auto x : s) in[x] = true;
    for (auto x : s)
      if (succ[x] != kTail && in[succ[x]]) ++adjacent;
    sum += s.size();
    sq += double(s.size()) * s.size();
  }
  const double mean = sum / trials;
  const double sd = std::sqrt(sq / trials - mean * mean);
  CHECK(adjacent == 0);
  CHECK(std::abs(mean - (n - 1) / 4.0) <= 5 * sd / std::sqrt(double(trials)));
}

TEST_CASE("coins are deterministic per seed and round") {
  CHECK(draw_coins(64, 1, 0) == draw_coins(64, 1, 0));
  CHECK(draw_coins(64, 1, 0) != draw_coins(64, 1, 1));
  CHECK(draw_coins(64, 1, 0) != draw_coins(64, 2, 0));
}

TEST_CASE("bridging out one element") {
  Fixture f({1, 2, kTail}, {1, 4, 1, 0});
  make_doubly_linked(f.state, f.run);
  std::vector<std::uint64_t> s{1};
  auto entries = bridge_out(f.state, f.run, s);
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].removed == 1);
  CHECK(entries[0].pred == 0);
  CHECK(entries[0].succ == 2);
  CHECK(f.run.list.succ[0] == 2);
  CHECK(f.run.list.weight[0] == 2);
  CHECK(f.run.live == std::vector<std::uint64_t>{0, 2});
}

TEST_CASE("bridging out nothing") {
  Fixture f({1, 2, kTail}, {1, 4, 1, 0});
  make_doubly_linked(f.state, f.run);
  auto before = f.run.list.succ;
  auto entries = bridge_out(f.state, f.run, std::vector<std::uint64_t>{});
  CHECK(entries.empty());
  CHECK(f.run.list.succ == before);
}

TEST_CASE("dependent sets are refused") {
  Fixture f({1, 2, 3, kTail}, {1, 4, 1, 0});
  make_doubly_linked(f.state, f.run);
  for (std::vector<std::uint64_t> s : {std::vector<std::uint64_t>{1, 2}, std::vector<std::uint64_t>{0},
                                       std::vector<std::uint64_t>{3}, std::vector<std::uint64_t>{1, 1}}) {
    try {
      bridge_out(f.state, f.run, s);
      FAIL("accepted a dependent set");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DependentSet);
    }
  }
}

TEST_CASE("contraction keeps the total link weight") {
  const std::size_t n = 2000;
  Fixture f(random_list(n, 21), {4, 16, 4, 0});
  make_doubly_linked(f.state, f.run);
  for (int round = 0; round < 6; ++round) {
    auto s = sample_independent_set(f.run, draw_coins(n, 5, round));
    std::erase_if(s, [&](auto x) { return f.run.list.pred[x] == kHead; });
    bridge_out(f.state, f.run, s);
    CHECK(live_weight(f.run) == n - 1);
    CHECK(f.run.layout.blocks.size() * 4 >= f.run.live.size());
  }
}

TEST_CASE("cutoff arithmetic") {
  CHECK(small_list_cutoff({16, 16, 8, 4096}) == 64);
  CHECK(small_list_cutoff({64, 12, 6, 4096}) == 384);
  CHECK(small_list_cutoff({1, 4, 2, 64}) == 2);
  CHECK(small_list_cutoff({4, 16, 1, 64}) == 4);
}

TEST_CASE("first phase stops at the cutoff") {
  Fixture f(random_list(4096, 2), {16, 16, 8, 0});
  make_doubly_linked(f.state, f.run);
  BridgeRecord record;
  auto stats = list_rank_alg1(f.state, f.run, 3, record);
  CHECK(f.run.live.size() <= 64);
  CHECK(stats.rounds == record.rounds.size());
  CHECK(stats.rounds > 0);

  BridgeRecord none;
  auto idle = list_rank_alg1(f.state, f.run, 3, none);
  CHECK(idle.rounds == 0);
  CHECK(none.rounds.empty());
}

TEST_CASE("first phase round count") {
  // Each round removes close to a quarter of the list in expectation.
  const std::size_t n = 4096;
  double rounds = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Fixture f(random_list(n, seed), {16, 16, 8, 0});
    make_doubly_linked(f.state, f.run);
    BridgeRecord record;
    rounds += list_rank_alg1(f.state, f.run, seed, record).rounds;
  }
  const double expected = std::log(n / 64.0) / std::log(4.0 / 3.0);
  CHECK(rounds / 100 <= 3 * expected);
  CHECK(rounds / 100 >= expected / 3);
}

TEST_CASE("queue phase bridges every element once") {
  Fixture f(random_list(8, 6), {4, 4, 2, 0});
  make_doubly_linked(f.state, f.run);
  BridgeRecord record;
  CHECK(small_list_cutoff(f.state.config()) == 8);
  auto stats = list_rank_alg2(f.state, f.run, 6, record);
  CHECK(stats.rounds <= 8);
  CHECK(f.run.live.size() <= 2);
  std::vector<int> seen(8, 0);
  for (const auto& round : record.rounds)
    for (const auto& e : round) ++seen[e.removed];
  for (std::uint64_t x = 0; x < 8; ++x) CHECK(seen[x] == (x == f.run.head || x == f.run.tail ? 0 : 1));
  CHECK(unwind_ranks(f.run, record) == sequential_rank_oracle(random_list(8, 6)));
}

TEST_CASE("unwinding small lists") {
  auto r3 = rank_list({1, 4, 1, 0}, std::vector<std::uint64_t>{1, 2, kTail}, 1);
  CHECK(r3.ranks == RankAssignment{2, 1, 0});
  auto r1 = rank_list({1, 2, 1, 0}, std::vector<std::uint64_t>{kTail}, 1);
  CHECK(r1.ranks == RankAssignment{0});
}

TEST_CASE("corrupt records are detected") {
  Fixture f({1, 2, kTail}, {1, 4, 1, 0});
  make_doubly_linked(f.state, f.run);
  BridgeRecord record;
  record.rounds.push_back({BridgeEntry{1, 0, 2, 1}});
  f.run.live = {0, 2};
  f.run.list.succ[0] = 2;
  f.run.list.weight[0] = 2;
  CHECK(unwind_ranks(f.run, record) == RankAssignment{2, 1, 0});
  record.rounds.push_back({BridgeEntry{1, 0, 2, 1}});
  try {
    unwind_ranks(f.run, record);
    FAIL("double reinsertion accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CorruptRecord);
  }
}

TEST_CASE("full pipeline matches the oracle") {
  for (MachineConfig cfg : {MachineConfig{4, 16, 4, 0}, MachineConfig{16, 8, 4, 0}, MachineConfig{1, 2, 1, 0},
                            MachineConfig{8, 4, 2, 0}, MachineConfig{2, 64, 16, 0}}) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      auto succ = random_list(1000, seed);
      auto r = rank_list(cfg, succ, seed, {false, TraceMode::Off});
      CHECK(r.ranks == sequential_rank_oracle(succ));
    }
  }
  auto succ = random_list(4096, 8);
  CHECK(rank_list({8, 16, 4, 0}, succ, 8, {false, TraceMode::Off}).ranks == sequential_rank_oracle(succ));
}

TEST_CASE("pipeline in normalized mode") {
  auto succ = random_list(600, 12);
  auto r = rank_list({4, 8, 2, 0}, succ, 12, {true, TraceMode::Off});
  CHECK(r.ranks == sequential_rank_oracle(succ));
}

TEST_CASE("regions visited") {
  auto succ = random_list(4096, 1);
  auto wide = rank_list({4, 16, 4, 0}, succ, 1, {false, TraceMode::Off});
  CHECK(wide.regions == std::vector<Region>{Region::Sorting, Region::Contraction, Region::Queues});
  auto narrow = rank_list({16, 8, 4, 0}, succ, 1, {false, TraceMode::Off});
  CHECK(narrow.regions == std::vector<Region>{Region::Sorting, Region::Queues});
}

}
