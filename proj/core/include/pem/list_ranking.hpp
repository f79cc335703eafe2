#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "pem/machine.hpp"
#include "pem/program.hpp"

namespace pem {

inline constexpr std::uint64_t kTail = std::numeric_limits<std::uint64_t>::max();
inline constexpr std::uint64_t kHead = std::numeric_limits<std::uint64_t>::max() - 1;

// Elements are 0..N-1; element x lives in cell x of the input.
struct LinkedListInstance {
  std::vector<std::uint64_t> succ;    // kTail for the last element
  std::vector<std::uint64_t> pred;    // kHead for the first; empty until doubled
  std::vector<std::uint64_t> weight;  // length of the link x -> succ(x)

  static LinkedListInstance from_successors(std::vector<std::uint64_t> succ);
  std::size_t size() const { return succ.size(); }
};

using RankAssignment = std::vector<std::uint64_t>;
using CoinVector = std::vector<std::uint8_t>;

struct BridgeEntry {
  std::uint64_t removed;
  std::uint64_t pred;
  std::uint64_t succ;
  std::uint64_t weight;  // of the link removed -> succ at removal time
};

struct BridgeRecord {
  std::vector<std::vector<BridgeEntry>> rounds;
};

// Throws NotAPath unless the successor links form one simple path over all elements.
void check_path(std::span<const std::uint64_t> succ);

// One edge atom per element: x -> succ(x) with weight 1; the tail holds a
// weight 0 link to kTail so that live link weights always sum to N-1.
std::vector<Payload> list_payloads(const LinkedListInstance& list);

// Live part of a list being ranked together with its shared-memory image.
struct ListRankingState {
  LinkedListInstance list;
  std::vector<std::uint64_t> live;  // sorted ids
  std::uint64_t head = 0;
  std::uint64_t tail = 0;
  Layout layout;                    // one edge atom per live element, in id order
};

// Starts from a machine built over list_payloads(list) with its initial layout.
ListRankingState start_ranking(const MachineState& state, const LinkedListInstance& list);

// Derives predecessor links with two permutations: every element's link is
// sent to its successor's cell and then back home.
void make_doubly_linked(MachineState& state, ListRankingState& run);

// Deterministic fair coins for one round.
CoinVector draw_coins(std::size_t n, std::uint64_t seed, std::uint64_t round);

// x is selected iff coin(x) = 1, x has a successor and coin(succ(x)) = 0.
std::vector<std::uint64_t> sample_independent_set(const ListRankingState& run,
                                                  const CoinVector& coins);

// Removes S from the list: sort to place each removed element's link right
// after its predecessor's, contract the pairs in one scan, then sort by
// destination and by source to rebuild the id-ordered image.
std::vector<BridgeEntry> bridge_out(MachineState& state, ListRankingState& run,
                                    std::span<const std::uint64_t> S);

// P * max{1, min{floor(log P), B}}, at least 2.
std::size_t small_list_cutoff(const MachineConfig& config);

struct PhaseStats {
  std::size_t rounds = 0;
  std::vector<std::size_t> sizes;  // live elements before each round
};

PhaseStats list_rank_alg1(MachineState& state, ListRankingState& run, std::uint64_t seed,
                          BridgeRecord& record);
PhaseStats list_rank_alg2(MachineState& state, ListRankingState& run, std::uint64_t seed,
                          BridgeRecord& record);

RankAssignment unwind_ranks(const ListRankingState& run, const BridgeRecord& record);
RankAssignment sequential_rank_oracle(std::span<const std::uint64_t> succ);

enum class Region { Sorting, Contraction, Queues };

struct ListRankResult {
  RankAssignment ranks;
  std::uint64_t io_count = 0;
  std::size_t alg1_rounds = 0;
  std::size_t alg2_rounds = 0;
  std::vector<Region> regions;  // in order of first visit
};

// Full pipeline on a fresh machine with the given parameters (config.N is
// taken from the list).
ListRankResult rank_list(MachineConfig config, std::span<const std::uint64_t> succ,
                         std::uint64_t seed, MachineOptions options = {});

// A uniformly random list over 0..n-1.
std::vector<std::uint64_t> random_list(std::size_t n, std::uint64_t seed);

}  // namespace pem
