#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "pem/machine.hpp"
#include "pem/program.hpp"

namespace pem {

using KeyFn = std::function<std::uint64_t(const Atom&)>;

struct SortOptions {
  std::size_t fill = 0;  // atoms per output block; 0 means B
};

// Multiway merge sort: chunks of up to M atoms are sorted in cache, then runs
// are merged with fan-in max{2, min{M/B, n/(PB)}} until one run is left.
// Equal keys keep their input order. Consumes the input layout.
Layout pem_merge_sort(MachineState& state, const Layout& input, const KeyFn& key,
                      SortOptions options = {});
// Sorts the initial input.
Layout pem_merge_sort(MachineState& state, const KeyFn& key);

enum class PermuteStrategy { Auto, Direct, Sort };

struct PermuteOptions {
  PermuteStrategy strategy = PermuteStrategy::Auto;
  std::size_t fill = 0;  // atoms per output block; 0 means B
};

// Moves the atom at logical position i to position target[i]. Direct routing
// gathers every output block straight from its sources; Auto picks it when
// n/P is below the sorting bound. Consumes the input layout.
Layout pem_permute(MachineState& state, const Layout& input, std::span<const std::size_t> target,
                   PermuteOptions options = {});
Layout pem_permute(MachineState& state, std::span<const std::size_t> target);

// labels[i] in [1, N/2] is the label of the atom initially at position i.
// Sorts by label so that both atoms of every label end up in one block.
BlockPermutation solve_proximate_neighbors(MachineState& state, std::span<const std::size_t> labels);

// True if both atoms of every label share a block of `blocks`.
bool pairs_co_blocked(const BlockPermutation& blocks, std::span<const std::size_t> labels);

}  // namespace pem
