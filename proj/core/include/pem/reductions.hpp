#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "pem/machine.hpp"
#include "pem/variants.hpp"

namespace pem {

// labels[i] in [1, N/2] labels atom x_{i+1}; every label is used twice.
struct PnInstance {
  std::vector<std::size_t> labels;
};

// Evaluate prod_{i=1..N} a_{perm(i)}; inputs[i] is a_{i+1}, perm is 1-based.
struct SemigroupInstance {
  std::vector<std::size_t> perm;
  std::vector<SemigroupValue> inputs;
};

// cells[c-1] holds e_c = (c, perm(perm^-1(c)+1)), with perm(N+1) = N+1.
struct EdgeContractionInstance {
  std::vector<EdgePayload> cells;
};

// Pairing semigroup with a_i = (i, i) and a random orientation of every
// label pair: {perm(2i-1), perm(2i)} is the pair labelled i.
SemigroupInstance pn_to_semigroup(const PnInstance& pn, std::uint64_t seed);

// Random distinct-symbol words for the concatenation semigroup.
SemigroupInstance random_semigroup_instance(std::size_t n, std::uint64_t seed);

SemigroupValue direct_product(const SemigroupInstance& se, const SemigroupSpec& spec);

enum class EvalShape {
  LeftFold,  // processor 0 folds the whole sequence
  Tree,      // every processor reduces its segment, then partials meet pairwise
};

// Runs the evaluation on `state`, whose N initial atoms must be the
// instance's inputs. Returns the atom holding the product.
AtomId evaluate_semigroup(MachineState& state, const SemigroupInstance& se,
                          const SemigroupSpec& spec, EvalShape shape);
// Builds a machine with the given parameters and evaluates on it.
MachineState run_semigroup_evaluation(MachineConfig config, const SemigroupInstance& se,
                                      const SemigroupSpec& spec, EvalShape shape,
                                      MachineOptions options = {});

// 1-based product position of every input atom.
std::vector<std::size_t> product_positions(const SemigroupInstance& se);

// For every combine (a,b)*(c,d) of the log, the pair {b,c} (atom numbers,
// 1-based, smaller first).
std::vector<std::pair<std::size_t, std::size_t>> extract_pn_solution(const MachineState& state,
                                                                     const SemigroupInstance& se);
bool solves_pn(const std::vector<std::pair<std::size_t, std::size_t>>& pairs, const PnInstance& pn);

EdgeContractionInstance semigroup_to_edge_contraction(const SemigroupInstance& se);

// Contracts the whole path on a machine and replays every contraction as a
// combine of the matching semigroup values.
SemigroupValue replay_edge_contraction(MachineConfig config, const EdgeContractionInstance& ec,
                                       const SemigroupInstance& se, const SemigroupSpec& spec);

// Number of special instances (first half labelled 1..N/2, second half any
// matching) that `out` solves.
std::uint64_t count_solved_instances(const BlockPermutation& out, std::size_t n, std::size_t b);
double solved_instance_bound(std::size_t n, std::size_t b);

// All (N/2)! special instances, N <= 12.
std::vector<PnInstance> enumerate_special_instances(std::size_t n);

}  // namespace pem
