#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pem/machine.hpp"

namespace pem {

struct SemigroupSpec {
  std::string name;
  std::function<SemigroupValue(const SemigroupValue&, const SemigroupValue&)> combine;
};

// Word concatenation.
SemigroupSpec concatenation_semigroup();
// Values are pairs (a, b); (a, b) * (c, d) = (a, d).
SemigroupSpec pairing_semigroup();

// Checks combine(combine(a,b),c) == combine(a,combine(b,c)) on random triples
// drawn from `domain`.
bool spot_check_associative(const SemigroupSpec& spec, std::span<const SemigroupValue> domain,
                            std::uint64_t seed, std::size_t trials);

// Creates x*y in p's cache. The operands stay in the cache.
AtomId semigroup_combine(MachineState& state, ProcId p, AtomId x, AtomId y,
                         const SemigroupSpec& spec);

// Replaces (a,b) and (b,c) in p's cache by (a,c); weights add up.
AtomId edge_contract(MachineState& state, ProcId p, AtomId first, AtomId second);

struct FuseResult {
  bool fused = false;
  AtomId atom = 0;           // the new atom when fused
  std::int64_t meet_lo = 0;  // intersection of the operand intervals
  std::int64_t meet_hi = -1;
};

// Replaces two intersecting interval atoms by their union. Disjoint
// operands leave the state untouched and report fused == false.
FuseResult interval_fuse(MachineState& state, ProcId p, AtomId x, AtomId y);

struct AuditReport {
  bool pass = true;
  std::vector<std::string> violations;
};

struct ContiguityReport : AuditReport {
  std::vector<std::size_t> cuts;  // join points i: a run ending at i met one starting at i+1
  bool all_cuts = false;          // every i in [1, n-1] occurs as a join point
  bool full_product = false;      // some result covers [1, n]
};

// `position` maps each initial atom id to its 1-based place in the product.
ContiguityReport contiguity_audit(const OpLog& log, std::span<const std::size_t> position);

// Line-delimited `io_count,proc,kind,operand_ids,result_id`.
void write_op_log(std::ostream& out, const OpLog& log);

}  // namespace pem
