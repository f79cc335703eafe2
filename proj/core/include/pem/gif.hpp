#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "pem/machine.hpp"
#include "pem/program.hpp"
#include "pem/variants.hpp"

namespace pem {

// Atom i (id i) is the interval [perm[i]-1, perm[i]] and starts in cell i.
struct GifInstance {
  std::size_t n = 0;
  std::vector<std::size_t> perm;  // values 1..n
  MachineConfig config;
};

// n = 2^exponent atoms with P = M = sqrt(n) and B = M/2; exponent must be even.
GifInstance generate_gif_instance(unsigned exponent, std::uint64_t seed);
// Any power-of-two n with an explicit permutation and machine.
GifInstance make_gif_instance(std::vector<std::size_t> perm, MachineConfig config);

// Boundaries 1..n-1 are the internal nodes of a perfect binary tree over the
// n unit intervals. Leaves have level 1; boundary p sits at level ctz(p) + 2.
std::size_t boundary_level(std::size_t p);

struct FuseOutcome {
  bool fused = false;
  bool was_chance = false;  // no revealed point where the operands met
  AtomId atom = 0;
};

struct GuideAudit {
  std::size_t uncovered_atoms = 0;   // live atoms with no revealed boundary
  std::size_t illegal_reveals = 0;   // reveals without a solved child
  std::size_t tiling_gaps = 0;       // points of [0, n] no live atom covers
  bool ok() const { return uncovered_atoms == 0 && illegal_reveals == 0 && tiling_gaps == 0; }
};

// The game state: the machine plus what the guide has revealed.
class GifGame {
 public:
  explicit GifGame(const GifInstance& instance, MachineOptions options = {});

  MachineState& machine() { return *machine_; }
  const MachineState& machine() const { return *machine_; }
  const GifInstance& instance() const { return instance_; }

  bool revealed(std::size_t p) const { return revealed_.at(p); }
  bool solved(std::size_t p) const { return solved_.at(p); }
  // Node solved: some atom has covered the leaves below boundary p.
  bool node_solved(std::size_t p) const { return node_solved_.at(p); }
  std::size_t revealed_count() const { return revealed_count_; }
  std::size_t solved_count() const { return solved_count_; }
  std::size_t chance_encounters() const { return chance_; }
  std::size_t illegal_reveals() const { return illegal_reveals_; }
  bool finished() const { return finished_; }

  // Applies the guide to every live atom (in order of left endpoint).
  void reveal_boundaries();
  // Fuses x and y in p's cache; on success marks the boundaries now interior
  // as solved and lets the guide react to the new atom.
  FuseOutcome attempt_fuse(ProcId p, AtomId x, AtomId y);

  // Full check of the guide guarantees over all live atoms.
  GuideAudit audit() const;

 private:
  void reveal_for(std::int64_t lo, std::int64_t hi);
  void mark_nodes(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d);
  bool has_solved_child(std::size_t p) const;

  GifInstance instance_;
  std::unique_ptr<MachineState> machine_;
  std::vector<bool> revealed_;
  std::vector<bool> solved_;
  std::vector<bool> node_solved_;
  std::size_t revealed_count_ = 0;
  std::size_t solved_count_ = 0;
  std::size_t chance_ = 0;
  std::size_t illegal_reveals_ = 0;
  bool finished_ = false;
};

// Pairs (leaf left of p, leaf right of p) for every boundary p at `level`,
// tracked through the atoms derived from them.
class MultiplicityMonitor {
 public:
  MultiplicityMonitor(std::size_t n, std::size_t level);

  // Multiplicity of the configuration; also checks it against the previous one.
  std::size_t observe(const MachineState& state);
  std::size_t violations() const { return violations_; }
  const std::vector<std::size_t>& history() const { return history_; }
  std::size_t traced() const { return boundaries_.size(); }

 private:
  void refresh(const MachineState& state, std::size_t location, std::span<const AtomId> atoms);

  std::vector<std::size_t> boundaries_;
  std::size_t stride_;
  std::size_t first_;
  std::size_t procs_ = 0;
  bool primed_ = false;
  std::vector<std::vector<std::uint32_t>> loc_a_;  // location -> traced pairs it holds a side of
  std::vector<std::vector<std::uint32_t>> loc_b_;
  std::vector<std::vector<std::uint32_t>> where_a_;  // traced pair -> locations
  std::vector<std::vector<std::uint32_t>> where_b_;
  std::vector<std::size_t> history_;
  std::size_t violations_ = 0;
};

// Edge {u,v} -> number of traced pairs split across u and v.
using MultiplicityGraph = std::unordered_map<std::uint64_t, std::size_t>;

// Direct construction over all caches (vertices 0..P-1) and blocks (P + b),
// for pairs of initial atom ids.
MultiplicityGraph multiplicity_graph(const MachineState& state,
                                     const std::vector<std::pair<AtomId, AtomId>>& traced);
std::size_t multiplicity(const MultiplicityGraph& graph);
std::uint64_t edge_key(std::size_t u, std::size_t v);

// Violations of m(t+1) <= 4 m(t) over a sequence of multiplicities.
AuditReport audit_quadrupling(const std::vector<std::size_t>& multiplicities);

struct GifRoundLog {
  std::size_t round;
  std::size_t live_atoms;
  std::size_t revealed;
  std::size_t solved;
  std::size_t chance_encounters;
  std::uint64_t io_count;
};

struct GifRun {
  std::size_t rounds = 0;
  std::uint64_t io_count = 0;
  bool solved = false;  // an atom [0, n] exists
  std::vector<GifRoundLog> log;
  GuideAudit guide;
  std::size_t quadrupling_violations = 0;
  std::size_t max_multiplicity = 0;
};

struct SolverOptions {
  bool monitor = true;
  std::size_t traced_level = 0;  // 0 picks the middle level
};

// Each round matches neighbouring atoms along revealed boundaries, permutes
// the pairs next to each other and fuses them in cache.
GifRun omniscient_reference_solver(GifGame& game, SolverOptions options = {});

// `round,live_atoms,revealed,solved,chance_encounters,io_count`.
void write_gif_log(std::ostream& out, const std::vector<GifRoundLog>& log);

}  // namespace pem
