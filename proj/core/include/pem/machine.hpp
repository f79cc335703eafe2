#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <iosfwd>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "pem/error.hpp"

namespace pem {

using AtomId = std::uint64_t;
using BlockIndex = std::size_t;
using ProcId = std::size_t;

// Machine parameters. All sizes are counted in atoms.
struct MachineConfig {
  std::size_t P = 1;  // processors
  std::size_t M = 2;  // cache capacity
  std::size_t B = 1;  // block capacity
  std::size_t N = 1;  // input size

  // Throws ConfigError unless P >= 1, B >= 1, M >= 2B, N >= 1 and P <= N/B.
  void validate() const;
};

struct PlainPayload {
  friend bool operator==(const PlainPayload&, const PlainPayload&) = default;
};

// Opaque semigroup element: a word over 64-bit symbols. The machine never
// looks inside; only a SemigroupSpec's combine function does.
struct SemigroupValue {
  std::vector<std::uint64_t> symbols;
  friend bool operator==(const SemigroupValue&, const SemigroupValue&) = default;
};

struct SemigroupPayload {
  SemigroupValue value;
  friend bool operator==(const SemigroupPayload&, const SemigroupPayload&) = default;
};

// Directed edge src -> dst. The weight is the path length the edge stands
// for; contracting two edges adds their weights.
struct EdgePayload {
  std::uint64_t src = 0;
  std::uint64_t dst = 0;
  std::uint64_t weight = 1;
  friend bool operator==(const EdgePayload&, const EdgePayload&) = default;
};

// Closed interval [lo, hi] with integer endpoints.
struct IntervalPayload {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  friend bool operator==(const IntervalPayload&, const IntervalPayload&) = default;
};

using Payload = std::variant<PlainPayload, SemigroupPayload, EdgePayload, IntervalPayload>;

enum class PayloadKind { Plain = 0, Semigroup = 1, Edge = 2, Interval = 3 };

inline PayloadKind kind_of(const Payload& p) { return static_cast<PayloadKind>(p.index()); }

struct Atom {
  AtomId id = 0;
  Payload payload;
  // Sorted ids of the initial atoms this atom derives from.
  std::vector<AtomId> provenance;
};

enum class IoKind : std::uint8_t { Idle, Read, Write };

struct IoRequest {
  IoKind kind = IoKind::Idle;
  BlockIndex block = 0;
  std::vector<AtomId> atoms;  // Write: the selection taken from the writer's cache

  static IoRequest idle() { return {}; }
  static IoRequest read(BlockIndex b) { return {IoKind::Read, b, {}}; }
  static IoRequest write(BlockIndex b, std::vector<AtomId> atoms) {
    return {IoKind::Write, b, std::move(atoms)};
  }
};

// One request per processor; executing it costs exactly one parallel I/O.
struct ParallelStep {
  std::vector<IoRequest> requests;

  static ParallelStep all_idle(std::size_t procs) { return {std::vector<IoRequest>(procs)}; }
};

enum class TraceMode {
  Full,   // requests plus atom ids moved by reads and writes
  Steps,  // requests without atom ids
  Off,    // nothing recorded; io_count still maintained
};

struct TraceEntry {
  std::vector<IoRequest> requests;
  std::vector<std::vector<AtomId>> read_contents;  // Full mode only, one per processor
};

struct IoTrace {
  std::vector<TraceEntry> steps;
  std::size_t size() const { return steps.size(); }
};

enum class OpKind : std::uint8_t { Combine, Contract, Fuse, Copy };

struct OpRecord {
  OpKind kind = OpKind::Combine;
  ProcId proc = 0;
  std::vector<AtomId> operands;
  AtomId result = 0;
  std::uint64_t io_count = 0;
};

using OpLog = std::vector<OpRecord>;

// Unordered content of shared memory: block index -> atom ids.
using BlockPermutation = std::map<BlockIndex, std::set<AtomId>>;

struct MachineOptions {
  bool normalized = false;  // reject steps mixing reads and writes
  TraceMode trace = TraceMode::Steps;
};

class MachineState {
 public:
  // Lays the initial atoms out B per block in input order. Atom i gets id i.
  MachineState(MachineConfig config, std::span<const Payload> initial, MachineOptions options = {});

  const MachineConfig& config() const { return config_; }
  const MachineOptions& options() const { return options_; }
  std::uint64_t io_count() const { return io_count_; }
  const IoTrace& trace() const { return trace_; }
  const OpLog& op_log() const { return op_log_; }

  std::size_t block_count() const { return blocks_.size(); }
  std::span<const AtomId> block(BlockIndex b) const;
  std::span<const AtomId> cache(ProcId p) const;
  std::size_t atom_count() const { return atoms_.size(); }
  const Atom& atom(AtomId id) const;
  bool is_resident(ProcId p, AtomId id) const;
  // Number of cells (block or cache slots) currently holding the atom.
  std::uint32_t instances(AtomId id) const;
  // Blocks written by the most recent parallel I/O.
  std::span<const BlockIndex> last_written() const { return last_written_; }

  // Executes one parallel I/O. Validation happens before any mutation, so a
  // rejected step leaves the state untouched. Errors are checked in this
  // order: step shape (ConfigError), NotNormalized, CrewViolation, then per
  // processor in index order NoSuchBlock/CacheOverflow for reads and
  // BlockOverflow/NotResident for writes.
  void execute_step(const ParallelStep& step);

  // In-cache operations; free of I/O cost.
  AtomId copy_atom(ProcId p, AtomId id);
  void delete_atom(ProcId p, AtomId id);
  void delete_atoms(ProcId p, std::span<const AtomId> ids);

  // Creates a fresh atom directly in a cache. Used by the variant operations.
  AtomId create_atom(ProcId p, Payload payload, std::vector<AtomId> provenance);
  void append_op(OpRecord record) { op_log_.push_back(std::move(record)); }

  // Scratch space management. Allocation is bookkeeping only and costs no I/O;
  // released blocks keep their (stale) contents until they are overwritten.
  std::vector<BlockIndex> acquire_blocks(std::size_t count);
  void release_blocks(std::span<const BlockIndex> blocks);

  BlockPermutation snapshot_block_permutation() const;
  BlockPermutation snapshot_block_permutation(std::span<const BlockIndex> blocks) const;

  // Called with the configuration reached just before each parallel I/O.
  void set_step_observer(std::function<void(const MachineState&)> observer) {
    observer_ = std::move(observer);
  }

 private:
  void check_proc(ProcId p) const;
  void check_atom(AtomId id) const;
  void add_instance(AtomId id) { ++instances_[id]; }
  void drop_instance(AtomId id);
  bool remove_one(std::vector<AtomId>& cache, AtomId id);
  // Removes `ids` (as a multiset) from the cache; false if one is missing.
  bool remove_many(std::vector<AtomId>& cache, std::span<const AtomId> ids);
  // As remove_many, for a selection already known to be resident.
  void remove_resident(std::vector<AtomId>& cache, std::span<const AtomId> ids);
  bool contains_all(const std::vector<AtomId>& cache, std::span<const AtomId> ids) const;

  MachineConfig config_;
  MachineOptions options_;
  std::vector<std::vector<AtomId>> blocks_;
  std::vector<std::vector<AtomId>> caches_;
  std::vector<Atom> atoms_;
  std::vector<std::uint32_t> instances_;
  mutable std::vector<std::uint32_t> scratch_marks_;
  std::vector<BlockIndex> free_blocks_;
  std::vector<BlockIndex> last_written_;
  std::vector<BlockIndex> written_scratch_;
  std::uint64_t io_count_ = 0;
  IoTrace trace_;
  OpLog op_log_;
  std::function<void(const MachineState&)> observer_;
};

std::string_view to_string(IoKind kind);
std::string_view to_string(OpKind kind);

// Line-delimited `step_index,proc,action,block,atom_ids`; ids are space separated.
void write_trace(std::ostream& out, const IoTrace& trace);

}  // namespace pem
