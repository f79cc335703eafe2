#include "pem/machine.hpp"

#include <algorithm>
#include <ostream>
#include <string>

namespace pem {

namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace

void MachineConfig::validate() const {
  if (P < 1) fail(ErrorCode::ConfigError, "P must be at least 1");
  if (B < 1) fail(ErrorCode::ConfigError, "B must be at least 1");
  if (N < 1) fail(ErrorCode::ConfigError, "N must be at least 1");
  if (M < 2 * B) fail(ErrorCode::ConfigError, "M must hold two blocks");
  if (P * B > N) fail(ErrorCode::ConfigError, "P exceeds N/B");
}

MachineState::MachineState(MachineConfig config, std::span<const Payload> initial,
                           MachineOptions options)
    : config_(config), options_(options) {
  config_.validate();
  if (initial.size() != config_.N)
    fail(ErrorCode::ConfigError, "expected " + std::to_string(config_.N) + " initial atoms");
  caches_.resize(config_.P);
  atoms_.reserve(initial.size());
  for (AtomId id = 0; id < initial.size(); ++id) {
    atoms_.push_back(Atom{id, initial[id], {id}});
    instances_.push_back(1);
    if (id % config_.B == 0) blocks_.emplace_back();
    blocks_.back().push_back(id);
  }
}

std::span<const AtomId> MachineState::block(BlockIndex b) const {
  if (b >= blocks_.size()) fail(ErrorCode::NoSuchBlock, "block " + std::to_string(b));
  return blocks_[b];
}

std::span<const AtomId> MachineState::cache(ProcId p) const {
  check_proc(p);
  return caches_[p];
}

const Atom& MachineState::atom(AtomId id) const {
  check_atom(id);
  return atoms_[id];
}

bool MachineState::is_resident(ProcId p, AtomId id) const {
  check_proc(p);
  return std::find(caches_[p].begin(), caches_[p].end(), id) != caches_[p].end();
}

std::uint32_t MachineState::instances(AtomId id) const {
  check_atom(id);
  return instances_[id];
}

void MachineState::check_proc(ProcId p) const {
  if (p >= config_.P) fail(ErrorCode::ConfigError, "no processor " + std::to_string(p));
}

void MachineState::check_atom(AtomId id) const {
  if (id >= atoms_.size()) fail(ErrorCode::NotResident, "unknown atom " + std::to_string(id));
}

void MachineState::drop_instance(AtomId id) {
  if (--instances_[id] == 0) std::vector<AtomId>().swap(atoms_[id].provenance);
}

bool MachineState::contains_all(const std::vector<AtomId>& cache,
                                std::span<const AtomId> ids) const {
  if (ids.empty()) return true;
  if (ids.size() == 1) return std::find(cache.begin(), cache.end(), ids[0]) != cache.end();
  scratch_marks_.resize(atoms_.size());
  for (AtomId id : cache) ++scratch_marks_[id];
  bool ok = true;
  for (AtomId id : ids) {
    if (id >= atoms_.size() || scratch_marks_[id] == 0) {
      ok = false;
      break;
    }
    --scratch_marks_[id];
  }
  for (AtomId id : cache) scratch_marks_[id] = 0;
  return ok;
}

bool MachineState::remove_one(std::vector<AtomId>& cache, AtomId id) {
  auto it = std::find(cache.begin(), cache.end(), id);
  if (it == cache.end()) return false;
  cache.erase(it);
  return true;
}

bool MachineState::remove_many(std::vector<AtomId>& cache, std::span<const AtomId> ids) {
  if (ids.size() == 1) return remove_one(cache, ids[0]);
  if (!contains_all(cache, ids)) return false;
  remove_resident(cache, ids);
  return true;
}

void MachineState::remove_resident(std::vector<AtomId>& cache, std::span<const AtomId> ids) {
  if (ids.size() == 1) {
    cache.erase(std::find(cache.begin(), cache.end(), ids[0]));
    return;
  }
  scratch_marks_.resize(atoms_.size());
  for (AtomId id : ids) ++scratch_marks_[id];
  auto out = cache.begin();
  for (AtomId id : cache) {
    if (scratch_marks_[id] > 0) {
      --scratch_marks_[id];
    } else {
      *out++ = id;
    }
  }
  cache.erase(out, cache.end());
}

void MachineState::execute_step(const ParallelStep& step) {
  const auto& reqs = step.requests;
  if (reqs.size() != config_.P)
    fail(ErrorCode::ConfigError, "step has " + std::to_string(reqs.size()) + " requests for " +
                                     std::to_string(config_.P) + " processors");

  bool any_read = false;
  bool any_write = false;
  auto& written = written_scratch_;
  written.clear();
  for (const auto& r : reqs) {
    if (r.kind == IoKind::Read) any_read = true;
    if (r.kind == IoKind::Write) {
      any_write = true;
      written.push_back(r.block);
    }
  }
  if (options_.normalized && any_read && any_write)
    fail(ErrorCode::NotNormalized, "step mixes reads and writes");
  std::sort(written.begin(), written.end());
  if (auto dup = std::adjacent_find(written.begin(), written.end()); dup != written.end())
    fail(ErrorCode::CrewViolation, "two writes to block " + std::to_string(*dup));

  for (ProcId p = 0; p < reqs.size(); ++p) {
    const auto& r = reqs[p];
    if (r.kind == IoKind::Read) {
      if (r.block >= blocks_.size())
        fail(ErrorCode::NoSuchBlock, "processor " + std::to_string(p) + " reads block " +
                                         std::to_string(r.block));
      if (caches_[p].size() + blocks_[r.block].size() > config_.M)
        fail(ErrorCode::CacheOverflow, "processor " + std::to_string(p) + " reading block " +
                                           std::to_string(r.block));
    } else if (r.kind == IoKind::Write) {
      if (r.atoms.size() > config_.B)
        fail(ErrorCode::BlockOverflow, "processor " + std::to_string(p) + " writes " +
                                           std::to_string(r.atoms.size()) + " atoms");
      if (!contains_all(caches_[p], r.atoms))
        fail(ErrorCode::NotResident, "processor " + std::to_string(p) +
                                         " writes atoms it does not hold");
    }
  }

  if (observer_) observer_(*this);

  TraceEntry entry;
  const bool keep_trace = options_.trace != TraceMode::Off;
  const bool full = options_.trace == TraceMode::Full;
  if (full) entry.read_contents.resize(config_.P);

  // Reads see the shared memory as it was before the step, so they go first.
  for (ProcId p = 0; p < reqs.size(); ++p) {
    const auto& r = reqs[p];
    if (r.kind != IoKind::Read) continue;
    const auto& src = blocks_[r.block];
    caches_[p].insert(caches_[p].end(), src.begin(), src.end());
    for (AtomId id : src) add_instance(id);
    if (full) entry.read_contents[p] = src;
  }
  last_written_.clear();
  for (ProcId p = 0; p < reqs.size(); ++p) {
    const auto& r = reqs[p];
    if (r.kind != IoKind::Write) continue;
    if (r.block >= blocks_.size()) blocks_.resize(r.block + 1);
    // The written atoms move from cache to block; only the overwritten ones vanish.
    remove_resident(caches_[p], r.atoms);
    for (AtomId id : blocks_[r.block]) drop_instance(id);
    blocks_[r.block] = r.atoms;
    last_written_.push_back(r.block);
  }

  ++io_count_;
  if (keep_trace) {
    entry.requests = reqs;
    if (!full)
      for (auto& r : entry.requests) r.atoms.clear();
    trace_.steps.push_back(std::move(entry));
  }
}

AtomId MachineState::copy_atom(ProcId p, AtomId id) {
  check_proc(p);
  if (!is_resident(p, id)) fail(ErrorCode::NotResident, "copy of atom " + std::to_string(id));
  if (caches_[p].size() >= config_.M) fail(ErrorCode::CacheOverflow, "copy into a full cache");
  Atom copy = atoms_[id];
  AtomId fresh = create_atom(p, std::move(copy.payload), std::move(copy.provenance));
  op_log_.push_back(OpRecord{OpKind::Copy, p, {id}, fresh, io_count_});
  return fresh;
}

void MachineState::delete_atom(ProcId p, AtomId id) {
  check_proc(p);
  if (!remove_one(caches_[p], id))
    fail(ErrorCode::NotResident, "delete of atom " + std::to_string(id));
  drop_instance(id);
}

void MachineState::delete_atoms(ProcId p, std::span<const AtomId> ids) {
  check_proc(p);
  if (!remove_many(caches_[p], ids)) fail(ErrorCode::NotResident, "delete of absent atoms");
  for (AtomId id : ids) drop_instance(id);
}

AtomId MachineState::create_atom(ProcId p, Payload payload, std::vector<AtomId> provenance) {
  check_proc(p);
  if (caches_[p].size() >= config_.M) fail(ErrorCode::CacheOverflow, "new atom in a full cache");
  AtomId id = atoms_.size();
  atoms_.push_back(Atom{id, std::move(payload), std::move(provenance)});
  instances_.push_back(1);
  caches_[p].push_back(id);
  return id;
}

std::vector<BlockIndex> MachineState::acquire_blocks(std::size_t count) {
  std::vector<BlockIndex> out;
  out.reserve(count);
  while (out.size() < count && !free_blocks_.empty()) {
    out.push_back(free_blocks_.back());
    free_blocks_.pop_back();
  }
  while (out.size() < count) {
    out.push_back(blocks_.size());
    blocks_.emplace_back();
  }
  return out;
}

void MachineState::release_blocks(std::span<const BlockIndex> blocks) {
  for (auto it = blocks.rbegin(); it != blocks.rend(); ++it) free_blocks_.push_back(*it);
}

BlockPermutation MachineState::snapshot_block_permutation() const {
  BlockPermutation out;
  for (BlockIndex b = 0; b < blocks_.size(); ++b)
    out[b] = std::set<AtomId>(blocks_[b].begin(), blocks_[b].end());
  return out;
}

BlockPermutation MachineState::snapshot_block_permutation(std::span<const BlockIndex> blocks) const {
  BlockPermutation out;
  for (BlockIndex b : blocks) {
    auto content = block(b);
    out[b] = std::set<AtomId>(content.begin(), content.end());
  }
  return out;
}

std::string_view to_string(IoKind kind) {
  switch (kind) {
    case IoKind::Idle: return "idle";
    case IoKind::Read: return "read";
    case IoKind::Write: return "write";
  }
  return "?";
}

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::Combine: return "combine";
    case OpKind::Contract: return "contract";
    case OpKind::Fuse: return "fuse";
    case OpKind::Copy: return "copy";
  }
  return "?";
}

void write_trace(std::ostream& out, const IoTrace& trace) {
  for (std::size_t s = 0; s < trace.steps.size(); ++s) {
    const auto& entry = trace.steps[s];
    for (ProcId p = 0; p < entry.requests.size(); ++p) {
      const auto& r = entry.requests[p];
      if (r.kind == IoKind::Idle) continue;
      out << s << ',' << p << ',' << to_string(r.kind) << ',' << r.block << ',';
      const auto& ids = r.kind == IoKind::Read && !entry.read_contents.empty()
                            ? entry.read_contents[p]
                            : r.atoms;
      for (std::size_t i = 0; i < ids.size(); ++i) out << (i ? " " : "") << ids[i];
      out << '\n';
    }
  }
}

}  // namespace pem
