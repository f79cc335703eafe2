#include "pem/program.hpp"

#include <memory>
#include <queue>
#include <string>

namespace pem {

std::size_t run_lockstep(MachineState& state, std::vector<ProcProgram>& programs) {
  const std::size_t procs = state.config().P;
  if (programs.size() > procs) throw Error(ErrorCode::ConfigError, "more programs than processors");
  std::vector<bool> done(programs.size(), false);
  std::size_t steps = 0;
  ParallelStep step = ParallelStep::all_idle(procs);
  for (;;) {
    for (auto& r : step.requests) {
      r.kind = IoKind::Idle;
      r.atoms.clear();
    }
    bool active = false;
    bool reads = false;
    bool writes = false;
    for (ProcId p = 0; p < programs.size(); ++p) {
      if (done[p]) continue;
      auto req = programs[p](state, p);
      if (!req) {
        done[p] = true;
        continue;
      }
      active = true;
      reads |= req->kind == IoKind::Read;
      writes |= req->kind == IoKind::Write;
      step.requests[p] = std::move(*req);
    }
    if (!active) return steps;
    if (state.options().normalized && reads && writes) {
      ParallelStep read_part = ParallelStep::all_idle(procs);
      for (ProcId p = 0; p < procs; ++p)
        if (step.requests[p].kind == IoKind::Read) std::swap(read_part.requests[p], step.requests[p]);
      state.execute_step(read_part);
      ++steps;
    }
    state.execute_step(step);
    ++steps;
  }
}

Layout initial_layout(const MachineState& state) {
  const auto& c = state.config();
  Layout out;
  for (BlockIndex b = 0; b * c.B < c.N; ++b) out.blocks.push_back(b);
  return out;
}

std::vector<AtomId> layout_atoms(const MachineState& state, const Layout& layout) {
  std::vector<AtomId> out;
  for (BlockIndex b : layout.blocks) {
    auto content = state.block(b);
    out.insert(out.end(), content.begin(), content.end());
  }
  return out;
}

std::size_t layout_size(const MachineState& state, const Layout& layout) {
  std::size_t n = 0;
  for (BlockIndex b : layout.blocks) n += state.block(b).size();
  return n;
}

void release_layout(MachineState& state, const Layout& layout) {
  state.release_blocks(layout.blocks);
}

std::vector<std::size_t> even_split(std::size_t count, std::size_t procs) {
  std::vector<std::size_t> start(procs + 1);
  for (std::size_t i = 0; i <= procs; ++i) start[i] = i * count / procs;
  return start;
}

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

// Atom-indexed lookup tables reused across calls; only touched entries are
// reset afterwards, so a gather costs time in its own size only.
struct IndexScratch {
  std::vector<std::size_t> pos_of;
  std::vector<BlockIndex> src_of;

  void reserve(std::size_t atoms) {
    if (pos_of.size() < atoms) {
      pos_of.resize(atoms, kNone);
      src_of.resize(atoms, kNone);
    }
  }
};

IndexScratch& index_scratch() {
  thread_local IndexScratch scratch;
  return scratch;
}

struct GatherShared {
  std::vector<AtomId> flat;               // output atoms in output order
  std::vector<std::size_t> block_start;   // output block -> first flat position
  std::vector<BlockIndex> out_blocks;
  std::vector<std::size_t>* pos_of;       // atom id -> flat position
  std::vector<BlockIndex>* src_of;        // atom id -> input block
};

class GatherProc {
 public:
  GatherProc(std::shared_ptr<const GatherShared> shared, std::size_t first, std::size_t last)
      : sh_(std::move(shared)),
        cur_(first),
        end_(last),
        lo_(sh_->block_start[first]),
        have_(sh_->block_start[last] - lo_, 0),
        scan_(lo_) {}

  std::optional<IoRequest> operator()(MachineState& state, ProcId p) {
    if (pending_ > 0) absorb(state, p);
    if (cur_ == end_) return std::nullopt;

    const std::size_t block_end = sh_->block_start[cur_ + 1];
    while (scan_ < block_end && have_[scan_ - lo_]) ++scan_;
    if (scan_ == block_end) {
      std::vector<AtomId> atoms(sh_->flat.begin() + sh_->block_start[cur_],
                                sh_->flat.begin() + block_end);
      for (std::size_t pos = sh_->block_start[cur_]; pos < block_end; ++pos) have_[pos - lo_] = 0;
      BlockIndex target = sh_->out_blocks[cur_];
      ++cur_;
      scan_ = block_end;
      return IoRequest::write(target, std::move(atoms));
    }

    AtomId missing = sh_->flat[scan_];
    BlockIndex src = (*sh_->src_of)[missing];
    if (src == kNone) throw Error(ErrorCode::NotResident, "atom " + std::to_string(missing) +
                                                              " is not in the input layout");
    const std::size_t incoming = state.block(src).size();
    const std::size_t cap = state.config().M;
    evict_.clear();
    std::size_t held = state.cache(p).size();
    while (held + incoming > cap) {
      while (!far_.empty() && !have_[far_.top() - lo_]) far_.pop();
      if (far_.empty() || far_.top() < block_end)
        throw Error(ErrorCode::CacheOverflow, "gather cannot make room for a read");
      std::size_t pos = far_.top();
      far_.pop();
      have_[pos - lo_] = 0;
      evict_.push_back(sh_->flat[pos]);
      --held;
    }
    if (!evict_.empty()) state.delete_atoms(p, evict_);
    pending_ = incoming;
    return IoRequest::read(src);
  }

 private:
  void absorb(MachineState& state, ProcId p) {
    auto cache = state.cache(p);
    drop_.clear();
    const std::size_t from = sh_->block_start[cur_];
    const std::size_t to = lo_ + have_.size();
    for (std::size_t i = cache.size() - pending_; i < cache.size(); ++i) {
      AtomId id = cache[i];
      std::size_t pos = id < sh_->pos_of->size() ? (*sh_->pos_of)[id] : kNone;
      if (pos != kNone && pos >= from && pos < to && !have_[pos - lo_]) {
        have_[pos - lo_] = 1;
        far_.push(pos);
      } else {
        drop_.push_back(id);
      }
    }
    pending_ = 0;
    if (!drop_.empty()) state.delete_atoms(p, drop_);
  }

  std::shared_ptr<const GatherShared> sh_;
  std::size_t cur_;
  std::size_t end_;
  std::size_t lo_;
  std::vector<char> have_;
  std::size_t scan_;
  std::size_t pending_ = 0;
  std::priority_queue<std::size_t> far_;
  std::vector<AtomId> evict_;
  std::vector<AtomId> drop_;
};

}  // namespace

Layout gather(MachineState& state, const Layout& input,
              const std::vector<std::vector<AtomId>>& outputs,
              std::vector<std::size_t> proc_start) {
  const std::size_t procs = state.config().P;
  if (proc_start.empty()) proc_start = even_split(outputs.size(), procs);
  if (proc_start.size() != procs + 1 || proc_start.front() != 0 ||
      proc_start.back() != outputs.size())
    throw Error(ErrorCode::ConfigError, "processor ranges do not cover the output");

  IndexScratch& scratch = index_scratch();
  scratch.reserve(state.atom_count());
  auto sh = std::make_shared<GatherShared>();
  sh->pos_of = &scratch.pos_of;
  sh->src_of = &scratch.src_of;
  auto& pos_of = scratch.pos_of;
  auto& src_of = scratch.src_of;
  auto reset = [&] {
    for (AtomId id : sh->flat) pos_of[id] = kNone;
    for (BlockIndex b : input.blocks)
      for (AtomId id : state.block(b))
        if (id < src_of.size()) src_of[id] = kNone;
  };
  sh->block_start.push_back(0);
  for (const auto& out : outputs) {
    if (out.size() > state.config().B) {
      reset();
      throw Error(ErrorCode::BlockOverflow, "output block larger than B");
    }
    for (AtomId id : out) {
      if (id >= state.atom_count() || pos_of[id] != kNone) {
        reset();
        throw Error(ErrorCode::ConfigError, "atom " + std::to_string(id) + " listed twice");
      }
      pos_of[id] = sh->flat.size();
      sh->flat.push_back(id);
    }
    sh->block_start.push_back(sh->flat.size());
  }
  for (BlockIndex b : input.blocks)
    for (AtomId id : state.block(b))
      if (src_of[id] == kNone) src_of[id] = b;
  sh->out_blocks = state.acquire_blocks(outputs.size());

  std::vector<ProcProgram> programs;
  for (ProcId p = 0; p < procs; ++p) {
    if (proc_start[p] == proc_start[p + 1]) {
      programs.emplace_back([](MachineState&, ProcId) { return std::optional<IoRequest>{}; });
      continue;
    }
    programs.emplace_back(GatherProc(sh, proc_start[p], proc_start[p + 1]));
  }
  try {
    run_lockstep(state, programs);
  } catch (...) {
    reset();
    throw;
  }
  // Input blocks were only read, so their contents still name every source.
  reset();
  return Layout{sh->out_blocks};
}

}  // namespace pem
