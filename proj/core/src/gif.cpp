#include "pem/gif.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <string>

#include "pem/sorting.hpp"

namespace pem {

namespace {

const IntervalPayload* interval_of(const MachineState& state, AtomId id) {
  return std::get_if<IntervalPayload>(&state.atom(id).payload);
}

}  // namespace

GifInstance generate_gif_instance(unsigned exponent, std::uint64_t seed) {
  if (exponent == 0 || exponent % 2 != 0 || exponent > 40)
    throw Error(ErrorCode::ConfigError, "exponent must be even and positive");
  const std::size_t n = std::size_t{1} << exponent;
  const std::size_t m = std::size_t{1} << (exponent / 2);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 1);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  return make_gif_instance(std::move(perm), MachineConfig{m, m, m / 2, n});
}

GifInstance make_gif_instance(std::vector<std::size_t> perm, MachineConfig config) {
  const std::size_t n = perm.size();
  if (n < 2 || !std::has_single_bit(n))
    throw Error(ErrorCode::ConfigError, "instance size must be a power of two");
  std::vector<bool> seen(n + 1, false);
  for (std::size_t k : perm) {
    if (k < 1 || k > n || seen[k]) throw Error(ErrorCode::NotAPermutation, "bad interval order");
    seen[k] = true;
  }
  config.N = n;
  config.validate();
  return GifInstance{n, std::move(perm), config};
}

std::size_t boundary_level(std::size_t p) { return static_cast<std::size_t>(std::countr_zero(p)) + 2; }

GifGame::GifGame(const GifInstance& instance, MachineOptions options)
    : instance_(instance),
      revealed_(instance.n + 1, false),
      solved_(instance.n + 1, false),
      node_solved_(instance.n + 1, false) {
  std::vector<Payload> payloads;
  payloads.reserve(instance.n);
  for (std::size_t k : instance.perm)
    payloads.emplace_back(IntervalPayload{static_cast<std::int64_t>(k) - 1, static_cast<std::int64_t>(k)});
  machine_ = std::make_unique<MachineState>(instance.config, payloads, options);
  reveal_boundaries();
}

bool GifGame::has_solved_child(std::size_t p) const {
  const std::size_t level = boundary_level(p);
  if (level == 2) return true;  // both children are leaves
  const std::size_t h = std::size_t{1} << (level - 3);
  return node_solved_[p - h] || node_solved_[p + h];
}

void GifGame::reveal_for(std::int64_t lo, std::int64_t hi) {
  const auto n = static_cast<std::int64_t>(instance_.n);
  if (lo <= 0 && hi >= n) {
    finished_ = true;
    return;
  }
  const bool has_a = lo > 0;
  const bool has_b = hi < n;
  if ((has_a && revealed_[lo]) || (has_b && revealed_[hi])) return;
  std::size_t p;
  if (has_a && has_b) {
    p = boundary_level(lo) <= boundary_level(hi) ? lo : hi;
  } else {
    p = has_a ? lo : hi;
  }
  if (!has_solved_child(p)) ++illegal_reveals_;
  revealed_[p] = true;
  ++revealed_count_;
}

void GifGame::reveal_boundaries() {
  std::vector<std::pair<std::int64_t, std::int64_t>> live;
  for (AtomId id = 0; id < machine_->atom_count(); ++id) {
    if (machine_->instances(id) == 0) continue;
    if (const auto* iv = interval_of(*machine_, id)) live.emplace_back(iv->lo, iv->hi);
  }
  std::sort(live.begin(), live.end());
  for (auto [lo, hi] : live) reveal_for(lo, hi);
}

void GifGame::mark_nodes(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
  if (c < a) {
    std::swap(a, c);
    std::swap(b, d);
  }
  if (d <= b || c < 1) return;
  // A subtree newly covered by [a, d] must stick out of both operands; on
  // each level at most one aligned subtree does.
  const auto n = static_cast<std::int64_t>(instance_.n);
  for (std::int64_t w = 2; w <= n; w *= 2) {
    std::int64_t s = (c - 1) / w * w;
    if (s > b - w && s >= a && s + w <= d) node_solved_[s + w / 2] = true;
  }
}

FuseOutcome GifGame::attempt_fuse(ProcId p, AtomId x, AtomId y) {
  const IntervalPayload* ix = interval_of(*machine_, x);
  const IntervalPayload* iy = interval_of(*machine_, y);
  if (!ix || !iy) throw Error(ErrorCode::KindError, "fusing non-interval atoms");
  const IntervalPayload a = *ix;
  const IntervalPayload b = *iy;
  FuseResult r = interval_fuse(*machine_, p, x, y);
  FuseOutcome out;
  if (!r.fused) return out;
  out.fused = true;
  out.atom = r.atom;
  const auto n = static_cast<std::int64_t>(instance_.n);
  const std::int64_t lo = std::min(a.lo, b.lo);
  const std::int64_t hi = std::max(a.hi, b.hi);
  out.was_chance = true;
  for (std::int64_t q = std::max<std::int64_t>(1, r.meet_lo); q <= std::min(n - 1, r.meet_hi); ++q) {
    if (revealed_[q]) out.was_chance = false;
    if (q > lo && q < hi && !solved_[q]) {
      solved_[q] = true;
      ++solved_count_;
    }
  }
  if (out.was_chance) ++chance_;
  mark_nodes(a.lo, a.hi, b.lo, b.hi);
  reveal_for(lo, hi);
  return out;
}

GuideAudit GifGame::audit() const {
  GuideAudit out;
  out.illegal_reveals = illegal_reveals_;
  const auto n = static_cast<std::int64_t>(instance_.n);
  std::vector<std::pair<std::int64_t, std::int64_t>> live;
  for (AtomId id = 0; id < machine_->atom_count(); ++id) {
    if (machine_->instances(id) == 0) continue;
    const auto* iv = interval_of(*machine_, id);
    if (!iv) continue;
    live.emplace_back(iv->lo, iv->hi);
    const bool terminal = iv->lo <= 0 && iv->hi >= n;
    const bool known = (iv->lo > 0 && revealed_[iv->lo]) || (iv->hi < n && revealed_[iv->hi]);
    if (!terminal && !known) ++out.uncovered_atoms;
  }
  std::sort(live.begin(), live.end());
  std::int64_t reach = 0;
  for (auto [lo, hi] : live) {
    if (lo > reach) out.tiling_gaps += static_cast<std::size_t>(lo - reach);
    reach = std::max(reach, hi);
  }
  if (reach < n) out.tiling_gaps += static_cast<std::size_t>(n - reach);
  return out;
}

MultiplicityMonitor::MultiplicityMonitor(std::size_t n, std::size_t level) {
  const std::size_t top = static_cast<std::size_t>(std::countr_zero(n)) + 1;
  if (level < 2 || level > top) throw Error(ErrorCode::ConfigError, "no boundaries on that level");
  stride_ = std::size_t{1} << (level - 1);
  first_ = std::size_t{1} << (level - 2);
  for (std::size_t p = first_; p < n; p += stride_) boundaries_.push_back(p);
  where_a_.resize(boundaries_.size());
  where_b_.resize(boundaries_.size());
}

void MultiplicityMonitor::refresh(const MachineState& state, std::size_t location,
                                  std::span<const AtomId> atoms) {
  std::vector<std::uint32_t> a_side;
  std::vector<std::uint32_t> b_side;
  const auto first = static_cast<std::int64_t>(first_);
  const auto stride = static_cast<std::int64_t>(stride_);
  const auto count = static_cast<std::int64_t>(boundaries_.size());
  for (AtomId id : atoms) {
    const auto* iv = interval_of(state, id);
    if (!iv) continue;
    // Traced boundaries p with lo <= p <= hi.
    std::int64_t k0 = iv->lo <= first ? 0 : (iv->lo - first + stride - 1) / stride;
    std::int64_t k1 = std::min(count - 1, iv->hi < first ? -1 : (iv->hi - first) / stride);
    for (std::int64_t k = k0; k <= k1; ++k) {
      std::int64_t p = first + k * stride;
      if (p - 1 >= iv->lo && p <= iv->hi) a_side.push_back(static_cast<std::uint32_t>(k));
      if (p >= iv->lo && p + 1 <= iv->hi) b_side.push_back(static_cast<std::uint32_t>(k));
    }
  }
  auto tidy = [](std::vector<std::uint32_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  tidy(a_side);
  tidy(b_side);
  const auto loc = static_cast<std::uint32_t>(location);
  auto update = [loc](std::vector<std::uint32_t>& old, std::vector<std::uint32_t>& now,
                      std::vector<std::vector<std::uint32_t>>& where) {
    if (old == now) return;
    for (std::uint32_t e : old) std::erase(where[e], loc);
    for (std::uint32_t e : now) where[e].push_back(loc);
    old = std::move(now);
  };
  update(loc_a_[location], a_side, where_a_);
  update(loc_b_[location], b_side, where_b_);
}

std::size_t MultiplicityMonitor::observe(const MachineState& state) {
  const std::size_t procs = state.config().P;
  const std::size_t locations = procs + state.block_count();
  if (loc_a_.size() < locations) {
    loc_a_.resize(locations);
    loc_b_.resize(locations);
  }
  if (!primed_) {
    procs_ = procs;
    for (BlockIndex b = 0; b < state.block_count(); ++b) refresh(state, procs + b, state.block(b));
    primed_ = true;
  } else {
    for (BlockIndex b : state.last_written()) refresh(state, procs + b, state.block(b));
  }
  for (ProcId p = 0; p < procs; ++p) refresh(state, p, state.cache(p));

  MultiplicityGraph graph;
  std::vector<std::uint64_t> keys;
  std::size_t best = 0;
  for (std::size_t e = 0; e < boundaries_.size(); ++e) {
    keys.clear();
    for (std::uint32_t u : where_a_[e])
      for (std::uint32_t v : where_b_[e]) keys.push_back(edge_key(u, v));
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    for (std::uint64_t k : keys) best = std::max(best, ++graph[k]);
  }
  if (!history_.empty() && best > 4 * history_.back()) ++violations_;
  history_.push_back(best);
  return best;
}

std::uint64_t edge_key(std::size_t u, std::size_t v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | static_cast<std::uint64_t>(v);
}

MultiplicityGraph multiplicity_graph(const MachineState& state,
                                     const std::vector<std::pair<AtomId, AtomId>>& traced) {
  std::unordered_map<AtomId, std::vector<std::pair<std::size_t, int>>> roles;
  for (std::size_t e = 0; e < traced.size(); ++e) {
    roles[traced[e].first].emplace_back(e, 0);
    roles[traced[e].second].emplace_back(e, 1);
  }
  std::vector<std::vector<std::size_t>> where[2];
  where[0].resize(traced.size());
  where[1].resize(traced.size());
  auto scan = [&](std::size_t location, std::span<const AtomId> atoms) {
    for (AtomId id : atoms)
      for (AtomId origin : state.atom(id).provenance)
        if (auto it = roles.find(origin); it != roles.end())
          for (auto [e, side] : it->second) where[side][e].push_back(location);
  };
  const std::size_t procs = state.config().P;
  for (ProcId p = 0; p < procs; ++p) scan(p, state.cache(p));
  for (BlockIndex b = 0; b < state.block_count(); ++b) scan(procs + b, state.block(b));

  MultiplicityGraph graph;
  std::vector<std::uint64_t> keys;
  for (std::size_t e = 0; e < traced.size(); ++e) {
    keys.clear();
    for (std::size_t u : where[0][e])
      for (std::size_t v : where[1][e]) keys.push_back(edge_key(u, v));
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    for (std::uint64_t k : keys) ++graph[k];
  }
  return graph;
}

std::size_t multiplicity(const MultiplicityGraph& graph) {
  std::size_t best = 0;
  for (const auto& [edge, count] : graph) best = std::max(best, count);
  return best;
}

AuditReport audit_quadrupling(const std::vector<std::size_t>& multiplicities) {
  AuditReport report;
  for (std::size_t t = 1; t < multiplicities.size(); ++t) {
    if (multiplicities[t] > 4 * multiplicities[t - 1]) {
      report.pass = false;
      report.violations.push_back("step " + std::to_string(t) + ": " +
                                  std::to_string(multiplicities[t - 1]) + " -> " +
                                  std::to_string(multiplicities[t]));
    }
  }
  return report;
}

namespace {

struct Tile {
  std::int64_t lo;
  std::int64_t hi;
  AtomId id;
};

}  // namespace

GifRun omniscient_reference_solver(GifGame& game, SolverOptions options) {
  MachineState& state = game.machine();
  const auto& cfg = state.config();
  const std::size_t n = game.instance().n;
  const std::size_t lg = static_cast<std::size_t>(std::countr_zero(n));

  std::unique_ptr<MultiplicityMonitor> monitor;
  if (options.monitor) {
    std::size_t level = options.traced_level ? options.traced_level : lg / 2 + 1;
    monitor = std::make_unique<MultiplicityMonitor>(n, std::max<std::size_t>(2, level));
    state.set_step_observer([m = monitor.get()](const MachineState& s) { m->observe(s); });
  }

  // Pairs sit at positions (2t, 2t+1); groups of whole blocks must hold an
  // even number of positions so that no pair is split between processors.
  std::size_t group_blocks = cfg.M / cfg.B;
  std::size_t fill = cfg.B;
  if ((group_blocks * fill) % 2 != 0) {
    if (fill > 1) {
      --fill;
    } else {
      --group_blocks;
    }
  }
  const std::size_t group_size = group_blocks * fill;

  GifRun run;
  Layout layout = initial_layout(state);
  const std::size_t guard = 8 * std::max<std::size_t>(1, lg);
  while (!game.finished()) {
    if (run.rounds >= guard) throw Error(ErrorCode::GuardTripped, "fusion rounds exceeded");
    std::vector<AtomId> atoms = layout_atoms(state, layout);
    std::vector<Tile> tiles;
    std::vector<std::size_t> pos_of(state.atom_count());
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const auto& iv = std::get<IntervalPayload>(state.atom(atoms[i]).payload);
      tiles.push_back({iv.lo, iv.hi, atoms[i]});
      pos_of[atoms[i]] = i;
    }
    std::sort(tiles.begin(), tiles.end(), [](const Tile& x, const Tile& y) { return x.lo < y.lo; });

    // Greedy matching along revealed boundaries is maximum on a path.
    std::vector<std::size_t> target(atoms.size());
    std::vector<std::pair<AtomId, AtomId>> pairs;
    std::vector<AtomId> singles;
    for (std::size_t i = 0; i < tiles.size(); ++i) {
      if (i + 1 < tiles.size() && tiles[i].hi == tiles[i + 1].lo &&
          game.revealed(static_cast<std::size_t>(tiles[i].hi))) {
        pairs.emplace_back(tiles[i].id, tiles[i + 1].id);
        ++i;
      } else {
        singles.push_back(tiles[i].id);
      }
    }
    std::size_t next = 0;
    for (auto [l, r] : pairs) {
      target[pos_of[l]] = next++;
      target[pos_of[r]] = next++;
    }
    for (AtomId s : singles) target[pos_of[s]] = next++;
    layout = pem_permute(state, layout, target, PermuteOptions{PermuteStrategy::Auto, fill});

    // Fuse phase: one group of blocks per processor and turn.
    const std::size_t busy_groups = (2 * pairs.size() + group_size - 1) / group_size;
    std::vector<std::vector<BlockIndex>> fresh(busy_groups);
    std::vector<ProcProgram> programs;
    for (ProcId p = 0; p < cfg.P && p < busy_groups; ++p) {
      struct Job {
        std::size_t group;
        std::size_t step = 0;
        std::vector<AtomId> results;
        std::size_t written = 0;
      };
      auto jobs = std::make_shared<std::vector<Job>>();
      for (std::size_t g = p; g < busy_groups; g += cfg.P) jobs->push_back(Job{g, 0, {}, 0});
      programs.emplace_back([&, jobs, cur = std::size_t{0}](MachineState& s,
                                                          ProcId proc) mutable -> std::optional<IoRequest> {
        while (cur < jobs->size()) {
          Job& job = (*jobs)[cur];
          const std::size_t b0 = job.group * group_blocks;
          const std::size_t b1 = std::min(layout.blocks.size(), b0 + group_blocks);
          if (b0 + job.step < b1) return IoRequest::read(layout.blocks[b0 + job.step++]);
          if (job.step == b1 - b0) {
            ++job.step;
            const std::size_t first = job.group * group_size;
            const std::size_t last = std::min(atoms.size(), first + group_size);
            for (std::size_t t = first / 2; t < std::min(pairs.size(), last / 2); ++t) {
              FuseOutcome f = game.attempt_fuse(proc, pairs[t].first, pairs[t].second);
              if (!f.fused) throw Error(ErrorCode::KindError, "matched atoms did not fuse");
            }
            // Fused atoms and untouched singles, in cache order.
            auto c = s.cache(proc);
            job.results.assign(c.begin(), c.end());
          }
          if (job.written < job.results.size()) {
            const std::size_t from = job.written;
            const std::size_t to = std::min(job.results.size(), from + cfg.B);
            job.written = to;
            BlockIndex dst = s.acquire_blocks(1).front();
            fresh[job.group].push_back(dst);
            return IoRequest::write(dst, {job.results.begin() + from, job.results.begin() + to});
          }
          ++cur;
        }
        return std::nullopt;
      });
    }
    run_lockstep(state, programs);

    Layout merged;
    std::vector<BlockIndex> retired;
    for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
      const std::size_t g = b / group_blocks;
      if (g < busy_groups) {
        retired.push_back(layout.blocks[b]);
        if (b % group_blocks == 0)
          merged.blocks.insert(merged.blocks.end(), fresh[g].begin(), fresh[g].end());
      } else {
        merged.blocks.push_back(layout.blocks[b]);
      }
    }
    state.release_blocks(retired);
    layout = std::move(merged);
    atoms = layout_atoms(state, layout);

    ++run.rounds;
    GuideAudit check = game.audit();
    run.guide.uncovered_atoms += check.uncovered_atoms;
    run.guide.tiling_gaps += check.tiling_gaps;
    run.log.push_back(GifRoundLog{run.rounds, atoms.size(), game.revealed_count(),
                                  game.solved_count(), game.chance_encounters(), state.io_count()});
  }
  if (monitor) {
    monitor->observe(state);
    state.set_step_observer(nullptr);
    run.quadrupling_violations = monitor->violations();
    for (std::size_t m : monitor->history()) run.max_multiplicity = std::max(run.max_multiplicity, m);
  }
  run.guide.illegal_reveals = game.illegal_reveals();
  run.io_count = state.io_count();
  run.solved = game.finished();
  return run;
}

void write_gif_log(std::ostream& out, const std::vector<GifRoundLog>& log) {
  out << "round,live_atoms,revealed,solved,chance_encounters,io_count\n";
  for (const auto& r : log)
    out << r.round << ',' << r.live_atoms << ',' << r.revealed << ',' << r.solved << ','
        << r.chance_encounters << ',' << r.io_count << '\n';
}

}  // namespace pem
