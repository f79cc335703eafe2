#include "pem/list_ranking.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <string>

#include "pem/cost_model.hpp"
#include "pem/sorting.hpp"
#include "pem/variants.hpp"

namespace pem {

namespace {

const EdgePayload& edge_of(const MachineState& state, AtomId id) {
  return std::get<EdgePayload>(state.atom(id).payload);
}

std::uint64_t src_key(const Atom& a) { return std::get<EdgePayload>(a.payload).src; }

}  // namespace

LinkedListInstance LinkedListInstance::from_successors(std::vector<std::uint64_t> succ) {
  LinkedListInstance list;
  list.weight.resize(succ.size());
  for (std::size_t x = 0; x < succ.size(); ++x) list.weight[x] = succ[x] == kTail ? 0 : 1;
  list.succ = std::move(succ);
  return list;
}

void check_path(std::span<const std::uint64_t> succ) {
  const std::size_t n = succ.size();
  if (n == 0) throw Error(ErrorCode::NotAPath, "empty list");
  std::vector<std::uint8_t> indeg(n, 0);
  std::size_t tails = 0;
  for (std::size_t x = 0; x < n; ++x) {
    if (succ[x] == kTail) {
      ++tails;
      continue;
    }
    if (succ[x] >= n) throw Error(ErrorCode::NotAPath, "successor out of range");
    if (succ[x] == x) throw Error(ErrorCode::NotAPath, "self loop at " + std::to_string(x));
    if (++indeg[succ[x]] > 1)
      throw Error(ErrorCode::NotAPath, "two elements point to " + std::to_string(succ[x]));
  }
  if (tails != 1) throw Error(ErrorCode::NotAPath, "expected exactly one tail");
  auto head = std::find(indeg.begin(), indeg.end(), 0);
  if (head == indeg.end()) throw Error(ErrorCode::NotAPath, "no head");
  std::size_t seen = 1;
  for (std::uint64_t x = head - indeg.begin(); succ[x] != kTail; x = succ[x]) ++seen;
  if (seen != n) throw Error(ErrorCode::NotAPath, "list contains a cycle");
}

std::vector<Payload> list_payloads(const LinkedListInstance& list) {
  std::vector<Payload> out;
  out.reserve(list.size());
  for (std::size_t x = 0; x < list.size(); ++x)
    out.emplace_back(EdgePayload{x, list.succ[x], list.weight[x]});
  return out;
}

ListRankingState start_ranking(const MachineState& state, const LinkedListInstance& list) {
  check_path(list.succ);
  ListRankingState run;
  run.list = list;
  run.live.resize(list.size());
  std::iota(run.live.begin(), run.live.end(), 0);
  std::vector<bool> has_pred(list.size(), false);
  for (std::size_t x = 0; x < list.size(); ++x) {
    if (list.succ[x] == kTail) {
      run.tail = x;
    } else {
      has_pred[list.succ[x]] = true;
    }
  }
  run.head = std::find(has_pred.begin(), has_pred.end(), false) - has_pred.begin();
  run.layout = initial_layout(state);
  return run;
}

void make_doubly_linked(MachineState& state, ListRankingState& run) {
  const std::size_t n = run.live.size();
  std::vector<std::size_t> pos(run.list.size());
  for (std::size_t i = 0; i < n; ++i) pos[run.live[i]] = i;
  std::vector<AtomId> atoms = layout_atoms(state, run.layout);
  std::vector<std::size_t> target(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& e = edge_of(state, atoms[i]);
    target[i] = e.dst == kTail ? pos[run.head] : pos[e.dst];
  }
  Layout there = pem_permute(state, run.layout, target);

  auto& pred = run.list.pred;
  pred.assign(run.list.size(), kHead);
  atoms = layout_atoms(state, there);
  for (std::size_t c = 0; c < n; ++c) {
    const auto& e = edge_of(state, atoms[c]);
    pred[run.live[c]] = e.dst == kTail ? kHead : e.src;
    target[c] = pos[e.src];
  }
  run.layout = pem_permute(state, there, target);
}

CoinVector draw_coins(std::size_t n, std::uint64_t seed, std::uint64_t round) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(round), static_cast<std::uint32_t>(round >> 32)};
  std::mt19937_64 rng(seq);
  CoinVector coins(n);
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 64 == 0) bits = rng();
    coins[i] = static_cast<std::uint8_t>(bits & 1);
    bits >>= 1;
  }
  return coins;
}

std::vector<std::uint64_t> sample_independent_set(const ListRankingState& run,
                                                  const CoinVector& coins) {
  std::vector<std::uint64_t> s;
  for (std::uint64_t x : run.live) {
    std::uint64_t next = run.list.succ[x];
    if (coins[x] == 1 && next != kTail && coins[next] == 0) s.push_back(x);
  }
  return s;
}

namespace {

struct ScanShared {
  std::vector<AtomId> flat;
  std::vector<std::size_t> start;  // per input block
  std::vector<bool> removed;       // per flat position: link of an element of S
  std::vector<BlockIndex> in_blocks;
  std::vector<BlockIndex> out_blocks;
  std::vector<bool> written;
  std::vector<std::vector<BridgeEntry>> entries;  // per processor
};

// Walks a contiguous range of blocks, contracting each predecessor link with
// the removed element's link that follows it. A pair split across a block
// boundary belongs to the block holding the predecessor link.
class ScanProc {
 public:
  ScanProc(std::shared_ptr<ScanShared> sh, std::size_t first, std::size_t last)
      : sh_(std::move(sh)), b_(first), hi_(last) {}

  std::optional<IoRequest> operator()(MachineState& state, ProcId p) {
    auto& sh = *sh_;
    while (b_ < hi_) {
      if (!cur_loaded_) {
        cur_loaded_ = true;
        first_consumed_ = false;
        return IoRequest::read(sh.in_blocks[b_]);
      }
      const std::size_t s = sh.start[b_];
      const std::size_t e = sh.start[b_ + 1];
      const bool need_next = e > s && e < sh.flat.size() && sh.removed[e];
      if (need_next && !next_loaded_) {
        next_loaded_ = true;
        return IoRequest::read(sh.in_blocks[b_ + 1]);
      }
      std::vector<AtomId> out;
      bool next_first_consumed = false;
      for (std::size_t j = s; j < e; ++j) {
        if (sh.removed[j]) {
          if (j == s && !first_consumed_) state.delete_atom(p, sh.flat[j]);
          continue;
        }
        if (j + 1 < sh.flat.size() && sh.removed[j + 1]) {
          const EdgePayload gone = edge_of(state, sh.flat[j + 1]);
          const std::uint64_t keeper = edge_of(state, sh.flat[j]).src;
          out.push_back(edge_contract(state, p, sh.flat[j], sh.flat[j + 1]));
          sh.entries[p].push_back(BridgeEntry{gone.src, keeper, gone.dst, gone.weight});
          if (j + 1 == e) next_first_consumed = true;
          ++j;
          continue;
        }
        out.push_back(sh.flat[j]);
      }
      const std::size_t done = b_++;
      cur_loaded_ = next_loaded_;
      next_loaded_ = false;
      first_consumed_ = next_first_consumed;
      if (cur_loaded_ && b_ == hi_) {
        std::vector<AtomId> rest;
        for (std::size_t j = sh.start[b_] + (first_consumed_ ? 1 : 0); j < sh.start[b_ + 1]; ++j)
          rest.push_back(sh.flat[j]);
        state.delete_atoms(p, rest);
        cur_loaded_ = false;
      }
      if (!out.empty()) {
        sh.written[done] = true;
        return IoRequest::write(sh.out_blocks[done], std::move(out));
      }
    }
    return std::nullopt;
  }

 private:
  std::shared_ptr<ScanShared> sh_;
  std::size_t b_;
  std::size_t hi_;
  bool cur_loaded_ = false;
  bool next_loaded_ = false;
  bool first_consumed_ = false;
};

}  // namespace

std::vector<BridgeEntry> bridge_out(MachineState& state, ListRankingState& run,
                                    std::span<const std::uint64_t> S) {
  auto& list = run.list;
  const std::size_t total = list.size();
  std::vector<bool> in_s(total, false);
  std::vector<bool> alive(total, false);
  for (std::uint64_t x : run.live) alive[x] = true;
  for (std::uint64_t x : S) {
    if (x >= total || !alive[x] || in_s[x])
      throw Error(ErrorCode::DependentSet, "element " + std::to_string(x) + " cannot be removed");
    in_s[x] = true;
  }
  for (std::uint64_t x : S) {
    if (list.pred[x] == kHead || list.succ[x] == kTail)
      throw Error(ErrorCode::DependentSet, "list endpoint " + std::to_string(x) + " selected");
    if (in_s[list.succ[x]])
      throw Error(ErrorCode::DependentSet, "adjacent elements " + std::to_string(x) + " and " +
                                               std::to_string(list.succ[x]));
  }
  if (S.empty()) return {};

  const auto& pred = list.pred;
  Layout paired = pem_merge_sort(state, run.layout, [&](const Atom& a) {
    std::uint64_t y = src_key(a);
    return in_s[y] ? 2 * pred[y] + 1 : 2 * y;
  });

  auto sh = std::make_shared<ScanShared>();
  sh->in_blocks = paired.blocks;
  sh->start.push_back(0);
  for (BlockIndex b : paired.blocks) {
    for (AtomId id : state.block(b)) {
      sh->flat.push_back(id);
      sh->removed.push_back(in_s[edge_of(state, id).src]);
    }
    sh->start.push_back(sh->flat.size());
  }
  const std::size_t nb = paired.blocks.size();
  sh->out_blocks = state.acquire_blocks(nb);
  sh->written.assign(nb, false);
  sh->entries.resize(state.config().P);
  auto split = even_split(nb, state.config().P);
  std::vector<ProcProgram> programs;
  for (ProcId p = 0; p < state.config().P; ++p)
    programs.emplace_back(ScanProc(sh, split[p], split[p + 1]));
  run_lockstep(state, programs);
  release_layout(state, paired);

  Layout contracted;
  std::vector<BlockIndex> unused;
  for (std::size_t b = 0; b < nb; ++b)
    (sh->written[b] ? contracted.blocks : unused).push_back(sh->out_blocks[b]);
  state.release_blocks(unused);

  Layout by_dst = pem_merge_sort(state, contracted, [](const Atom& a) {
    return std::get<EdgePayload>(a.payload).dst;
  });
  run.layout = pem_merge_sort(state, by_dst, src_key);

  std::vector<BridgeEntry> entries;
  for (auto& part : sh->entries) entries.insert(entries.end(), part.begin(), part.end());
  run.live.clear();
  for (AtomId id : layout_atoms(state, run.layout)) {
    const auto& e = edge_of(state, id);
    run.live.push_back(e.src);
    list.succ[e.src] = e.dst;
    list.weight[e.src] = e.weight;
    if (e.dst != kTail) list.pred[e.dst] = e.src;
  }
  return entries;
}

std::size_t small_list_cutoff(const MachineConfig& config) {
  const double lg = bar_log(static_cast<double>(config.P));
  const std::size_t q = std::max<std::size_t>(
      1, std::min<std::size_t>(static_cast<std::size_t>(std::floor(lg)), config.B));
  return std::max<std::size_t>(2, config.P * q);
}

PhaseStats list_rank_alg1(MachineState& state, ListRankingState& run, std::uint64_t seed,
                          BridgeRecord& record) {
  PhaseStats stats;
  const std::size_t cutoff = small_list_cutoff(state.config());
  const double total = static_cast<double>(run.list.size());
  const auto guard = static_cast<std::size_t>(
      std::ceil(8.0 * std::max(1.0, std::log(total) / std::log(4.0 / 3.0))));
  while (run.live.size() > cutoff) {
    if (stats.rounds >= guard)
      throw Error(ErrorCode::GuardTripped, "contraction did not reach the cutoff");
    stats.sizes.push_back(run.live.size());
    CoinVector coins = draw_coins(run.list.size(), seed, stats.rounds);
    auto s = sample_independent_set(run, coins);
    std::erase_if(s, [&](std::uint64_t x) { return run.list.pred[x] == kHead; });
    record.rounds.push_back(bridge_out(state, run, s));
    ++stats.rounds;
  }
  return stats;
}

PhaseStats list_rank_alg2(MachineState& state, ListRankingState& run, std::uint64_t seed,
                          BridgeRecord& record) {
  PhaseStats stats;
  const auto& cfg = state.config();
  const std::size_t cutoff = small_list_cutoff(cfg);
  const std::size_t n = run.live.size();
  if (n > cutoff) throw Error(ErrorCode::ConfigError, "list too long for the queue phase");
  if (n <= 1) return stats;
  auto& list = run.list;
  const std::size_t q = (cutoff + cfg.P - 1) / cfg.P;

  // Load: every processor reads the at most two blocks holding its queue.
  std::vector<std::size_t> block_of(n);
  {
    std::size_t pos = 0;
    for (std::size_t b = 0; b < run.layout.blocks.size(); ++b)
      for (std::size_t k = 0; k < state.block(run.layout.blocks[b]).size(); ++k) block_of[pos++] = b;
  }
  std::vector<AtomId> atoms = layout_atoms(state, run.layout);
  std::vector<std::vector<std::uint64_t>> queue(cfg.P);
  std::vector<std::size_t> front(cfg.P, 0);
  std::vector<ProcId> owner(list.size(), 0);
  std::vector<AtomId> held(list.size(), 0);
  std::vector<std::size_t> pos_of(list.size(), 0);
  for (ProcId p = 0; p < cfg.P; ++p) {
    for (std::size_t i = p * q; i < std::min(n, (p + 1) * q); ++i) {
      queue[p].push_back(run.live[i]);
      owner[run.live[i]] = p;
      held[run.live[i]] = atoms[i];
      pos_of[run.live[i]] = i;
    }
  }
  for (int pass = 0; pass < 2; ++pass) {
    ParallelStep step = ParallelStep::all_idle(cfg.P);
    bool any = false;
    for (ProcId p = 0; p < cfg.P; ++p) {
      if (queue[p].empty()) continue;
      std::size_t first = block_of[pos_of[queue[p].front()]];
      std::size_t last = block_of[pos_of[queue[p].back()]];
      if (pass == 1 && first == last) continue;
      step.requests[p] = IoRequest::read(run.layout.blocks[pass == 0 ? first : last]);
      any = true;
    }
    if (!any) break;
    state.execute_step(step);
    for (ProcId p = 0; p < cfg.P; ++p) {
      if (step.requests[p].kind != IoKind::Read) continue;
      std::vector<AtomId> drop;
      for (AtomId id : state.block(step.requests[p].block)) {
        std::uint64_t x = edge_of(state, id).src;
        if (owner[x] != p || held[x] != id) drop.push_back(id);
      }
      state.delete_atoms(p, drop);
    }
  }
  release_layout(state, run.layout);
  std::vector<BlockIndex> scratch = state.acquire_blocks(n);

  const auto guard = static_cast<std::size_t>(std::ceil(64.0 * bar_log(static_cast<double>(cfg.P))));
  std::vector<bool> nominee(list.size(), false);
  std::vector<bool> removed(list.size(), false);
  auto pending = [&] {
    for (ProcId p = 0; p < cfg.P; ++p)
      if (front[p] < queue[p].size()) return true;
    return false;
  };
  while (pending()) {
    if (stats.rounds >= guard) throw Error(ErrorCode::GuardTripped, "queues did not drain");
    stats.sizes.push_back(n - std::count(removed.begin(), removed.end(), true));
    CoinVector coins = draw_coins(list.size(), seed, (std::uint64_t{1} << 32) + stats.rounds);
    std::vector<std::uint64_t> noms;
    for (ProcId p = 0; p < cfg.P; ++p)
      if (front[p] < queue[p].size()) noms.push_back(queue[p][front[p]]);
    for (std::uint64_t x : noms) nominee[x] = true;
    std::vector<std::uint64_t> winners;
    for (std::uint64_t x : noms) {
      if (list.pred[x] == kHead || list.succ[x] == kTail) {
        ++front[owner[x]];
        continue;
      }
      std::uint64_t next = list.succ[x];
      if (coins[x] == 1 && (!nominee[next] || coins[next] == 0)) winners.push_back(x);
    }
    for (std::uint64_t x : noms) nominee[x] = false;

    std::vector<BridgeEntry> entries;
    std::vector<std::vector<std::uint64_t>> incoming(cfg.P);
    ParallelStep send = ParallelStep::all_idle(cfg.P);
    bool any_send = false;
    for (std::uint64_t x : winners) {
      std::uint64_t p = list.pred[x];
      entries.push_back(BridgeEntry{x, p, list.succ[x], list.weight[x]});
      if (owner[p] == owner[x]) continue;
      send.requests[owner[x]] = IoRequest::write(scratch[pos_of[p]], {held[x]});
      incoming[owner[p]].push_back(x);
      any_send = true;
    }
    if (any_send) state.execute_step(send);
    std::size_t k = 0;
    for (const auto& in : incoming) k = std::max(k, in.size());
    for (std::size_t t = 0; t < k; ++t) {
      ParallelStep recv = ParallelStep::all_idle(cfg.P);
      for (ProcId p = 0; p < cfg.P; ++p)
        if (t < incoming[p].size())
          recv.requests[p] = IoRequest::read(scratch[pos_of[list.pred[incoming[p][t]]]]);
      state.execute_step(recv);
    }
    for (std::uint64_t x : winners) {
      std::uint64_t p = list.pred[x];
      std::uint64_t s = list.succ[x];
      held[p] = edge_contract(state, owner[p], held[p], held[x]);
      list.succ[p] = s;
      list.weight[p] += list.weight[x];
      if (s != kTail) list.pred[s] = p;
      removed[x] = true;
      ++front[owner[x]];
    }
    record.rounds.push_back(std::move(entries));
    ++stats.rounds;
  }
  state.release_blocks(scratch);

  // Write the surviving endpoints back to shared memory.
  std::vector<std::uint64_t> survivors;
  for (std::uint64_t x : run.live)
    if (!removed[x]) survivors.push_back(x);
  std::vector<std::vector<AtomId>> mine(cfg.P);
  for (std::uint64_t x : survivors) mine[owner[x]].push_back(held[x]);
  Layout layout;
  for (std::size_t done = 0;; done += cfg.B) {
    ParallelStep flush = ParallelStep::all_idle(cfg.P);
    bool any = false;
    for (ProcId p = 0; p < cfg.P; ++p) {
      if (done >= mine[p].size()) continue;
      auto first = mine[p].begin() + done;
      auto last = mine[p].begin() + std::min(mine[p].size(), done + cfg.B);
      BlockIndex b = state.acquire_blocks(1).front();
      flush.requests[p] = IoRequest::write(b, {first, last});
      layout.blocks.push_back(b);
      any = true;
    }
    if (!any) break;
    state.execute_step(flush);
  }
  run.layout = std::move(layout);
  run.live = std::move(survivors);
  return stats;
}

RankAssignment unwind_ranks(const ListRankingState& run, const BridgeRecord& record) {
  constexpr std::uint64_t kUnset = kTail;
  const auto& list = run.list;
  RankAssignment rank(list.size(), kUnset);
  std::vector<std::uint64_t> path;
  for (std::uint64_t x = run.head; x != kTail; x = list.succ[x]) {
    if (path.size() > run.live.size())
      throw Error(ErrorCode::CorruptRecord, "live links do not form a path");
    path.push_back(x);
  }
  std::uint64_t acc = 0;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    if (list.succ[*it] != kTail) acc += list.weight[*it];
    rank[*it] = acc;
  }
  for (auto round = record.rounds.rbegin(); round != record.rounds.rend(); ++round) {
    for (const auto& e : *round) {
      if (e.removed >= rank.size() || rank[e.removed] != kUnset)
        throw Error(ErrorCode::CorruptRecord, "element " + std::to_string(e.removed) +
                                                  " reinserted twice");
      if (e.succ >= rank.size() || rank[e.succ] == kUnset)
        throw Error(ErrorCode::CorruptRecord, "successor of " + std::to_string(e.removed) +
                                                  " has no rank");
      rank[e.removed] = rank[e.succ] + e.weight;
    }
  }
  return rank;
}

RankAssignment sequential_rank_oracle(std::span<const std::uint64_t> succ) {
  check_path(succ);
  const std::size_t n = succ.size();
  std::vector<bool> has_pred(n, false);
  for (std::uint64_t s : succ)
    if (s != kTail) has_pred[s] = true;
  std::uint64_t x = std::find(has_pred.begin(), has_pred.end(), false) - has_pred.begin();
  RankAssignment rank(n);
  for (std::size_t left = n; x != kTail; x = succ[x]) rank[x] = --left;
  return rank;
}

ListRankResult rank_list(MachineConfig config, std::span<const std::uint64_t> succ,
                         std::uint64_t seed, MachineOptions options) {
  config.N = succ.size();
  auto list = LinkedListInstance::from_successors({succ.begin(), succ.end()});
  check_path(list.succ);
  auto payloads = list_payloads(list);
  MachineState state(config, payloads, options);
  ListRankingState run = start_ranking(state, list);
  make_doubly_linked(state, run);

  ListRankResult result;
  auto visit = [&](Region r) {
    if (std::find(result.regions.begin(), result.regions.end(), r) == result.regions.end())
      result.regions.push_back(r);
  };
  BridgeRecord record;
  PhaseStats first = list_rank_alg1(state, run, seed, record);
  for (std::size_t n : first.sizes) visit(n >= config.P * config.B ? Region::Sorting : Region::Contraction);
  PhaseStats second = list_rank_alg2(state, run, seed, record);
  if (second.rounds > 0) visit(Region::Queues);
  result.ranks = unwind_ranks(run, record);
  result.io_count = state.io_count();
  result.alg1_rounds = first.rounds;
  result.alg2_rounds = second.rounds;
  return result;
}

std::vector<std::uint64_t> random_list(std::size_t n, std::uint64_t seed) {
  std::vector<std::uint64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::uint64_t> succ(n, kTail);
  for (std::size_t i = 0; i + 1 < n; ++i) succ[order[i]] = order[i + 1];
  return succ;
}

}  // namespace pem
