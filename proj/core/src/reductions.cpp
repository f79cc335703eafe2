#include "pem/reductions.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>

#include "pem/program.hpp"
#include "pem/sorting.hpp"

namespace pem {

SemigroupInstance pn_to_semigroup(const PnInstance& pn, std::uint64_t seed) {
  const std::size_t n = pn.labels.size();
  std::vector<std::vector<std::size_t>> members(n / 2 + 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t l = pn.labels[i];
    if (l < 1 || l > n / 2) throw Error(ErrorCode::BadLabeling, "label out of range");
    members[l].push_back(i + 1);
  }
  std::mt19937_64 rng(seed);
  SemigroupInstance se;
  for (std::size_t l = 1; l <= n / 2; ++l) {
    if (members[l].size() != 2) throw Error(ErrorCode::BadLabeling, "label not used twice");
    if (rng() & 1) std::swap(members[l][0], members[l][1]);
    se.perm.push_back(members[l][0]);
    se.perm.push_back(members[l][1]);
  }
  for (std::size_t i = 1; i <= n; ++i) se.inputs.push_back(SemigroupValue{{i, i}});
  return se;
}

SemigroupInstance random_semigroup_instance(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SemigroupInstance se;
  se.perm.resize(n);
  std::iota(se.perm.begin(), se.perm.end(), 1);
  std::shuffle(se.perm.begin(), se.perm.end(), rng);
  for (std::size_t i = 0; i < n; ++i) se.inputs.push_back(SemigroupValue{{1000 + rng() % 1000000, i}});
  return se;
}

SemigroupValue direct_product(const SemigroupInstance& se, const SemigroupSpec& spec) {
  SemigroupValue acc = se.inputs.at(se.perm.at(0) - 1);
  for (std::size_t i = 1; i < se.perm.size(); ++i) acc = spec.combine(acc, se.inputs.at(se.perm[i] - 1));
  return acc;
}

std::vector<std::size_t> product_positions(const SemigroupInstance& se) {
  std::vector<std::size_t> pos(se.perm.size());
  for (std::size_t i = 0; i < se.perm.size(); ++i) pos.at(se.perm[i] - 1) = i + 1;
  return pos;
}

namespace {

// Combines two co-resident atoms into a new one and disposes of the operands.
using Joiner = std::function<AtomId(MachineState&, ProcId, AtomId, AtomId)>;

// Folds the layout in sequence order. Each processor reduces a contiguous
// run of blocks keeping a stack of partial results of doubling size; the
// partials then meet pairwise across processors through scratch blocks.
// `spare` is the number of free cache slots a join needs beyond its operands.
AtomId fold_layout(MachineState& state, const Layout& layout, const Joiner& join, EvalShape shape,
                   std::size_t spare) {
  const auto& cfg = state.config();
  const std::size_t nb = layout.blocks.size();
  std::vector<std::size_t> split = shape == EvalShape::LeftFold
                                       ? std::vector<std::size_t>(cfg.P + 1, nb)
                                       : even_split(nb, cfg.P);
  if (shape == EvalShape::LeftFold) split[0] = 0;

  std::vector<std::optional<AtomId>> partial(cfg.P);
  std::vector<ProcProgram> programs;
  for (ProcId p = 0; p < cfg.P; ++p) {
    programs.emplace_back([&, p, b = split[p], stack = std::vector<std::pair<AtomId, std::size_t>>{}](
                              MachineState& s, ProcId proc) mutable -> std::optional<IoRequest> {
      auto reduce_top = [&] {
        auto [right, rc] = stack.back();
        stack.pop_back();
        auto [left, lc] = stack.back();
        stack.back() = {join(s, proc, left, right), lc + rc};
      };
      if (b > split[p]) {
        // Absorb the block read by the previous request.
        auto content = s.block(layout.blocks[b - 1]);
        for (AtomId id : content) {
          stack.emplace_back(id, 1);
          if (shape == EvalShape::LeftFold) {
            if (stack.size() == 2) reduce_top();
            continue;
          }
          while (stack.size() >= 2 && stack[stack.size() - 2].second == stack.back().second) reduce_top();
        }
        while (stack.size() > 1 && stack.size() + cfg.B + spare > cfg.M) reduce_top();
      }
      if (b < split[p + 1]) return IoRequest::read(layout.blocks[b++]);
      while (stack.size() > 1) reduce_top();
      if (!stack.empty()) partial[p] = stack.front().first;
      return std::nullopt;
    });
  }
  run_lockstep(state, programs);

  std::vector<BlockIndex> scratch = state.acquire_blocks(cfg.P);
  for (std::size_t gap = 1; gap < cfg.P; gap *= 2) {
    ParallelStep send = ParallelStep::all_idle(cfg.P);
    ParallelStep recv = ParallelStep::all_idle(cfg.P);
    std::vector<std::pair<ProcId, ProcId>> meets;
    for (ProcId i = 0; i + gap < cfg.P; i += 2 * gap) {
      ProcId j = i + gap;
      if (!partial[j]) continue;
      send.requests[j] = IoRequest::write(scratch[j], {*partial[j]});
      recv.requests[i] = IoRequest::read(scratch[j]);
      meets.emplace_back(i, j);
    }
    if (meets.empty()) continue;
    state.execute_step(send);
    state.execute_step(recv);
    for (auto [i, j] : meets) {
      partial[i] = partial[i] ? join(state, i, *partial[i], *partial[j]) : *partial[j];
      partial[j].reset();
    }
  }
  state.release_blocks(scratch);
  if (!partial[0]) throw Error(ErrorCode::IncompleteEvaluation, "nothing to evaluate");
  BlockIndex out = state.acquire_blocks(1).front();
  ParallelStep flush = ParallelStep::all_idle(cfg.P);
  flush.requests[0] = IoRequest::write(out, {*partial[0]});
  state.execute_step(flush);
  return *partial[0];
}

Layout into_product_order(MachineState& state, const std::vector<std::size_t>& perm) {
  // The atom in cell c (1-based) moves to position perm^-1(c) - 1.
  std::vector<std::size_t> target(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) target.at(perm[i] - 1) = i;
  return pem_permute(state, target);
}

}  // namespace

AtomId evaluate_semigroup(MachineState& state, const SemigroupInstance& se,
                          const SemigroupSpec& spec, EvalShape shape) {
  if (se.perm.size() != state.config().N || se.inputs.size() != se.perm.size())
    throw Error(ErrorCode::ConfigError, "instance does not match the machine");
  if (state.config().M < state.config().B + 2)
    throw Error(ErrorCode::ConfigError, "combining in cache needs room for B + 2 atoms");
  Layout ordered = into_product_order(state, se.perm);
  Joiner join = [&spec](MachineState& s, ProcId p, AtomId x, AtomId y) {
    AtomId z = semigroup_combine(s, p, x, y, spec);
    const AtomId ops[] = {x, y};
    s.delete_atoms(p, ops);
    return z;
  };
  return fold_layout(state, ordered, join, shape, 1);
}

MachineState run_semigroup_evaluation(MachineConfig config, const SemigroupInstance& se,
                                      const SemigroupSpec& spec, EvalShape shape,
                                      MachineOptions options) {
  config.N = se.inputs.size();
  std::vector<Payload> payloads;
  for (const auto& v : se.inputs) payloads.emplace_back(SemigroupPayload{v});
  MachineState state(config, payloads, options);
  evaluate_semigroup(state, se, spec, shape);
  return state;
}

std::vector<std::pair<std::size_t, std::size_t>> extract_pn_solution(const MachineState& state,
                                                                     const SemigroupInstance& se) {
  auto report = contiguity_audit(state.op_log(), product_positions(se));
  if (!report.full_product)
    throw Error(ErrorCode::IncompleteEvaluation, "the log never forms the full product");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& rec : state.op_log()) {
    if (rec.kind != OpKind::Combine) continue;
    const auto& left = std::get<SemigroupPayload>(state.atom(rec.operands[0]).payload).value;
    const auto& right = std::get<SemigroupPayload>(state.atom(rec.operands[1]).payload).value;
    std::size_t b = left.symbols.back();
    std::size_t c = right.symbols.front();
    out.emplace_back(std::min(b, c), std::max(b, c));
  }
  return out;
}

bool solves_pn(const std::vector<std::pair<std::size_t, std::size_t>>& pairs, const PnInstance& pn) {
  const std::size_t n = pn.labels.size();
  std::vector<std::size_t> first(n / 2 + 1, 0);
  std::vector<std::pair<std::size_t, std::size_t>> want;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t& f = first[pn.labels[i]];
    if (f == 0) {
      f = i + 1;
    } else {
      want.emplace_back(f, i + 1);
    }
  }
  auto have = pairs;
  std::sort(have.begin(), have.end());
  for (const auto& w : want)
    if (!std::binary_search(have.begin(), have.end(), w)) return false;
  return true;
}

EdgeContractionInstance semigroup_to_edge_contraction(const SemigroupInstance& se) {
  const std::size_t n = se.perm.size();
  EdgeContractionInstance ec;
  ec.cells.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t from = se.perm[i];
    std::size_t to = i + 1 < n ? se.perm[i + 1] : n + 1;
    ec.cells.at(from - 1) = EdgePayload{from, to, 1};
  }
  return ec;
}

SemigroupValue replay_edge_contraction(MachineConfig config, const EdgeContractionInstance& ec,
                                       const SemigroupInstance& se, const SemigroupSpec& spec) {
  const std::size_t n = ec.cells.size();
  config.N = n;
  std::vector<Payload> payloads(ec.cells.begin(), ec.cells.end());
  MachineState state(config, payloads);

  // Path order: start at the vertex nothing points to.
  std::vector<bool> entered(n + 2, false);
  for (const auto& e : ec.cells) entered.at(e.dst) = true;
  std::size_t v = 1;
  while (v <= n && entered[v]) ++v;
  std::vector<std::size_t> order;
  while (v <= n && order.size() <= n) {
    order.push_back(v);
    v = ec.cells[v - 1].dst;
  }
  if (order.size() != n || v != n + 1) throw Error(ErrorCode::NotAPath, "edges do not form a path");

  Layout ordered = into_product_order(state, order);
  Joiner join = [](MachineState& s, ProcId p, AtomId x, AtomId y) { return edge_contract(s, p, x, y); };
  AtomId last = fold_layout(state, ordered, join, EvalShape::Tree, 0);
  const auto& final_edge = std::get<EdgePayload>(state.atom(last).payload);
  if (final_edge.src != order.front() || final_edge.dst != n + 1)
    throw Error(ErrorCode::IncompleteEvaluation, "contraction did not reach (s,t)");

  // Edge e_c stands for a_c; a contraction stands for the product.
  std::map<AtomId, SemigroupValue> value;
  for (AtomId id = 0; id < n; ++id) value[id] = se.inputs.at(id);
  for (const auto& rec : state.op_log()) {
    if (rec.kind != OpKind::Contract) continue;
    value[rec.result] = spec.combine(value.at(rec.operands[0]), value.at(rec.operands[1]));
  }
  return value.at(last);
}

std::uint64_t count_solved_instances(const BlockPermutation& out, std::size_t n, std::size_t b) {
  if (n == 0 || n % 2 != 0) throw Error(ErrorCode::NotSpecialClass, "N must be even");
  std::vector<bool> seen(n, false);
  std::uint64_t count = 1;
  bool balanced = true;
  for (const auto& [block, ids] : out) {
    if (ids.size() > b) throw Error(ErrorCode::NotSpecialClass, "block exceeds B");
    std::size_t low = 0;
    for (AtomId id : ids) {
      if (id >= n || seen[id]) throw Error(ErrorCode::NotSpecialClass, "unexpected atom");
      seen[id] = true;
      if (id < n / 2) ++low;
    }
    if (2 * low != ids.size()) balanced = false;
    for (std::size_t k = 2; k <= low; ++k) count *= k;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw Error(ErrorCode::NotSpecialClass, "missing atoms");
  return balanced ? count : 0;
}

double solved_instance_bound(std::size_t n, std::size_t b) {
  return std::pow(static_cast<double>(b) / 2.0, static_cast<double>(n) / 2.0);
}

std::vector<PnInstance> enumerate_special_instances(std::size_t n) {
  if (n > 12) throw Error(ErrorCode::TooLarge, "enumeration is limited to N <= 12");
  if (n < 2 || n % 2 != 0) throw Error(ErrorCode::ConfigError, "N must be even and positive");
  const std::size_t half = n / 2;
  std::vector<std::size_t> sigma(half);
  std::iota(sigma.begin(), sigma.end(), 1);
  std::vector<PnInstance> out;
  do {
    PnInstance pn;
    for (std::size_t i = 1; i <= half; ++i) pn.labels.push_back(i);
    pn.labels.insert(pn.labels.end(), sigma.begin(), sigma.end());
    out.push_back(std::move(pn));
  } while (std::next_permutation(sigma.begin(), sigma.end()));
  return out;
}

}  // namespace pem
