#include "pem/sorting.hpp"

#include <algorithm>
#include <string>

#include "pem/cost_model.hpp"

namespace pem {

namespace {

std::vector<std::vector<AtomId>> cut_blocks(std::span<const AtomId> atoms, std::size_t fill) {
  std::vector<std::vector<AtomId>> out;
  for (std::size_t i = 0; i < atoms.size(); i += fill)
    out.emplace_back(atoms.begin() + i, atoms.begin() + std::min(atoms.size(), i + fill));
  return out;
}

std::size_t fill_or_b(const MachineState& state, std::size_t fill) {
  const std::size_t b = state.config().B;
  if (fill == 0) return b;
  if (fill > b) throw Error(ErrorCode::BlockOverflow, "fill exceeds B");
  return fill;
}

}  // namespace

Layout pem_merge_sort(MachineState& state, const Layout& input, const KeyFn& key,
                      SortOptions options) {
  const auto& cfg = state.config();
  const std::size_t fill = fill_or_b(state, options.fill);
  std::vector<AtomId> atoms = layout_atoms(state, input);
  const std::size_t n = atoms.size();
  if (n == 0) {
    release_layout(state, input);
    return {};
  }
  thread_local std::vector<std::uint64_t> key_table;
  if (key_table.size() < state.atom_count()) key_table.resize(state.atom_count());
  auto& keys = key_table;
  for (AtomId id : atoms) keys[id] = key(state.atom(id));
  auto by_key = [&](AtomId a, AtomId b) { return keys[a] < keys[b]; };

  // Run formation: each processor sorts groups of up to M/B input blocks.
  const std::size_t nblocks = input.blocks.size();
  const std::size_t group = std::max<std::size_t>(
      1, std::min(cfg.M / cfg.B, (nblocks + cfg.P - 1) / cfg.P));
  const std::size_t nchunks = (nblocks + group - 1) / group;
  const bool single = nchunks == 1;

  std::vector<std::vector<AtomId>> runs;
  std::vector<std::vector<AtomId>> outputs;
  std::vector<std::size_t> chunk_first_output;
  for (std::size_t c = 0; c < nchunks; ++c) {
    std::vector<AtomId> run;
    for (std::size_t b = c * group; b < std::min(nblocks, (c + 1) * group); ++b) {
      auto content = state.block(input.blocks[b]);
      run.insert(run.end(), content.begin(), content.end());
    }
    std::stable_sort(run.begin(), run.end(), by_key);
    chunk_first_output.push_back(outputs.size());
    for (auto& blk : cut_blocks(run, single ? fill : cfg.B)) outputs.push_back(std::move(blk));
    runs.push_back(std::move(run));
  }
  chunk_first_output.push_back(outputs.size());
  std::vector<std::size_t> proc_start;
  for (std::size_t s : even_split(nchunks, cfg.P)) proc_start.push_back(chunk_first_output[s]);
  Layout layout = gather(state, input, outputs, proc_start);
  release_layout(state, input);

  const std::size_t fan_in = std::max<std::size_t>(
      2, std::min(cfg.M / cfg.B, n / (cfg.P * cfg.B)));
  while (runs.size() > 1) {
    const bool last = runs.size() <= fan_in;
    std::vector<std::vector<AtomId>> merged;
    outputs.clear();
    for (std::size_t r = 0; r < runs.size(); r += fan_in) {
      std::vector<AtomId> run;
      for (std::size_t k = r; k < std::min(runs.size(), r + fan_in); ++k) {
        const std::size_t mid = run.size();
        run.insert(run.end(), runs[k].begin(), runs[k].end());
        std::inplace_merge(run.begin(), run.begin() + mid, run.end(), by_key);
      }
      for (auto& blk : cut_blocks(run, last ? fill : cfg.B)) outputs.push_back(std::move(blk));
      merged.push_back(std::move(run));
    }
    Layout next = gather(state, layout, outputs);
    release_layout(state, layout);
    layout = std::move(next);
    runs = std::move(merged);
  }
  return layout;
}

Layout pem_merge_sort(MachineState& state, const KeyFn& key) {
  return pem_merge_sort(state, initial_layout(state), key);
}

Layout pem_permute(MachineState& state, const Layout& input, std::span<const std::size_t> target,
                   PermuteOptions options) {
  const auto& cfg = state.config();
  const std::size_t fill = fill_or_b(state, options.fill);
  std::vector<AtomId> atoms = layout_atoms(state, input);
  const std::size_t n = atoms.size();
  if (target.size() != n)
    throw Error(ErrorCode::NotAPermutation, "target has " + std::to_string(target.size()) +
                                                " entries for " + std::to_string(n) + " atoms");
  std::vector<AtomId> placed(n);
  std::vector<bool> hit(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (target[i] >= n || hit[target[i]])
      throw Error(ErrorCode::NotAPermutation, "target " + std::to_string(target[i]) +
                                                  " is out of range or repeated");
    hit[target[i]] = true;
    placed[target[i]] = atoms[i];
  }

  PermuteStrategy strategy = options.strategy;
  if (strategy == PermuteStrategy::Auto) {
    CostParams c{static_cast<double>(n), static_cast<double>(cfg.P), static_cast<double>(cfg.M),
                 static_cast<double>(cfg.B)};
    strategy = c.N / c.P <= eval_sort_cost(c) ? PermuteStrategy::Direct : PermuteStrategy::Sort;
  }
  if (strategy == PermuteStrategy::Direct) {
    Layout out = gather(state, input, cut_blocks(placed, fill));
    release_layout(state, input);
    return out;
  }
  std::vector<std::uint64_t> dest(state.atom_count());
  for (std::size_t i = 0; i < n; ++i) dest[atoms[i]] = target[i];
  return pem_merge_sort(state, input, [&](const Atom& a) { return dest[a.id]; }, SortOptions{fill});
}

Layout pem_permute(MachineState& state, std::span<const std::size_t> target) {
  return pem_permute(state, initial_layout(state), target);
}

namespace {

void check_labels(std::span<const std::size_t> labels) {
  if (labels.size() % 2 != 0) throw Error(ErrorCode::BadLabeling, "odd number of atoms");
  std::vector<int> count(labels.size() / 2 + 1, 0);
  for (std::size_t l : labels) {
    if (l < 1 || l > labels.size() / 2)
      throw Error(ErrorCode::BadLabeling, "label " + std::to_string(l) + " out of range");
    if (++count[l] > 2)
      throw Error(ErrorCode::BadLabeling, "label " + std::to_string(l) + " used more than twice");
  }
  for (std::size_t l = 1; l < count.size(); ++l)
    if (count[l] != 2) throw Error(ErrorCode::BadLabeling, "label " + std::to_string(l) + " unused");
}

}  // namespace

BlockPermutation solve_proximate_neighbors(MachineState& state, std::span<const std::size_t> labels) {
  const std::size_t b = state.config().B;
  if (b < 2) throw Error(ErrorCode::ConfigError, "a pair needs blocks of at least two atoms");
  if (labels.size() != state.config().N)
    throw Error(ErrorCode::BadLabeling, "one label per input atom expected");
  check_labels(labels);
  Layout in = initial_layout(state);
  std::vector<std::uint64_t> label_of(state.atom_count());
  std::vector<AtomId> atoms = layout_atoms(state, in);
  for (std::size_t i = 0; i < atoms.size(); ++i) label_of[atoms[i]] = labels[i];
  // An even fill keeps every sorted pair inside one block.
  Layout out = pem_merge_sort(state, in, [&](const Atom& a) { return label_of[a.id]; },
                              SortOptions{b % 2 == 0 ? b : b - 1});
  return state.snapshot_block_permutation(out.blocks);
}

bool pairs_co_blocked(const BlockPermutation& blocks, std::span<const std::size_t> labels) {
  std::vector<std::size_t> where(labels.size(), static_cast<std::size_t>(-1));
  for (const auto& [b, ids] : blocks)
    for (AtomId id : ids)
      if (id < where.size()) where[id] = b;
  std::vector<std::size_t> first(labels.size() / 2 + 1, static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (where[i] == static_cast<std::size_t>(-1)) return false;
    std::size_t& f = first[labels[i]];
    if (f == static_cast<std::size_t>(-1)) {
      f = where[i];
    } else if (f != where[i]) {
      return false;
    }
  }
  return true;
}

}  // namespace pem
