#pragma once

// Random parallel steps checked against a small reference model of the
// machine rules.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pem/machine.hpp"

namespace pem::fuzz {


struct Model {
  pem::MachineConfig cfg;
  bool normalized = false;
  std::vector<std::vector<AtomId>> blocks;
  std::vector<std::vector<AtomId>> caches;
  std::uint64_t ios = 0;
  AtomId next_id = 0;

  static bool holds(std::vector<AtomId> cache, const std::vector<AtomId>& want) {
    for (AtomId id : want) {
      auto it = std::find(cache.begin(), cache.end(), id);
      if (it == cache.end()) return false;
      cache.erase(it);
    }
    return true;
  }

  // The error the machine must raise, or nothing if the step is legal.
  std::optional<ErrorCode> verdict(const pem::ParallelStep& step) const {
    if (step.requests.size() != cfg.P) return ErrorCode::ConfigError;
    bool reads = false, writes = false;
    std::map<std::size_t, int> writers;
    for (const auto& r : step.requests) {
      reads |= r.kind == pem::IoKind::Read;
      if (r.kind == pem::IoKind::Write) {
        writes = true;
        ++writers[r.block];
      }
    }
    if (normalized && reads && writes) return ErrorCode::NotNormalized;
    for (const auto& [block, count] : writers)
      if (count > 1) return ErrorCode::CrewViolation;
    for (std::size_t p = 0; p < cfg.P; ++p) {
      const auto& r = step.requests[p];
      if (r.kind == pem::IoKind::Read) {
        if (r.block >= blocks.size()) return ErrorCode::NoSuchBlock;
        if (caches[p].size() + blocks[r.block].size() > cfg.M) return ErrorCode::CacheOverflow;
      } else if (r.kind == pem::IoKind::Write) {
        if (r.atoms.size() > cfg.B) return ErrorCode::BlockOverflow;
        if (!holds(caches[p], r.atoms)) return ErrorCode::NotResident;
      }
    }
    return std::nullopt;
  }

  void apply(const pem::ParallelStep& step) {
    auto before = blocks;
    for (std::size_t p = 0; p < cfg.P; ++p) {
      const auto& r = step.requests[p];
      if (r.kind == pem::IoKind::Read)
        caches[p].insert(caches[p].end(), before[r.block].begin(), before[r.block].end());
    }
    for (std::size_t p = 0; p < cfg.P; ++p) {
      const auto& r = step.requests[p];
      if (r.kind != pem::IoKind::Write) continue;
      for (AtomId id : r.atoms) caches[p].erase(std::find(caches[p].begin(), caches[p].end(), id));
      if (r.block >= blocks.size()) blocks.resize(r.block + 1);
      blocks[r.block] = r.atoms;
    }
    ++ios;
  }
};

inline std::vector<AtomId> sorted(std::span<const AtomId> v) {
  std::vector<AtomId> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  return out;
}

inline bool same_state(const Model& m, const pem::MachineState& s) {
  if (s.io_count() != m.ios || s.block_count() != m.blocks.size()) return false;
  for (std::size_t b = 0; b < m.blocks.size(); ++b)
    if (sorted(s.block(b)) != sorted(m.blocks[b])) return false;
  for (std::size_t p = 0; p < m.cfg.P; ++p)
    if (sorted(s.cache(p)) != sorted(m.caches[p])) return false;
  return true;
}

struct Outcome {
  std::size_t steps = 0;
  std::size_t invalid = 0;        // steps the model rejects
  std::size_t silent = 0;         // invalid steps the machine accepted
  std::size_t wrong_code = 0;     // rejected with a different error
  std::size_t false_reject = 0;   // valid steps the machine rejected
  std::size_t divergent = 0;      // states that differ after a step
  std::map<ErrorCode, std::size_t> by_code;
  bool ok() const { return silent == 0 && wrong_code == 0 && false_reject == 0 && divergent == 0; }
};

inline pem::ParallelStep random_step(const Model& m, std::mt19937_64& rng) {
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  pem::ParallelStep step = pem::ParallelStep::all_idle(m.cfg.P);
  if (pick(200) == 0) step.requests.resize(m.cfg.P + 1);
  const std::size_t nb = m.blocks.size();
  for (std::size_t p = 0; p < m.cfg.P; ++p) {
    auto& r = step.requests[p];
    switch (pick(5)) {
      case 0:
        break;
      case 1:
      case 2:
        r = pem::IoRequest::read(pick(8) == 0 ? nb + pick(3) : pick(nb));
        break;
      default: {
        std::vector<AtomId> sel;
        for (AtomId id : m.caches[p])
          if (pick(2) == 0) sel.push_back(id);
        if (pick(10) == 0) sel.push_back(m.next_id + pick(4));                        // stranger
        if (pick(10) == 0 && !m.caches[p].empty()) sel.push_back(m.caches[p].front());  // duplicate
        if (sel.size() > m.cfg.B && pick(3) != 0) sel.resize(m.cfg.B);
        r = pem::IoRequest::write(pick(6) == 0 ? nb + pick(2) : pick(nb), std::move(sel));
      }
    }
  }
  return step;
}

// Runs `steps` random steps on machines of random shape. Every few hundred
// steps a new machine is started.
inline Outcome run(std::size_t steps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Outcome out;
  while (out.steps < steps) {
    pem::MachineConfig cfg;
    cfg.B = 1 + rng() % 4;
    cfg.M = cfg.B * (2 + rng() % 3) + rng() % 2;
    cfg.P = 1 + rng() % 4;
    cfg.N = cfg.P * cfg.B * (1 + rng() % 4) + rng() % cfg.B;
    const bool normalized = rng() % 4 == 0;
    pem::MachineState state(cfg, std::vector<pem::Payload>(cfg.N),
                            pem::MachineOptions{normalized, pem::TraceMode::Off});
    Model m{cfg, normalized};
    for (std::size_t b = 0; b < state.block_count(); ++b) {
      auto c = state.block(b);
      m.blocks.emplace_back(c.begin(), c.end());
    }
    m.caches.resize(cfg.P);
    m.next_id = cfg.N;

    for (std::size_t k = 0; k < 500 && out.steps < steps; ++k, ++out.steps) {
      // In-cache housekeeping keeps caches from saturating.
      for (std::size_t p = 0; p < cfg.P; ++p) {
        auto& cache = m.caches[p];
        if (!cache.empty() && rng() % 3 == 0) {
          AtomId id = cache[rng() % cache.size()];
          state.delete_atom(p, id);
          cache.erase(std::find(cache.begin(), cache.end(), id));
        }
        if (!cache.empty() && cache.size() < cfg.M && rng() % 8 == 0) {
          AtomId id = state.copy_atom(p, cache[rng() % cache.size()]);
          if (id != m.next_id) ++out.divergent;
          cache.push_back(m.next_id++);
        }
      }
      auto step = random_step(m, rng);
      auto expected = m.verdict(step);
      std::optional<ErrorCode> got;
      try {
        state.execute_step(step);
      } catch (const pem::Error& e) {
        got = e.code();
      }
      if (expected) {
        ++out.invalid;
        ++out.by_code[*expected];
        if (!got) {
          ++out.silent;
          m.apply(step);  // resync so later steps stay meaningful
        } else if (*got != *expected) {
          ++out.wrong_code;
        }
      } else if (got) {
        ++out.false_reject;
      } else {
        m.apply(step);
      }
      if (!same_state(m, state)) {
        ++out.divergent;
        break;
      }
    }
  }
  return out;
}

}  // namespace pem::fuzz
