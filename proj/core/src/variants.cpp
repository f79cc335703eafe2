#include "pem/variants.hpp"

#include <algorithm>
#include <iterator>
#include <map>
#include <ostream>
#include <random>

namespace pem {

namespace {

std::vector<AtomId> merged_provenance(const Atom& a, const Atom& b) {
  std::vector<AtomId> out;
  out.reserve(a.provenance.size() + b.provenance.size());
  std::set_union(a.provenance.begin(), a.provenance.end(), b.provenance.begin(),
                 b.provenance.end(), std::back_inserter(out));
  return out;
}

void require_resident(const MachineState& state, ProcId p, AtomId x, AtomId y) {
  if (!state.is_resident(p, x) || !state.is_resident(p, y))
    throw Error(ErrorCode::NotResident, "operands are not co-resident in cache " + std::to_string(p));
  if (x == y && state.instances(x) < 2)
    throw Error(ErrorCode::NotResident, "operand used twice");
}

template <class T>
const T& payload_as(const MachineState& state, AtomId id) {
  const auto* v = std::get_if<T>(&state.atom(id).payload);
  if (!v) throw Error(ErrorCode::KindError, "atom " + std::to_string(id) + " has the wrong payload");
  return *v;
}

}  // namespace

SemigroupSpec concatenation_semigroup() {
  return {"concatenation", [](const SemigroupValue& a, const SemigroupValue& b) {
            SemigroupValue out = a;
            out.symbols.insert(out.symbols.end(), b.symbols.begin(), b.symbols.end());
            return out;
          }};
}

SemigroupSpec pairing_semigroup() {
  return {"pairing", [](const SemigroupValue& a, const SemigroupValue& b) {
            return SemigroupValue{{a.symbols.front(), b.symbols.back()}};
          }};
}

bool spot_check_associative(const SemigroupSpec& spec, std::span<const SemigroupValue> domain,
                            std::uint64_t seed, std::size_t trials) {
  if (domain.empty()) return true;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, domain.size() - 1);
  for (std::size_t t = 0; t < trials; ++t) {
    const auto& a = domain[pick(rng)];
    const auto& b = domain[pick(rng)];
    const auto& c = domain[pick(rng)];
    if (spec.combine(spec.combine(a, b), c) != spec.combine(a, spec.combine(b, c))) return false;
  }
  return true;
}

AtomId semigroup_combine(MachineState& state, ProcId p, AtomId x, AtomId y,
                         const SemigroupSpec& spec) {
  require_resident(state, p, x, y);
  const auto& vx = payload_as<SemigroupPayload>(state, x).value;
  const auto& vy = payload_as<SemigroupPayload>(state, y).value;
  auto prov = merged_provenance(state.atom(x), state.atom(y));
  AtomId z = state.create_atom(p, SemigroupPayload{spec.combine(vx, vy)}, std::move(prov));
  state.append_op(OpRecord{OpKind::Combine, p, {x, y}, z, state.io_count()});
  return z;
}

AtomId edge_contract(MachineState& state, ProcId p, AtomId first, AtomId second) {
  require_resident(state, p, first, second);
  EdgePayload e1 = payload_as<EdgePayload>(state, first);
  EdgePayload e2 = payload_as<EdgePayload>(state, second);
  if (e1.dst != e2.src)
    throw Error(ErrorCode::NoSharedVertex, "edges " + std::to_string(first) + " and " +
                                               std::to_string(second) + " do not meet");
  auto prov = merged_provenance(state.atom(first), state.atom(second));
  const AtomId ops[] = {first, second};
  state.delete_atoms(p, ops);
  AtomId e = state.create_atom(p, EdgePayload{e1.src, e2.dst, e1.weight + e2.weight},
                               std::move(prov));
  state.append_op(OpRecord{OpKind::Contract, p, {first, second}, e, state.io_count()});
  return e;
}

FuseResult interval_fuse(MachineState& state, ProcId p, AtomId x, AtomId y) {
  require_resident(state, p, x, y);
  IntervalPayload ix = payload_as<IntervalPayload>(state, x);
  IntervalPayload iy = payload_as<IntervalPayload>(state, y);
  FuseResult out;
  out.meet_lo = std::max(ix.lo, iy.lo);
  out.meet_hi = std::min(ix.hi, iy.hi);
  if (out.meet_lo > out.meet_hi) return out;
  auto prov = merged_provenance(state.atom(x), state.atom(y));
  const AtomId ops[] = {x, y};
  state.delete_atoms(p, ops);
  out.atom = state.create_atom(
      p, IntervalPayload{std::min(ix.lo, iy.lo), std::max(ix.hi, iy.hi)}, std::move(prov));
  out.fused = true;
  state.append_op(OpRecord{OpKind::Fuse, p, {x, y}, out.atom, state.io_count()});
  return out;
}

ContiguityReport contiguity_audit(const OpLog& log, std::span<const std::size_t> position) {
  ContiguityReport report;
  struct Range {
    std::size_t lo, hi;
    bool ok;
  };
  std::map<AtomId, Range> range;
  for (AtomId id = 0; id < position.size(); ++id) range[id] = {position[id], position[id], true};
  const std::size_t n = position.size();
  std::vector<bool> cut_seen(n + 1, false);
  auto flag = [&](std::string msg) {
    report.pass = false;
    report.violations.push_back(std::move(msg));
  };
  for (const auto& rec : log) {
    if (rec.kind == OpKind::Copy) {
      auto it = range.find(rec.operands.at(0));
      if (it != range.end()) range[rec.result] = it->second;
      continue;
    }
    if (rec.kind != OpKind::Combine) continue;
    auto a = range.find(rec.operands.at(0));
    auto b = range.find(rec.operands.at(1));
    if (a == range.end() || b == range.end()) {
      flag("combine producing " + std::to_string(rec.result) + " uses an unknown operand");
      range[rec.result] = {0, 0, false};
      continue;
    }
    Range ra = a->second;
    Range rb = b->second;
    if (!ra.ok || !rb.ok || ra.hi + 1 != rb.lo) {
      flag("combine producing " + std::to_string(rec.result) + " joins [" + std::to_string(ra.lo) +
           "," + std::to_string(ra.hi) + "] with [" + std::to_string(rb.lo) + "," +
           std::to_string(rb.hi) + "]");
      range[rec.result] = {std::min(ra.lo, rb.lo), std::max(ra.hi, rb.hi), false};
      continue;
    }
    range[rec.result] = {ra.lo, rb.hi, true};
    if (!cut_seen[ra.hi]) {
      cut_seen[ra.hi] = true;
      report.cuts.push_back(ra.hi);
    }
    if (ra.lo == 1 && rb.hi == n) report.full_product = true;
  }
  if (n == 1) report.full_product = true;
  std::sort(report.cuts.begin(), report.cuts.end());
  report.all_cuts = report.cuts.size() + 1 == n;
  return report;
}

void write_op_log(std::ostream& out, const OpLog& log) {
  for (const auto& rec : log) {
    out << rec.io_count << ',' << rec.proc << ',' << to_string(rec.kind) << ',';
    for (std::size_t i = 0; i < rec.operands.size(); ++i) out << (i ? " " : "") << rec.operands[i];
    out << ',' << rec.result << '\n';
  }
}

}  // namespace pem
