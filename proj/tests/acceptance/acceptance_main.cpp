// One line per acceptance criterion; exit status is non-zero if any fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "pem/cost_model.hpp"
#include "pem/gif.hpp"
#include "pem/list_ranking.hpp"
#include "pem/reductions.hpp"
#include "pem/sorting.hpp"
#include "pem/step_fuzz.hpp"

using namespace pem;

namespace {

// Tolerances.
constexpr double kOracleSeconds = 120.0;
constexpr double kSortBandWidth = 8.0;
constexpr double kIndependentSetSigmas = 5.0;
constexpr double kQueueTailFraction = 0.05;
constexpr double kGifBandWidth = 2.0;
constexpr double kCountBound = 16.0;

constexpr MachineOptions kQuiet{false, TraceMode::Off};

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %-28s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// Runs jobs 0..count-1 on all hardware threads.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& job) {
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, count); ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < count;) job(i);
    });
  for (auto& t : pool) t.join();
}

void oracle_equivalence() {
  const std::vector<std::size_t> sizes{1 << 6, 1 << 10, 1 << 14};
  const std::vector<MachineConfig> cells{{4, 16, 4, 0}, {16, 8, 4, 0}, {8, 4, 2, 0}, {2, 64, 16, 0},
                                         {32, 4, 2, 0}, {4, 32, 8, 0}, {1, 16, 4, 0}};
  const std::size_t seeds = 50;
  const std::size_t jobs = sizes.size() * cells.size() * seeds;
  std::vector<char> ok(jobs, 0);
  std::vector<std::vector<Region>> regions(jobs);
  auto start = std::chrono::steady_clock::now();
  parallel_for(jobs, [&](std::size_t j) {
    const std::size_t n = sizes[j / (cells.size() * seeds)];
    const MachineConfig cfg = cells[(j / seeds) % cells.size()];
    const std::uint64_t seed = 1000 + j % seeds;
    try {
      auto succ = random_list(n, seed);
      auto result = rank_list(cfg, succ, seed, kQuiet);
      ok[j] = result.ranks == sequential_rank_oracle(succ);
      regions[j] = result.regions;
    } catch (const std::exception&) {
      ok[j] = 0;
    }
  });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::set<Region> seen;
  for (const auto& r : regions) seen.insert(r.begin(), r.end());
  const auto matched = std::count(ok.begin(), ok.end(), 1);
  report(1, "oracle equivalence", matched == long(jobs) && seen.size() == 3 && seconds < kOracleSeconds,
         fmt("%.0f/%.0f runs exact, %.0f regions, %.1f s", double(matched), double(jobs), double(seen.size()), seconds) +
             " over " + std::to_string(cells.size()) + " cells");
}

void sort_envelope() {
  std::vector<MachineConfig> cells;
  for (std::size_t n : {1 << 8, 1 << 10, 1 << 12, 1 << 14})
    for (MachineConfig c : {MachineConfig{1, 16, 4, 0}, MachineConfig{4, 16, 4, 0}, MachineConfig{16, 8, 4, 0},
                            MachineConfig{2, 64, 16, 0}, MachineConfig{8, 32, 8, 0}, MachineConfig{4, 8, 2, 0}}) {
      c.N = n;
      cells.push_back(c);
    }
  std::vector<double> ratio(cells.size(), 0);
  std::vector<char> sorted(cells.size(), 0);
  parallel_for(cells.size(), [&](std::size_t i) {
    const auto& c = cells[i];
    std::mt19937_64 rng(i + 1);
    std::vector<std::uint64_t> keys(c.N);
    for (auto& k : keys) k = rng();
    MachineState state(c, std::vector<Payload>(c.N), kQuiet);
    Layout out = pem_merge_sort(state, [&](const Atom& a) { return keys[a.id]; });
    auto ids = layout_atoms(state, out);
    sorted[i] = ids.size() == c.N &&
                std::is_sorted(ids.begin(), ids.end(), [&](AtomId a, AtomId b) { return keys[a] < keys[b]; });
    ratio[i] = state.io_count() / eval_sort_cost({double(c.N), double(c.P), double(c.M), double(c.B)});
  });
  auto [lo, hi] = std::minmax_element(ratio.begin(), ratio.end());
  const bool all_sorted = std::all_of(sorted.begin(), sorted.end(), [](char s) { return s; });
  report(2, "sort envelope", all_sorted && cells.size() >= 20 && *hi / *lo <= kSortBandWidth,
         fmt("%.0f cells, ratio in [%.2f, %.2f], width %.2f", double(cells.size()), *lo, *hi, *hi / *lo));
}

void independent_set_statistics() {
  const std::size_t n = 4096;
  const int trials = 10000;
  auto succ = random_list(n, 17);
  auto list = LinkedListInstance::from_successors(succ);
  MachineState state({4, 8, 4, n}, list_payloads(list), kQuiet);
  ListRankingState run = start_ranking(state, list);
  double sum = 0, sq = 0;
  std::size_t adjacent = 0;
  std::vector<char> in(n, 0);
  for (int t = 0; t < trials; ++t) {
    auto s = sample_independent_set(run, draw_coins(n, 4242, t));
    for (auto x : s) in[x] = 1;
    for (auto x : s)
      if (succ[x] != kTail && in[succ[x]]) ++adjacent;
    for (auto x : s) in[x] = 0;
    sum += s.size();
    sq += double(s.size()) * s.size();
  }
  const double mean = sum / trials;
  const double se = std::sqrt((sq / trials - mean * mean) / trials);
  const double z = std::abs(mean - (n - 1) / 4.0) / se;
  report(3, "independent set statistics", z <= kIndependentSetSigmas && adjacent == 0,
         fmt("mean %.2f vs %.2f, %.2f standard errors, %.0f adjacent", mean, (n - 1) / 4.0, z, double(adjacent)));
}

void queue_rounds() {
  const MachineConfig cfg{64, 12, 6, 384};
  const int trials = 200;
  const double limit = 16 * std::log2(64.0);
  std::vector<std::size_t> rounds(trials, 0);
  std::vector<char> exact(trials, 0);
  parallel_for(trials, [&](std::size_t t) {
    auto succ = random_list(cfg.N, 500 + t);
    auto list = LinkedListInstance::from_successors(succ);
    MachineState state(cfg, list_payloads(list), kQuiet);
    ListRankingState run = start_ranking(state, list);
    make_doubly_linked(state, run);
    BridgeRecord record;
    try {
      rounds[t] = list_rank_alg2(state, run, 900 + t, record).rounds;
      exact[t] = unwind_ranks(run, record) == sequential_rank_oracle(succ);
    } catch (const Error&) {
      rounds[t] = std::size_t(-1);
    }
  });
  const auto over = std::count_if(rounds.begin(), rounds.end(), [&](std::size_t r) { return r > limit; });
  const auto correct = std::count(exact.begin(), exact.end(), 1);
  const double fraction = double(over) / trials;
  report(4, "queue phase rounds", fraction <= kQueueTailFraction && correct == trials,
         fmt("queue length %.0f, max %.0f rounds, %.1f%% over %.0f", double(small_list_cutoff(cfg) / cfg.P),
             double(*std::max_element(rounds.begin(), rounds.end())), 100 * fraction, limit));
}

struct GifSummary {
  std::vector<double> ratio;
  std::size_t runs = 0, solved = 0, over_rounds = 0;
  std::size_t uncovered = 0, illegal = 0, gaps = 0, quadrupling = 0;
};

GifSummary gif_runs() {
  const std::vector<unsigned> exponents{8, 10, 12, 14, 16};
  const std::size_t seeds = 10;
  const std::size_t jobs = exponents.size() * seeds;
  std::vector<GifRun> runs(jobs);
  std::vector<char> exact(jobs, 0);
  parallel_for(jobs, [&](std::size_t j) {
    GifGame game(generate_gif_instance(exponents[j / seeds], 70 + j % seeds), kQuiet);
    runs[j] = omniscient_reference_solver(game);
    // The final atom must be exactly [0, N].
    for (ProcId p = 0; p < game.instance().config.P && !exact[j]; ++p)
      for (AtomId id : game.machine().cache(p))
        if (std::get<IntervalPayload>(game.machine().atom(id).payload) ==
            IntervalPayload{0, std::int64_t(game.instance().n)})
          exact[j] = 1;
    for (BlockIndex b = 0; b < game.machine().block_count() && !exact[j]; ++b)
      for (AtomId id : game.machine().block(b))
        if (std::get<IntervalPayload>(game.machine().atom(id).payload) ==
            IntervalPayload{0, std::int64_t(game.instance().n)})
          exact[j] = 1;
  });
  GifSummary s;
  for (std::size_t j = 0; j < jobs; ++j) {
    const double lg = exponents[j / seeds];
    const auto& r = runs[j];
    ++s.runs;
    s.solved += r.solved && exact[j];
    s.over_rounds += r.rounds > std::ceil(lg * std::log(2.0) / std::log(1.5));
    s.ratio.push_back(r.io_count / (lg * lg));
    s.uncovered += r.guide.uncovered_atoms;
    s.illegal += r.guide.illegal_reveals;
    s.gaps += r.guide.tiling_gaps;
    s.quadrupling += r.quadrupling_violations;
  }
  return s;
}

void gif_scaling(const GifSummary& s) {
  auto [lo, hi] = std::minmax_element(s.ratio.begin(), s.ratio.end());
  report(5, "interval fusion scaling",
         s.solved == s.runs && s.over_rounds == 0 && *hi / *lo <= kGifBandWidth,
         fmt("%.0f runs solved, I/O per log^2 N in [%.3f, %.3f], width %.2f", double(s.solved), *lo, *hi, *hi / *lo) +
             ", rounds over bound " + std::to_string(s.over_rounds));
}

void guide_invariants(const GifSummary& s) {
  report(6, "guide invariants", s.uncovered == 0 && s.illegal == 0 && s.gaps == 0,
         fmt("uncovered %.0f, reveals without solved child %.0f, gaps %.0f", double(s.uncovered), double(s.illegal),
             double(s.gaps)));
}

void quadrupling(const GifSummary& s) {
  const bool fires = !audit_quadrupling({1, 5}).pass;
  report(7, "quadrupling audit", s.quadrupling == 0 && fires,
         fmt("%.0f violations over %.0f runs, injected jump detected: ", double(s.quadrupling), double(s.runs)) +
             (fires ? "yes" : "no"));
}

void counting_bound() {
  auto all = enumerate_special_instances(8);
  std::size_t mismatches = 0, over = 0, max_count = 0;
  for (const auto& target : all) {
    MachineState state({2, 8, 4, 8}, std::vector<Payload>(8), kQuiet);
    auto out = solve_proximate_neighbors(state, target.labels);
    std::size_t brute = 0;
    for (const auto& pn : all) brute += pairs_co_blocked(out, pn.labels);
    const auto counted = count_solved_instances(out, 8, 4);
    mismatches += counted != brute;
    over += counted > kCountBound;
    max_count = std::max<std::size_t>(max_count, counted);
  }
  report(8, "counting bound", all.size() == 24 && mismatches == 0 && over == 0,
         fmt("%.0f instances, %.0f mismatches, max count %.0f of %.0f", double(all.size()), double(mismatches),
             double(max_count), kCountBound));
}

void round_trips() {
  std::size_t pn_total = 0, pn_ok = 0, audits = 0, audit_ok = 0;
  for (std::size_t n : {2, 4, 6, 8}) {
    for (const auto& pn : enumerate_special_instances(n)) {
      auto se = pn_to_semigroup(pn, n * 31);
      for (EvalShape shape : {EvalShape::LeftFold, EvalShape::Tree}) {
        MachineConfig cfg{n >= 4 ? 2u : 1u, 4, 2, n};
        auto state = run_semigroup_evaluation(cfg, se, pairing_semigroup(), shape, kQuiet);
        ++pn_total;
        pn_ok += solves_pn(extract_pn_solution(state, se), pn);
        ++audits;
        audit_ok += contiguity_audit(state.op_log(), product_positions(se)).pass;
      }
    }
  }
  std::size_t ec_ok = 0;
  const std::size_t ec_total = 20;
  auto cat = concatenation_semigroup();
  for (std::uint64_t seed = 1; seed <= ec_total; ++seed) {
    const std::size_t n = 8 + (seed * 7) % 57;
    auto se = random_semigroup_instance(n, seed);
    auto state = run_semigroup_evaluation({2, 8, 2, n}, se, cat, EvalShape::Tree, kQuiet);
    ++audits;
    audit_ok += contiguity_audit(state.op_log(), product_positions(se)).pass;
    ec_ok += replay_edge_contraction({2, 8, 2, n}, semigroup_to_edge_contraction(se), se, cat) == direct_product(se, cat);
  }
  report(9, "reduction round trips", pn_ok == pn_total && ec_ok == ec_total && audit_ok == audits,
         fmt("PN %.0f/%.0f, EC %.0f/%.0f", double(pn_ok), double(pn_total), double(ec_ok), double(ec_total)) +
             fmt(", contiguity %.0f/%.0f", double(audit_ok), double(audits)));
}

void step_safety() {
  auto out = fuzz::run(100000, 2024);
  report(10, "step safety", out.steps == 100000 && out.ok(),
         fmt("%.0f steps, %.0f invalid, %.0f silently accepted, %.0f wrong code",
             double(out.steps), double(out.invalid), double(out.silent), double(out.wrong_code)) +
             fmt(", %.0f false rejects, %.0f divergent", double(out.false_reject), double(out.divergent)));
}

}  // namespace

int main() {
  oracle_equivalence();
  sort_envelope();
  independent_set_statistics();
  queue_rounds();
  const GifSummary gif = gif_runs();
  gif_scaling(gif);
  guide_invariants(gif);
  quadrupling(gif);
  counting_bound();
  round_trips();
  step_safety();
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
