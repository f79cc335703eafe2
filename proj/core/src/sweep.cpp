#include "pem/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "pem/cost_model.hpp"
#include "pem/gif.hpp"
#include "pem/list_ranking.hpp"
#include "pem/sorting.hpp"

namespace pem {

std::string_view to_string(Experiment e) {
  switch (e) {
    case Experiment::Sort: return "sort";
    case Experiment::Permute: return "permute";
    case Experiment::Pn: return "pn";
    case Experiment::ListRank: return "listrank";
    case Experiment::Gif: return "gif";
  }
  return "?";
}

Experiment parse_experiment(std::string_view name) {
  for (Experiment e : {Experiment::Sort, Experiment::Permute, Experiment::Pn, Experiment::ListRank,
                       Experiment::Gif})
    if (to_string(e) == name) return e;
  throw Error(ErrorCode::ParseError, "unknown experiment '" + std::string(name) + "'");
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_number(const std::string& s) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw Error(ErrorCode::ParseError, "bad number '" + s + "'");
  return v;
}

std::vector<std::size_t> parse_list(const std::string& value) {
  std::vector<std::size_t> out;
  std::istringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number(item));
  }
  return out;
}

std::vector<std::size_t> random_labels(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i / 2 + 1;
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

double formula_for(Experiment e, const MachineConfig& c) {
  CostParams cp{double(c.N), double(c.P), double(c.M), double(c.B)};
  switch (e) {
    case Experiment::Sort: return eval_sort_cost(cp);
    case Experiment::Permute:
    case Experiment::Pn: return eval_perm_cost(cp);
    case Experiment::ListRank: return eval_listrank_cost(cp);
    case Experiment::Gif: return eval_gif_reference(cp);
  }
  return 0;
}

std::uint64_t run_experiment(Experiment e, const MachineConfig& config, std::uint64_t seed,
                             MachineOptions options) {
  std::mt19937_64 rng(seed);
  const std::size_t n = config.N;
  switch (e) {
    case Experiment::Sort: {
      std::vector<std::uint64_t> keys(n);
      for (auto& k : keys) k = rng() % (4 * n);
      MachineState state(config, std::vector<Payload>(n), options);
      Layout out = pem_merge_sort(state, [&](const Atom& a) { return keys[a.id]; });
      auto ids = layout_atoms(state, out);
      for (std::size_t i = 1; i < ids.size(); ++i)
        if (keys[ids[i - 1]] > keys[ids[i]] || (keys[ids[i - 1]] == keys[ids[i]] && ids[i - 1] > ids[i]))
          throw Error(ErrorCode::IncompleteEvaluation, "output not stably sorted");
      if (ids.size() != n) throw Error(ErrorCode::IncompleteEvaluation, "atoms lost");
      return state.io_count();
    }
    case Experiment::Permute: {
      std::vector<std::size_t> target(n);
      std::iota(target.begin(), target.end(), 0);
      std::shuffle(target.begin(), target.end(), rng);
      MachineState state(config, std::vector<Payload>(n), options);
      Layout out = pem_permute(state, target);
      auto ids = layout_atoms(state, out);
      for (std::size_t i = 0; i < n; ++i)
        if (ids.at(target[i]) != i) throw Error(ErrorCode::IncompleteEvaluation, "atom misplaced");
      return state.io_count();
    }
    case Experiment::Pn: {
      auto labels = random_labels(n, rng);
      MachineState state(config, std::vector<Payload>(n), options);
      auto blocks = solve_proximate_neighbors(state, labels);
      if (!pairs_co_blocked(blocks, labels)) throw Error(ErrorCode::IncompleteEvaluation, "pair split");
      return state.io_count();
    }
    case Experiment::ListRank: {
      auto succ = random_list(n, seed);
      auto result = rank_list(config, succ, seed, options);
      if (result.ranks != sequential_rank_oracle(succ))
        throw Error(ErrorCode::IncompleteEvaluation, "ranks differ from the oracle");
      return result.io_count;
    }
    case Experiment::Gif: {
      unsigned exponent = 0;
      while ((std::size_t{1} << exponent) < n) ++exponent;
      GifGame game(generate_gif_instance(exponent, seed), options);
      GifRun run = omniscient_reference_solver(game);
      if (!run.solved) throw Error(ErrorCode::IncompleteEvaluation, "no atom [0, N]");
      if (!run.guide.ok()) throw Error(ErrorCode::IncompleteEvaluation, "guide audit failed");
      if (run.quadrupling_violations) throw Error(ErrorCode::IncompleteEvaluation, "quadrupling audit failed");
      return run.io_count;
    }
  }
  return 0;
}

}  // namespace

SweepSpec parse_sweep_spec(std::istream& in) {
  SweepSpec spec;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "experiment") {
      spec.experiment = parse_experiment(value);
    } else if (key == "N") {
      spec.N = parse_list(value);
    } else if (key == "P") {
      spec.P = parse_list(value);
    } else if (key == "M") {
      spec.M = parse_list(value);
    } else if (key == "B") {
      spec.B = parse_list(value);
    } else if (key == "seeds") {
      spec.seeds = parse_number(value);
    } else if (key == "seed") {
      spec.first_seed = parse_number(value);
    } else if (key == "normalized") {
      spec.normalized = value == "true" || value == "1";
    } else {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  return spec;
}

SweepRow run_cell(Experiment e, MachineConfig config, std::uint64_t seed, bool normalized) {
  if (e == Experiment::Gif) {
    std::size_t root = std::llround(std::sqrt(double(config.N)));
    config.P = config.M = root;
    config.B = root / 2;
  }
  SweepRow row;
  row.experiment = to_string(e);
  row.N = config.N;
  row.P = config.P;
  row.M = config.M;
  row.B = config.B;
  row.seed = seed;
  try {
    config.validate();
    if (e == Experiment::Pn && config.N % 2 != 0)
      throw Error(ErrorCode::ConfigError, "N must be even");
    row.formula = formula_for(e, config);
    row.measured_ios = run_experiment(e, config, seed, MachineOptions{normalized, TraceMode::Off});
    row.ratio = row.formula > 0 ? double(row.measured_ios) / row.formula : 0;
  } catch (const std::exception& ex) {
    row.error = ex.what();
  }
  return row;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  std::vector<SweepRow> rows;
  const std::vector<std::size_t> one{0};
  const bool gif = spec.experiment == Experiment::Gif;
  for (std::size_t n : spec.N)
    for (std::size_t p : gif ? one : spec.P)
      for (std::size_t m : gif ? one : spec.M)
        for (std::size_t b : gif ? one : spec.B)
          for (std::size_t s = 0; s < spec.seeds; ++s)
            rows.push_back(run_cell(spec.experiment, MachineConfig{p, m, b, n}, spec.first_seed + s,
                                    spec.normalized));
  return rows;
}

void write_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "experiment,N,P,M,B,seed,measured_ios,formula,ratio,error\n";
  std::ostringstream line;
  line << std::setprecision(10);
  for (const auto& r : rows) {
    line.str({});
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    line << r.experiment << ',' << r.N << ',' << r.P << ',' << r.M << ',' << r.B << ',' << r.seed << ','
         << r.measured_ios << ',' << r.formula << ',' << r.ratio << ',' << err << '\n';
    out << line.str();
  }
}

FitResult fit_scaling(const std::vector<SweepRow>& rows, FitModel model) {
  std::vector<std::pair<double, double>> pts;  // (formula, measured)
  for (const auto& r : rows)
    if (r.error.empty() && r.formula > 0) pts.emplace_back(r.formula, double(r.measured_ios));
  if (pts.size() < 3) throw Error(ErrorCode::InsufficientData, "a fit needs at least 3 rows");

  FitResult fit;
  if (model == FitModel::Proportional) {
    fit.model = "proportional";
    double fy = 0, ff = 0;
    for (auto [f, y] : pts) {
      fy += f * y;
      ff += f * f;
    }
    fit.constant = fy / ff;
  } else {
    fit.model = "affine";
    const double k = double(pts.size());
    double sf = 0, sy = 0, sff = 0, sfy = 0;
    for (auto [f, y] : pts) {
      sf += f;
      sy += y;
      sff += f * f;
      sfy += f * y;
    }
    const double den = k * sff - sf * sf;
    fit.constant = den != 0 ? (k * sfy - sf * sy) / den : 0;
    fit.intercept = (sy - fit.constant * sf) / k;
  }
  fit.min_ratio = std::numeric_limits<double>::infinity();
  fit.max_ratio = -std::numeric_limits<double>::infinity();
  for (auto [f, y] : pts) {
    double r = y / (fit.intercept + fit.constant * f);
    fit.min_ratio = std::min(fit.min_ratio, r);
    fit.max_ratio = std::max(fit.max_ratio, r);
  }
  return fit;
}

}  // namespace pem
