#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pem/machine.hpp"

namespace pem {

enum class Experiment { Sort, Permute, Pn, ListRank, Gif };

std::string_view to_string(Experiment e);
Experiment parse_experiment(std::string_view name);

// Cartesian grid over N, P, M, B with `seeds` seeds per cell starting at
// `first_seed`. Gif cells only read N and use P = M = sqrt(N), B = M/2.
struct SweepSpec {
  Experiment experiment = Experiment::Sort;
  std::vector<std::size_t> N, P, M, B;
  std::size_t seeds = 1;
  std::uint64_t first_seed = 1;
  bool normalized = false;
};

// Plain `key = value` lines; lists are comma separated; `#` starts a comment.
// Keys: experiment, N, P, M, B, seeds, seed, normalized.
SweepSpec parse_sweep_spec(std::istream& in);

struct SweepRow {
  std::string experiment;
  std::size_t N = 0, P = 0, M = 0, B = 0;
  std::uint64_t seed = 0;
  std::uint64_t measured_ios = 0;
  double formula = 0;
  double ratio = 0;
  std::string error;  // empty when the run and its audits passed
};

// Runs one experiment; failures are reported through `error`.
SweepRow run_cell(Experiment e, MachineConfig config, std::uint64_t seed, bool normalized = false);
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

void write_csv(std::ostream& out, const std::vector<SweepRow>& rows);

enum class FitModel { Proportional, Affine };

struct FitResult {
  std::string model;
  double constant = 0;   // C in C*f or a + C*f
  double intercept = 0;  // a, zero for the proportional model
  double min_ratio = 0;  // measured / fitted
  double max_ratio = 0;
};

// Least squares over the rows without errors, against their formula column.
FitResult fit_scaling(const std::vector<SweepRow>& rows, FitModel model);

}  // namespace pem
