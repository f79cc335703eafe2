#pragma once

#include <cstddef>

namespace pem {

struct CostParams {
  double N = 1;
  double P = 1;
  double M = 2;
  double B = 1;

  // max{2, min{M/B, N/(PB)}}, real valued.
  double d() const;
  // d rounded down to an integer fan-in, at least 2.
  std::size_t fan_in() const;
};

// max{1, log x / log base}.
double bar_log(double x, double base = 2.0);

double eval_perm_cost(const CostParams& c);
double eval_sort_cost(const CostParams& c);
// Sorting plus log P * bar_log(B / log P); the second term is dropped when
// B < log P and vanishes for a single processor.
double eval_listrank_cost(const CostParams& c);
// log2(N)^2, the reference curve for the interval fusion game.
double eval_gif_reference(const CostParams& c);

}  // namespace pem
