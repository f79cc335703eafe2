#include "pem/cost_model.hpp"

#include <algorithm>
#include <cmath>

namespace pem {

double CostParams::d() const { return std::max(2.0, std::min(M / B, N / (P * B))); }

std::size_t CostParams::fan_in() const {
  return std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(d())));
}

double bar_log(double x, double base) {
  if (x <= 1.0) return 1.0;
  return std::max(1.0, std::log(x) / std::log(base));
}

double eval_sort_cost(const CostParams& c) { return c.N / (c.P * c.B) * bar_log(c.N / c.B, c.d()); }

double eval_perm_cost(const CostParams& c) { return std::min(c.N / c.P, eval_sort_cost(c)); }

double eval_listrank_cost(const CostParams& c) {
  double sort = eval_sort_cost(c);
  double lg_p = std::log2(c.P);
  if (lg_p <= 0.0 || c.B < lg_p) return sort;
  return sort + lg_p * bar_log(c.B / lg_p);
}

double eval_gif_reference(const CostParams& c) {
  double lg = std::log2(c.N);
  return lg * lg;
}

}  // namespace pem
