#include "ccgen/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "ccgen/rng.hpp"

namespace ccgen::nn {

GradCheckResult grad_check(const LossFn& loss, ParamStore<double> params, const GradCheckOptions& options) {
  ParamStore<double> analytic = params.zeros_like();
  loss(params, &analytic);

  GradCheckResult result;
  Rng rng(options.seed);
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::size_t n = params[p].size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.samples_per_param > 0 && options.samples_per_param < n) {
      rng.shuffle(coords.begin(), coords.end());
      coords.resize(options.samples_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (auto c : coords) {
      double* x = params[p].raw() + c;
      const double saved = *x;
      *x = saved + options.eps;
      const double up = loss(params, nullptr);
      *x = saved - options.eps;
      const double down = loss(params, nullptr);
      *x = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double a = analytic[p].raw()[c];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++result.checked;
      if (rel > result.max_rel_error || !std::isfinite(rel)) {
        result.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
        result.worst_param = params.name(p);
        result.worst_index = c;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace ccgen::nn
