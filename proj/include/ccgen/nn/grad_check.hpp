#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "ccgen/nn/tensor.hpp"

namespace ccgen::nn {

// Evaluates the loss at params. When grads is non-null it must also write the
// analytic gradient there (same layout as params).
using LossFn = std::function<double(const ParamStore<double>& params, ParamStore<double>* grads)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckOptions {
  double eps = 1e-3;
  // Coordinates sampled per parameter tensor; 0 checks every coordinate.
  std::size_t samples_per_param = 0;
  // Relative error is |a - n| / max(|a|, |n|, floor), so gradients that are
  // numerically zero are compared on an absolute scale.
  double floor = 1e-2;
  std::uint64_t seed = 0;
};

// Compares analytic gradients against central differences
// (f(x + eps) - f(x - eps)) / (2 eps) and reports the worst coordinate.
GradCheckResult grad_check(const LossFn& loss, ParamStore<double> params, const GradCheckOptions& options = {});

}  // namespace ccgen::nn
