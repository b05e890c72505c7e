#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "ccgen/nn/tensor.hpp"
#include "ccgen/rng.hpp"

namespace ccgen::nn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Rescale gradients to this global L2 norm when exceeded; 0 disables.
  double clip_norm = 0.0;
};

// Bias-corrected Adam. Moments are laid out like the parameters.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(const ParamStore<T>& params, AdamConfig config)
      : config_(config), m_(params.zeros_like()), v_(params.zeros_like()) {}

  // Applies one update. A non-finite gradient skips the update entirely,
  // leaves the step count unchanged and returns false.
  bool step(ParamStore<T>& params, const ParamStore<T>& grads) {
    if (!params.same_layout(m_) || !grads.same_layout(m_)) {
      throw std::invalid_argument("adam: parameter/gradient layout mismatch");
    }
    if (!grads.all_finite()) {
      ++skipped_;
      return false;
    }
    double scale = 1.0;
    if (config_.clip_norm > 0.0) {
      double sq = 0.0;
      for (std::size_t i = 0; i < grads.size(); ++i) sq += grads[i].data.template cast<double>().squaredNorm();
      const double norm = std::sqrt(sq);
      if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
    }
    ++steps_;
    const double t = static_cast<double>(steps_);
    const T b1 = static_cast<T>(config_.beta1);
    const T b2 = static_cast<T>(config_.beta2);
    const T c1 = static_cast<T>(1.0 - std::pow(config_.beta1, t));
    const T c2 = static_cast<T>(1.0 - std::pow(config_.beta2, t));
    const T lr = static_cast<T>(config_.lr);
    const T eps = static_cast<T>(config_.epsilon);
    const T s = static_cast<T>(scale);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto g = grads[i].data.array() * s;
      auto m = m_[i].data.array();
      auto v = v_[i].data.array();
      m = b1 * m + (T(1) - b1) * g;
      v = b2 * v + (T(1) - b2) * g.square();
      params[i].data.array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
    }
    return true;
  }

  std::size_t steps() const { return steps_; }
  std::size_t skipped() const { return skipped_; }
  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  const ParamStore<T>& first_moment() const { return m_; }
  const ParamStore<T>& second_moment() const { return v_; }

 private:
  AdamConfig config_;
  ParamStore<T> m_;
  ParamStore<T> v_;
  std::size_t steps_ = 0;
  std::size_t skipped_ = 0;
};

// Glorot-uniform: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_uniform(Tensor<T>& t, Rng& rng) {
  const double fan_in = static_cast<double>(t.rows());
  const double fan_out = static_cast<double>(t.cols());
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  T* p = t.raw();
  for (std::size_t i = 0; i < t.size(); ++i) p[i] = static_cast<T>(rng.uniform(-a, a));
}

// Rank-2 tensors get Glorot-uniform draws, rank-1 tensors (biases) zeros.
// Each tensor has its own stream, so adding a parameter does not shift the
// draws of the others.
template <typename T>
void init_params(ParamStore<T>& params, std::uint64_t seed) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i];
    if (t.shape.size() == 2) {
      Rng rng = Rng::derive(seed, fnv1a64(params.name(i)));
      glorot_uniform(t, rng);
    } else {
      t.data.setZero();
    }
  }
}

}  // namespace ccgen::nn
