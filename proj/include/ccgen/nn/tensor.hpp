#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ccgen/common.hpp"

namespace ccgen::nn {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Dense tensor of rank 1 or 2. Rank-1 tensors are stored as a single row so
// every tensor can be used directly as an Eigen matrix.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  Matrix<T> data;

  static Tensor zeros(std::vector<std::size_t> shape) {
    if (shape.empty() || shape.size() > 2) throw std::invalid_argument("Tensor: rank must be 1 or 2");
    Tensor t;
    t.shape = std::move(shape);
    const auto rows = t.shape.size() == 1 ? std::size_t{1} : t.shape[0];
    const auto cols = t.shape.back();
    t.data = Matrix<T>::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    return t;
  }

  std::size_t size() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }
  std::size_t rows() const { return static_cast<std::size_t>(data.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(data.cols()); }
  T* raw() { return data.data(); }
  const T* raw() const { return data.data(); }

  bool all_finite() const { return data.allFinite(); }
};

// Named tensors with a stable, insertion-defined iteration order.
template <typename T>
class ParamStore {
 public:
  std::size_t add(std::string name, std::vector<std::size_t> shape) {
    if (contains(name)) throw ValidationError("parameter '" + name + "' already exists");
    names_.push_back(std::move(name));
    tensors_.push_back(Tensor<T>::zeros(std::move(shape)));
    return tensors_.size() - 1;
  }

  std::size_t size() const { return tensors_.size(); }
  bool empty() const { return tensors_.empty(); }

  bool contains(std::string_view name) const {
    for (const auto& n : names_) {
      if (n == name) return true;
    }
    return false;
  }

  std::size_t index(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return i;
    }
    throw ValidationError("unknown parameter '" + std::string(name) + "'");
  }

  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }

  Tensor<T>& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return tensors_[i]; }
  Tensor<T>& at(std::string_view name) { return tensors_[index(name)]; }
  const Tensor<T>& at(std::string_view name) const { return tensors_[index(name)]; }

  // Same names and shapes, all zeros (gradient buffers, optimizer moments).
  ParamStore zeros_like() const {
    ParamStore out;
    for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], tensors_[i].shape);
    return out;
  }

  void set_zero() {
    for (auto& t : tensors_) t.data.setZero();
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (std::size_t i = 0; i < size(); ++i) {
      out.add(names_[i], tensors_[i].shape);
      out[i].data = tensors_[i].data.template cast<U>();
    }
    return out;
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& t : tensors_) {
      if (!t.all_finite()) return false;
    }
    return true;
  }

  bool same_layout(const ParamStore& other) const {
    if (other.size() != size()) return false;
    for (std::size_t i = 0; i < size(); ++i) {
      if (other.names_[i] != names_[i] || other.tensors_[i].shape != tensors_[i].shape) return false;
    }
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
};

}  // namespace ccgen::nn
