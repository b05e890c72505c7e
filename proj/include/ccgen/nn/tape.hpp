#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "ccgen/nn/tensor.hpp"

namespace ccgen::nn {

// Reverse-mode autodiff over row-major matrices.
//
// Every operation appends a node holding its forward value and a backward
// rule. Nodes only reference earlier nodes, so reverse insertion order is a
// valid topological order for backpropagation.
template <typename T>
class Tape {
 public:
  using Mat = Matrix<T>;
  struct Var {
    std::size_t id = 0;
  };
  // Called with the tape and the node's own id; reads grad(self) and
  // accumulates into the gradients of its inputs.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(const ParamStore<T>* params = nullptr) : params_(params) {
    if (params_) param_nodes_.assign(params_->size(), kNone);
  }

  Var constant(Mat value);
  // Leaf bound to a parameter; repeated calls return the same node.
  Var param(std::size_t index);
  Var param(std::string_view name) { return param(params().index(name)); }

  // Registers a custom operation. Inputs must already be on the tape; an input
  // id at or after the new node would make the computation cyclic and throws
  // std::logic_error.
  Var record(Mat value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Mat& value(Var v) const { return nodes_.at(v.id).value; }
  const Mat& value(std::size_t id) const { return nodes_[id].value; }
  T scalar(Var v) const;
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of a node, zero-initialized on first access.
  Mat& grad(std::size_t id);
  std::size_t node_count() const { return nodes_.size(); }

  // --- primitives --------------------------------------------------------
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  // a is (n x k), bias is (1 x k), broadcast over rows.
  Var add_bias(Var a, Var bias);
  Var mul(Var a, Var b);
  Var one_minus(Var a);
  Var sigmoid(Var a);
  Var tanh(Var a);
  // Row-wise, max-subtracted.
  Var softmax(Var a);
  // Gathers rows of table; id 0 (PAD) yields a zero row with no gradient.
  Var embedding(Var table, std::span<const int> ids);
  Var concat_cols(Var a, Var b);
  // First n rows.
  Var top_rows(Var a, std::size_t n);
  // Row r is taken from a when mask[r] != 0, otherwise from b.
  Var blend_rows(std::span<const std::uint8_t> mask, Var a, Var b);
  Var sum(Var a);
  Var scale(Var a, T factor);
  // factor * sum over rows r with targets[r] != ignore of -log softmax(logits_r)[targets[r]].
  Var cross_entropy(Var logits, std::span<const int> targets, T factor, int ignore = -1);
  // factor * sum of elementwise binary cross-entropy between sigmoid(logits) and targets.
  Var sigmoid_cross_entropy(Var logits, const Mat& targets, T factor);

  // Backpropagates from a 1x1 loss node.
  void backward(Var loss);

  // Parameter gradients aligned with the bound ParamStore; parameters the
  // loss does not reach get zeros.
  ParamStore<T> gradients() const;
  void accumulate_gradients(ParamStore<T>& into) const;

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  struct Node {
    Mat value;
    Mat grad;
    bool has_grad = false;
    bool needs_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };

  const ParamStore<T>& params() const {
    if (!params_) throw std::logic_error("tape has no bound parameters");
    return *params_;
  }
  Var push(Mat value, std::vector<std::size_t> inputs, BackwardFn backward);
  void check_same_shape(Var a, Var b, const char* op) const;

  const ParamStore<T>* params_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<std::size_t> param_nodes_;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace ccgen::nn
