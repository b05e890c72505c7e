#include "ccgen/nn/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ccgen::nn {

namespace {

// Tapes allocate and free many mid-sized matrices per step. With glibc's
// default thresholds those go through mmap or get trimmed back to the OS on
// every batch, and page faults dominate the run time.
#if defined(__GLIBC__)
[[maybe_unused]] const bool allocator_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  mallopt(M_TOP_PAD, 64 << 20);
  return true;
}();
#endif

std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

}  // namespace

template <typename T>
typename Tape<T>::Var Tape<T>::push(Mat value, std::vector<std::size_t> inputs, BackwardFn backward) {
  if (!value.allFinite()) throw DivergenceError("tape: non-finite value produced");
  Node n;
  n.value = std::move(value);
  for (auto i : inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
  n.inputs = std::move(inputs);
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
typename Tape<T>::Var Tape<T>::constant(Mat value) {
  return push(std::move(value), {}, nullptr);
}

template <typename T>
typename Tape<T>::Var Tape<T>::param(std::size_t index) {
  const auto& store = params();
  if (index >= store.size()) throw std::out_of_range("tape: parameter index out of range");
  if (param_nodes_[index] != kNone) return Var{param_nodes_[index]};
  Node n;
  n.value = store[index].data;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  param_nodes_[index] = nodes_.size() - 1;
  return Var{nodes_.size() - 1};
}

template <typename T>
typename Tape<T>::Var Tape<T>::record(Mat value, std::vector<std::size_t> inputs, BackwardFn backward) {
  for (auto i : inputs) {
    if (i >= nodes_.size()) {
      throw std::logic_error("tape: input node " + std::to_string(i) + " is not recorded before node " +
                             std::to_string(nodes_.size()) + " (cycle)");
    }
  }
  return push(std::move(value), std::move(inputs), std::move(backward));
}

template <typename T>
T Tape<T>::scalar(Var v) const {
  const auto& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw std::invalid_argument("tape: scalar() on non-scalar node");
  return m(0, 0);
}

template <typename T>
typename Tape<T>::Mat& Tape<T>::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

template <typename T>
void Tape<T>::check_same_shape(Var a, Var b, const char* op) const {
  const auto& x = value(a);
  const auto& y = value(b);
  if (x.rows() != y.rows() || x.cols() != y.cols()) {
    throw std::invalid_argument(std::string("tape::") + op + ": shape mismatch " + shape_str(x.rows(), x.cols()) +
                                " vs " + shape_str(y.rows(), y.cols()));
  }
}

template <typename T>
typename Tape<T>::Var Tape<T>::matmul(Var a, Var b) {
  const auto& x = value(a);
  const auto& y = value(b);
  if (x.cols() != y.rows()) {
    throw std::invalid_argument("tape::matmul: shape mismatch " + shape_str(x.rows(), x.cols()) + " * " +
                                shape_str(y.rows(), y.cols()));
  }
  Mat out(x.rows(), y.cols());
  out.noalias() = x * y;
  const auto ia = a.id, ib = b.id;
  return push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia).noalias() += g * t.value(ib).transpose();
    if (t.needs_grad(ib)) t.grad(ib).noalias() += t.value(ia).transpose() * g;
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::add(Var a, Var b) {
  check_same_shape(a, b, "add");
  Mat out = value(a) + value(b);
  const auto ia = a.id, ib = b.id;
  return push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia) += g;
    if (t.needs_grad(ib)) t.grad(ib) += g;
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::add_bias(Var a, Var bias) {
  const auto& x = value(a);
  const auto& b = value(bias);
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw std::invalid_argument("tape::add_bias: bias " + shape_str(b.rows(), b.cols()) + " for input " +
                                shape_str(x.rows(), x.cols()));
  }
  Mat out = x.rowwise() + b.row(0);
  const auto ia = a.id, ib = bias.id;
  return push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia) += g;
    if (t.needs_grad(ib)) t.grad(ib) += g.colwise().sum();
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::mul(Var a, Var b) {
  check_same_shape(a, b, "mul");
  Mat out = value(a).cwiseProduct(value(b));
  const auto ia = a.id, ib = b.id;
  return push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia) += g.cwiseProduct(t.value(ib));
    if (t.needs_grad(ib)) t.grad(ib) += g.cwiseProduct(t.value(ia));
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::one_minus(Var a) {
  Mat out = (T(1) - value(a).array()).matrix();
  const auto ia = a.id;
  return push(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    if (t.needs_grad(ia)) t.grad(ia) -= t.grad(self);
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::sigmoid(Var a) {
  Mat out = (T(1) / (T(1) + (-value(a).array()).exp())).matrix();
  const auto ia = a.id;
  return push(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const auto y = t.value(self).array();
    t.grad(ia).array() += t.grad(self).array() * y * (T(1) - y);
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::tanh(Var a) {
  Mat out = value(a).array().tanh().matrix();
  const auto ia = a.id;
  return push(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const auto y = t.value(self).array();
    t.grad(ia).array() += t.grad(self).array() * (T(1) - y.square());
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::softmax(Var a) {
  const auto& x = value(a);
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T mx = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - mx).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  const auto ia = a.id;
  return push(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.needs_grad(ia)) return;
    const Mat& y = t.value(self);
    const Mat& g = t.grad(self);
    Mat& gx = t.grad(ia);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const T dot = g.row(r).dot(y.row(r));
      gx.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::embedding(Var table, std::span<const int> ids) {
  const auto& w = value(table);
  Mat out = Mat::Zero(static_cast<Eigen::Index>(ids.size()), w.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const int id = ids[r];
    if (id < 0 || id >= w.rows()) {
      throw std::invalid_argument("tape::embedding: id " + std::to_string(id) + " outside table of " +
                                  std::to_string(w.rows()) + " rows");
    }
    if (id != 0) out.row(static_cast<Eigen::Index>(r)) = w.row(id);
  }
  const auto it = table.id;
  std::vector<int> idv(ids.begin(), ids.end());
  return push(std::move(out), {it}, [it, idv = std::move(idv)](Tape& t, std::size_t self) {
    if (!t.needs_grad(it)) return;
    const Mat& g = t.grad(self);
    Mat& gw = t.grad(it);
    for (std::size_t r = 0; r < idv.size(); ++r) {
      if (idv[r] != 0) gw.row(idv[r]) += g.row(static_cast<Eigen::Index>(r));
    }
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::concat_cols(Var a, Var b) {
  const auto& x = value(a);
  const auto& y = value(b);
  if (x.rows() != y.rows()) throw std::invalid_argument("tape::concat_cols: row mismatch");
  Mat out(x.rows(), x.cols() + y.cols());
  out << x, y;
  const auto ia = a.id, ib = b.id;
  const auto ca = x.cols(), cb = y.cols();
  return push(std::move(out), {ia, ib}, [ia, ib, ca, cb](Tape& t, std::size_t self) {
    const Mat& g = t.grad(self);
    if (t.needs_grad(ia)) t.grad(ia) += g.leftCols(ca);
    if (t.needs_grad(ib)) t.grad(ib) += g.rightCols(cb);
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::top_rows(Var a, std::size_t n) {
  const auto& x = value(a);
  if (static_cast<Eigen::Index>(n) > x.rows()) throw std::invalid_argument("tape::top_rows: n exceeds rows");
  Mat out = x.topRows(static_cast<Eigen::Index>(n));
  const auto ia = a.id;
  return push(std::move(out), {ia}, [ia, n](Tape& t, std::size_t self) {
    if (t.needs_grad(ia)) t.grad(ia).topRows(static_cast<Eigen::Index>(n)) += t.grad(self);
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::blend_rows(std::span<const std::uint8_t> mask, Var a, Var b) {
  check_same_shape(a, b, "blend_rows");
  const auto& x = value(a);
  const auto& y = value(b);
  if (static_cast<Eigen::Index>(mask.size()) != x.rows()) throw std::invalid_argument("tape::blend_rows: mask size");
  Mat out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) out.row(r) = mask[static_cast<std::size_t>(r)] ? x.row(r) : y.row(r);
  const auto ia = a.id, ib = b.id;
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return push(std::move(out), {ia, ib}, [ia, ib, m = std::move(m)](Tape& t, std::size_t self) {
    const Mat& g = t.grad(self);
    const bool ga = t.needs_grad(ia), gb = t.needs_grad(ib);
    for (std::size_t r = 0; r < m.size(); ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      if (m[r]) {
        if (ga) t.grad(ia).row(row) += g.row(row);
      } else if (gb) {
        t.grad(ib).row(row) += g.row(row);
      }
    }
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::sum(Var a) {
  Mat out(1, 1);
  out(0, 0) = value(a).sum();
  const auto ia = a.id;
  return push(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    if (t.needs_grad(ia)) t.grad(ia).array() += t.grad(self)(0, 0);
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::scale(Var a, T factor) {
  Mat out = value(a) * factor;
  const auto ia = a.id;
  return push(std::move(out), {ia}, [ia, factor](Tape& t, std::size_t self) {
    if (t.needs_grad(ia)) t.grad(ia) += t.grad(self) * factor;
  });
}

template <typename T>
typename Tape<T>::Var Tape<T>::cross_entropy(Var logits, std::span<const int> targets, T factor, int ignore) {
  const auto& z = value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != z.rows()) {
    throw std::invalid_argument("tape::cross_entropy: targets/rows mismatch");
  }
  Mat probs(z.rows(), z.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int tgt = targets[static_cast<std::size_t>(r)];
    const T mx = z.row(r).maxCoeff();
    probs.row(r) = (z.row(r).array() - mx).exp().matrix();
    const T denom = probs.row(r).sum();
    probs.row(r) /= denom;
    if (tgt == ignore) continue;
    if (tgt < 0 || tgt >= z.cols()) throw std::invalid_argument("tape::cross_entropy: target out of range");
    total += static_cast<double>(mx + std::log(denom) - z(r, tgt));
  }
  Mat out(1, 1);
  out(0, 0) = static_cast<T>(total * static_cast<double>(factor));
  std::vector<int> tg(targets.begin(), targets.end());
  const auto il = logits.id;
  return push(std::move(out), {il},
              [il, factor, ignore, tg = std::move(tg), probs = std::move(probs)](Tape& t, std::size_t self) {
                if (!t.needs_grad(il)) return;
                const T g = t.grad(self)(0, 0) * factor;
                Mat& gz = t.grad(il);
                for (std::size_t r = 0; r < tg.size(); ++r) {
                  if (tg[r] == ignore) continue;
                  const auto row = static_cast<Eigen::Index>(r);
                  gz.row(row) += g * probs.row(row);
                  gz(row, tg[r]) -= g;
                }
              });
}

template <typename T>
typename Tape<T>::Var Tape<T>::sigmoid_cross_entropy(Var logits, const Mat& targets, T factor) {
  const auto& z = value(logits);
  if (targets.rows() != z.rows() || targets.cols() != z.cols()) {
    throw std::invalid_argument("tape::sigmoid_cross_entropy: shape mismatch");
  }
  const auto za = z.array();
  // max(z, 0) - z*y + log(1 + exp(-|z|))
  const auto loss = za.max(T(0)) - za * targets.array() + (T(1) + (-za.abs()).exp()).log();
  Mat out(1, 1);
  out(0, 0) = loss.sum() * factor;
  const auto il = logits.id;
  return push(std::move(out), {il}, [il, factor, targets](Tape& t, std::size_t self) {
    if (!t.needs_grad(il)) return;
    const T g = t.grad(self)(0, 0) * factor;
    const auto p = T(1) / (T(1) + (-t.value(il).array()).exp());
    t.grad(il).array() += g * (p - targets.array());
  });
}

template <typename T>
void Tape<T>::backward(Var loss) {
  const auto& l = value(loss);
  if (l.rows() != 1 || l.cols() != 1) throw std::invalid_argument("tape::backward: loss must be a scalar");
  grad(loss.id)(0, 0) = T(1);
  for (std::size_t k = loss.id + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (!n.has_grad || !n.backward) continue;
    for (auto i : n.inputs) {
      if (i >= k) throw std::logic_error("tape: cycle detected at node " + std::to_string(k));
    }
    n.backward(*this, k);
  }
}

template <typename T>
ParamStore<T> Tape<T>::gradients() const {
  ParamStore<T> g = params().zeros_like();
  accumulate_gradients(g);
  return g;
}

template <typename T>
void Tape<T>::accumulate_gradients(ParamStore<T>& into) const {
  const auto& store = params();
  if (!into.same_layout(store)) throw std::invalid_argument("tape: gradient store layout mismatch");
  for (std::size_t p = 0; p < param_nodes_.size(); ++p) {
    const auto id = param_nodes_[p];
    if (id == kNone || !nodes_[id].has_grad) continue;
    into[p].data += nodes_[id].grad;
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace ccgen::nn
