#pragma once

#include "hirs/tensor.hpp"

#include <functional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace hirs {

/// A trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    grad = Tensor::Zero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Index size() const { return value.size(); }
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

enum class Mode { Train, Eval };

/// Dynamic reverse-mode tape. Rebuilt for every forward pass; nodes are kept in
/// creation order, which is a topological order of the computation.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var scalar(double v);
  /// Leaf bound to a parameter; backward adds into `p.grad`.
  Var param(Parameter& p);

  /// Records a node. `parents` are only used to decide whether the node needs
  /// a gradient; `fn` must accumulate into each parent via `accumulate`.
  Var record(const char* op, Tensor value, std::initializer_list<Var> parents, Backward fn);
  /// Records a parentless node that still needs its gradient (e.g. an embedding lookup).
  Var record_leaf(const char* op, Tensor value, Backward fn);

  /// Propagates d(loss)/d(node) to every reachable node and parameter.
  void backward(Var loss);

  const Tensor& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  /// Gradient of the last backward() w.r.t. node; zeros if unreached.
  Tensor grad(Var v) const;

  template <typename Expr>
  void accumulate(int id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
    if constexpr (std::is_base_of_v<Eigen::ArrayBase<Expr>, Expr>) {
      n.grad += g.matrix();
    } else {
      n.grad += g;
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Backward fn;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. All take and return Var; shapes are checked and
// violations raise ShapeError naming the op.
// ---------------------------------------------------------------------------

Var matmul(Var a, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var mul(Var a, Var b);  // element-wise
Var add_row(Var a, Var row);  // broadcast a 1xC row over every row of a
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var add_const(Var a, const Tensor& c);
Var concat_cols(Var a, Var b);
Var sum(Var a);   // -> 1x1
Var mean(Var a);  // -> 1x1
Var row_sum(Var a);  // -> Nx1
Var sigmoid(Var a);
Var relu(Var a);
/// Gradient is 1 strictly inside (lo, hi) and 0 elsewhere, including the bounds.
Var clamp(Var a, double lo, double hi);
Var log(Var a);
/// Inverted dropout: train mode scales kept entries by 1/(1-p); eval mode is the identity.
Var dropout(Var a, double p, Mode mode, std::mt19937_64& rng);
/// Row-wise bilinear form: out[n] = left[n] * W * right[n]^T, shape Nx1.
Var bilinear(Var left, Var w, Var right);
/// Mean binary cross-entropy of sigmoid(logits) against targets, computed stably.
Var bce_with_logits(Var logits, std::span<const double> targets);
Var mse(Var pred, std::span<const double> targets);
Var detach(Var a);

Var gather_rows(Var a, std::span<const Index> rows);
/// Embedding lookup straight from a parameter table; backward scatters into `table.grad`.
Var gather_rows(Tape& tape, Parameter& table, std::span<const Index> rows);
Var scale_rows(Var a, std::span<const double> w);
Var div_rows(Var a, Var denom);  // a[i,:] / denom[i]

Var segment_sum(Var a, const Segments& seg);
Var segment_mean(Var a, const Segments& seg);
/// Copies row n of a (BxC) to every row of segment n.
Var expand_segments(Var a, const Segments& seg);
/// Block n of the result is G_n^T X_n, with G_n the segment-n rows of g (N x k).
/// Output is (B*k) x C.
Var segment_tmatmul(Var g, Var x, const Segments& seg);
/// Block n of the result is G_n H_n with H_n the k rows of h for sample n. Output N x C.
Var segment_matmul(Var g, Var h, const Segments& seg);

inline Var affine(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

}  // namespace hirs
