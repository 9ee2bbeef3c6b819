#pragma once

// Record-and-replay reverse-mode differentiation over dense matrices.
//
// Every op appends a node holding its value and a pullback closure. Vectors
// are n x 1 matrices and scalars are 1 x 1. Nodes built only from constants
// carry no pullback and never receive gradient.

#include <functional>
#include <vector>

#include "l2g/graph_core.hpp"

namespace l2g::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const;
  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  explicit operator bool() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using Pullback = std::function<void(Tape&, const Matrix& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is collected.
  Var variable(Matrix value);
  /// Leaf excluded from differentiation.
  Var constant(Matrix value);
  /// Appends an op node. `pullback` is dropped when no input requires grad.
  Var record(Matrix value, std::initializer_list<Var> inputs, Pullback pullback);

  /// Reverse sweep from a 1 x 1 root, seeded with `seed`.
  void backward(Var root, double seed = 1.0);
  bool has_gradients() const { return backward_done_; }

  /// d root / d v; zeros when v is not reachable from the root.
  Matrix grad(Var v) const;

  /// Adds `contribution` to the gradient of `v` (used by pullbacks).
  void accumulate(Var v, const Matrix& contribution);

  const Matrix& value(int id) const { return nodes_[id].value; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Pullback pullback;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double c);
/// Scalar (1 x 1) times matrix.
Var scalar_mul(Var s, Var a);
Var cwise_mul(Var a, Var b);
Var matmul(Var a, Var b);
Var transpose(Var a);
/// Single entry of a column vector as 1 x 1.
Var element(Var a, Eigen::Index i);

/// max(0, x); the subgradient at exactly 0 is 0.
Var relu(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);
Var tanh(Var a);
Var square(Var a);

/// Vertical stack of two matrices with equal column counts.
Var concat_rows(Var a, Var b);
/// Column-wise mean over rows, returned as a column vector.
Var mean_rows(Var a);
Var sum(Var a);
Var squared_norm(Var a);

/// Node degrees of a half-vectorised edge vector on m nodes.
Var degree(Var w, int m);
/// Adjoint of degree(): entry (i, j) is v_i + v_j.
Var degree_adjoint(Var v);

/// (r - sqrt(r^2 + 4 alpha gamma)) / 2 with 1 x 1 alpha and gamma.
Var prox_dual(Var r, Var alpha, Var gamma);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var a) { return scale(a, c); }

/// Numerically stable scalar softplus and its inverse.
double softplus(double x);
double softplus_inverse(double y);

}  // namespace l2g::ad
