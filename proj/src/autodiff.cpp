#include "l2g/autodiff.hpp"

#include <cmath>

#include "l2g/error.hpp"

namespace l2g::ad {

const Matrix& Var::value() const {
  if (!tape_) throw ContractError("autodiff: use of an unbound variable");
  return tape_->value(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

Var Tape::variable(Matrix value) {
  nodes_.push_back({std::move(value), Matrix(), true, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), Matrix(), false, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Pullback pullback) {
  bool needs = false;
  for (const Var& v : inputs) {
    if (v.tape() != this) throw ContractError("autodiff: mixing variables from different tapes");
    needs = needs || v.requires_grad();
  }
  if (backward_done_) throw ContractError("autodiff: tape already differentiated");
  nodes_.push_back({std::move(value), Matrix(), needs, needs ? std::move(pullback) : nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(Var v, const Matrix& contribution) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0)
    n.grad = contribution;
  else
    n.grad += contribution;
}

void Tape::backward(Var root, double seed) {
  if (root.tape() != this) throw ContractError("autodiff: root belongs to another tape");
  if (backward_done_) throw ContractError("autodiff: backward already run on this tape");
  if (root.rows() != 1 || root.cols() != 1) throw ContractError("autodiff: backward needs a scalar root");
  backward_done_ = true;
  accumulate(root, Matrix::Constant(1, 1, seed));
  for (int id = root.id(); id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.pullback || n.grad.size() == 0) continue;
    n.pullback(*this, n.grad);
  }
}

Matrix Tape::grad(Var v) const {
  if (!backward_done_) throw ContractError("autodiff: gradient requested before backward()");
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

namespace {

void same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ConfigError(std::string("autodiff: shape mismatch in ") + op);
}

void is_scalar(Var s, const char* op) {
  if (s.rows() != 1 || s.cols() != 1) throw ConfigError(std::string("autodiff: ") + op + " needs a 1x1 operand");
}

}  // namespace

Var add(Var a, Var b) {
  same_shape(a, b, "add");
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  same_shape(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var neg(Var a) {
  return a.tape()->record(-a.value(), {a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, -g); });
}

Var scale(Var a, double c) {
  return a.tape()->record(c * a.value(), {a}, [a, c](Tape& t, const Matrix& g) { t.accumulate(a, c * g); });
}

Var scalar_mul(Var s, Var a) {
  is_scalar(s, "scalar_mul");
  const double sv = s.value()(0, 0);
  return a.tape()->record(sv * a.value(), {s, a}, [s, a, sv](Tape& t, const Matrix& g) {
    if (s.requires_grad()) t.accumulate(s, Matrix::Constant(1, 1, g.cwiseProduct(a.value()).sum()));
    t.accumulate(a, sv * g);
  });
}

Var cwise_mul(Var a, Var b) {
  same_shape(a, b, "cwise_mul");
  return a.tape()->record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
    if (b.requires_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw ConfigError("autodiff: shape mismatch in matmul");
  return a.tape()->record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

Var transpose(Var a) {
  return a.tape()->record(a.value().transpose(), {a},
                          [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Var element(Var a, Eigen::Index i) {
  if (a.cols() != 1 || i < 0 || i >= a.rows()) throw ConfigError("autodiff: element index out of range");
  return a.tape()->record(Matrix::Constant(1, 1, a.value()(i, 0)), {a}, [a, i](Tape& t, const Matrix& g) {
    Matrix c = Matrix::Zero(a.rows(), 1);
    c(i, 0) = g(0, 0);
    t.accumulate(a, c);
  });
}

Var relu(Var a) {
  return a.tape()->record(a.value().cwiseMax(0.0), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0));
  });
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw ConfigError("softplus_inverse: argument must be > 0");
  // log(exp(y) - 1) = y + log(1 - exp(-y))
  return y + std::log(-std::expm1(-y));
}

Var softplus(Var a) {
  Matrix v = a.value().unaryExpr([](double x) { return softplus(x); });
  return a.tape()->record(std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    const Matrix sig = a.value().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    t.accumulate(a, g.cwiseProduct(sig));
  });
}

Var exp(Var a) {
  Matrix v = a.value().array().exp().matrix();
  Matrix saved = v;
  return a.tape()->record(std::move(v), {a}, [a, saved](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(saved));
  });
}

Var log(Var a) {
  return a.tape()->record(a.value().array().log().matrix(), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseQuotient(a.value()));
  });
}

Var tanh(Var a) {
  Matrix v = a.value().array().tanh().matrix();
  Matrix saved = v;
  return a.tape()->record(std::move(v), {a}, [a, saved](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct((1.0 - saved.array().square()).matrix()));
  });
}

Var square(Var a) {
  return a.tape()->record(a.value().array().square().matrix(), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, 2.0 * g.cwiseProduct(a.value()));
  });
}

Var concat_rows(Var a, Var b) {
  if (a.cols() != b.cols()) throw ConfigError("autodiff: shape mismatch in concat_rows");
  Matrix v(a.rows() + b.rows(), a.cols());
  v << a.value(), b.value();
  const auto ra = a.rows();
  const auto rb = b.rows();
  return a.tape()->record(std::move(v), {a, b}, [a, b, ra, rb](Tape& t, const Matrix& g) {
    if (a.requires_grad()) t.accumulate(a, g.topRows(ra));
    if (b.requires_grad()) t.accumulate(b, g.bottomRows(rb));
  });
}

Var mean_rows(Var a) {
  const double n = double(a.rows());
  return a.tape()->record(a.value().colwise().mean().transpose(), {a}, [a, n](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Ones(a.rows(), 1) * (g.transpose() / n));
  });
}

Var sum(Var a) {
  return a.tape()->record(Matrix::Constant(1, 1, a.value().sum()), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var squared_norm(Var a) {
  return a.tape()->record(Matrix::Constant(1, 1, a.value().squaredNorm()), {a},
                          [a](Tape& t, const Matrix& g) { t.accumulate(a, 2.0 * g(0, 0) * a.value()); });
}

Var degree(Var w, int m) {
  if (w.cols() != 1 || w.rows() != num_edges(m)) throw ConfigError("autodiff: degree shape mismatch");
  return w.tape()->record(degree_apply(Vector(w.value()), m), {w}, [w](Tape& t, const Matrix& g) {
    t.accumulate(w, l2g::degree_adjoint(Vector(g)));
  });
}

Var degree_adjoint(Var v) {
  if (v.cols() != 1) throw ConfigError("autodiff: degree_adjoint needs a column vector");
  const int m = static_cast<int>(v.rows());
  return v.tape()->record(l2g::degree_adjoint(Vector(v.value())), {v}, [v, m](Tape& t, const Matrix& g) {
    t.accumulate(v, degree_apply(Vector(g), m));
  });
}

Var prox_dual(Var r, Var alpha, Var gamma) {
  is_scalar(alpha, "prox_dual");
  is_scalar(gamma, "prox_dual");
  const double a = alpha.value()(0, 0);
  const double c = gamma.value()(0, 0);
  const Matrix s = (r.value().array().square() + 4.0 * a * c).sqrt().matrix();
  Matrix v = 0.5 * (r.value() - s);
  return r.tape()->record(std::move(v), {r, alpha, gamma}, [r, alpha, gamma, a, c, s](Tape& t, const Matrix& g) {
    if (r.requires_grad()) t.accumulate(r, 0.5 * g.cwiseProduct((1.0 - r.value().array() / s.array()).matrix()));
    // d/d alpha = -gamma / s, d/d gamma = -alpha / s
    const double gs = (g.array() / s.array()).sum();
    if (alpha.requires_grad()) t.accumulate(alpha, Matrix::Constant(1, 1, -c * gs));
    if (gamma.requires_grad()) t.accumulate(gamma, Matrix::Constant(1, 1, -a * gs));
  });
}

}  // namespace l2g::ad
