#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "l2g/autodiff.hpp"
#include "l2g/error.hpp"
#include "support.hpp"

using namespace l2g;
using ad::Tape;
using ad::Var;

namespace {

using Fn = std::function<Var(Tape&, const std::vector<Var>&)>;

double evaluate(const Fn& f, const std::vector<Matrix>& inputs) {
  Tape t;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(t.constant(m));
  return f(t, vars).value()(0, 0);
}

// Largest relative deviation between tape gradients and central differences.
double gradient_error(const Fn& f, std::vector<Matrix> inputs, double h = 1e-6) {
  Tape t;
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(t.variable(m));
  t.backward(f(t, vars));
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix g = t.grad(vars[k]);
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k].reshaped()[i];
      inputs[k].reshaped()[i] = x0 + h;
      const double fp = evaluate(f, inputs);
      inputs[k].reshaped()[i] = x0 - h;
      const double fm = evaluate(f, inputs);
      inputs[k].reshaped()[i] = x0;
      const double num = (fp - fm) / (2.0 * h);
      const double a = g.reshaped()[i];
      worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-6}));
    }
  }
  return worst;
}

Matrix rand_matrix(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (auto& e : m.reshaped()) e = u(rng);
  return m;
}

}  // namespace

TEST_CASE("elementwise and linear ops match finite differences") {
  Rng rng(21);
  const Matrix a = rand_matrix(4, 3, rng), b = rand_matrix(4, 3, rng), c = rand_matrix(3, 2, rng);
  const Matrix pos = rand_matrix(4, 3, rng, 0.5, 2.0);
  const Matrix s = rand_matrix(1, 1, rng);
  CHECK(gradient_error([](Tape&, auto& v) { return ad::sum(ad::cwise_mul(v[0] + v[1], v[0] - v[1])); }, {a, b}) < 1e-6);
  CHECK(gradient_error([](Tape&, auto& v) { return ad::squared_norm(ad::matmul(v[0], v[1])); }, {a, c}) < 1e-6);
  CHECK(gradient_error([](Tape&, auto& v) { return ad::sum(ad::square(ad::transpose(-v[0]))); }, {a}) < 1e-6);
  CHECK(gradient_error([](Tape&, auto& v) { return ad::sum(ad::scalar_mul(v[1], 2.5 * v[0])); }, {a, s}) < 1e-6);
  CHECK(gradient_error([](Tape&, auto& v) { return ad::sum(ad::cwise_mul(ad::exp(v[0]), ad::tanh(v[0]))); }, {a}) < 1e-6);
  CHECK(gradient_error([](Tape&, auto& v) { return ad::sum(ad::cwise_mul(ad::log(v[0]), ad::softplus(v[0]))); }, {pos}) < 1e-6);
  CHECK(gradient_error([](Tape&, auto& v) { return ad::squared_norm(ad::mean_rows(ad::concat_rows(v[0], v[1]))); }, {a, b}) < 1e-6);
}

TEST_CASE("relu, element and graph ops match finite differences") {
  Rng rng(22);
  Matrix away = rand_matrix(10, 1, rng);
  for (auto& e : away.reshaped()) e += e > 0 ? 0.1 : -0.1;
  CHECK(gradient_error([](Tape&, auto& v) { return ad::squared_norm(ad::relu(v[0])); }, {away}) < 1e-6);
  CHECK(gradient_error([](Tape&, auto& v) { return ad::square(ad::element(v[0], 3)); }, {away}) < 1e-6);
  const Matrix w = rand_matrix(10, 1, rng, 0.1, 1.0);
  const Matrix nodes = rand_matrix(5, 1, rng);
  CHECK(gradient_error([](Tape&, auto& v) { return ad::squared_norm(ad::degree(v[0], 5)); }, {w}) < 1e-6);
  CHECK(gradient_error([](Tape&, auto& v) { return ad::squared_norm(ad::degree_adjoint(v[0])); }, {nodes}) < 1e-6);
  const Matrix alpha = Matrix::Constant(1, 1, 0.7), gamma = Matrix::Constant(1, 1, 0.2);
  CHECK(gradient_error([](Tape&, auto& v) { return ad::sum(ad::prox_dual(v[0], v[1], v[2])); }, {away, alpha, gamma}) < 1e-6);
}

TEST_CASE("relu subgradient at zero is zero") {
  Tape t;
  Var x = t.variable(Matrix::Zero(3, 1));
  t.backward(ad::sum(ad::relu(x)));
  CHECK(t.grad(x).isZero(0.0));
}

TEST_CASE("constants receive no gradient and unreachable leaves get zeros") {
  Tape t;
  Var x = t.variable(Matrix::Ones(2, 1));
  Var unused = t.variable(Matrix::Ones(2, 1));
  Var c = t.constant(Matrix::Ones(2, 1));
  CHECK_FALSE(c.requires_grad());
  CHECK_FALSE(ad::exp(c).requires_grad());
  t.backward(ad::sum(ad::cwise_mul(x, c)));
  CHECK(t.grad(x).isApprox(Matrix::Ones(2, 1)));
  CHECK(t.grad(unused).isZero(0.0));
}

TEST_CASE("fan-out accumulates gradients") {
  Tape t;
  Var x = t.variable(Matrix::Constant(1, 1, 3.0));
  t.backward(ad::cwise_mul(x, x) + x);
  CHECK(t.grad(x)(0, 0) == doctest::Approx(7.0));
}

TEST_CASE("tape contract errors") {
  Tape t;
  Var x = t.variable(Matrix::Ones(2, 1));
  CHECK_THROWS_AS(t.grad(x), ContractError);
  CHECK_THROWS_AS(t.backward(x), ContractError);
  CHECK_THROWS_AS(ad::matmul(x, x), ConfigError);
  Tape other;
  Var y = other.variable(Matrix::Ones(2, 1));
  CHECK_THROWS_AS(ad::add(x, y), ContractError);
  Var root = ad::sum(x);
  t.backward(root);
  CHECK_THROWS_AS(t.backward(root), ContractError);
  CHECK_THROWS_AS(Var().value(), ContractError);
}

TEST_CASE("softplus helpers") {
  for (double x : {-40.0, -1.0, 0.0, 0.3, 50.0}) CHECK(ad::softplus(x) == doctest::Approx(std::log1p(std::exp(x))));
  for (double y : {1e-6, 0.1, 0.5, 3.0, 40.0}) CHECK(ad::softplus(ad::softplus_inverse(y)) == doctest::Approx(y).epsilon(1e-12));
  CHECK_THROWS_AS(ad::softplus_inverse(0.0), ConfigError);
}
