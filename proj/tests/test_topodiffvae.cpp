#include "doctest.h"

#include <cmath>
#include <numeric>

#include "l2g/error.hpp"
#include "l2g/topodiffvae.hpp"
#include "support.hpp"

using namespace l2g;

namespace {

VaeDims small_dims(int m = 6) {
  VaeDims d;
  d.num_nodes = m;
  d.nhid = 8;
  d.nhid2 = 24;
  d.emb_out = 5;
  d.nlatent = 3;
  return d;
}

Matrix random_graph(int m, std::uint64_t seed) {
  Rng rng(seed);
  std::bernoulli_distribution coin(0.4);
  Matrix a = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) a(i, j) = a(j, i) = coin(rng) ? 1.0 : 0.0;
  return a;
}

// Direct evaluation of mean_nodes(relu(A relu(A d h0^T) H1)).
Vector embed_oracle(const Matrix& a, const VaeParams& p) {
  const Vector d = a.rowwise().sum();
  const Matrix h1 = ((a * d) * p.gcn_h0).cwiseMax(0.0);
  const Matrix h2 = (a * h1 * p.gcn_H1).cwiseMax(0.0);
  return h2.colwise().mean().transpose();
}

}  // namespace

TEST_CASE("graph embedding matches direct evaluation") {
  const auto p = VaeParams::init(small_dims(), 3);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Matrix a = random_graph(6, s);
    CHECK((gcn_embed(a, p) - embed_oracle(a, p)).cwiseAbs().maxCoeff() < 1e-13);
  }
  CHECK(gcn_embed(Matrix::Zero(6, 6), p).isZero(0.0));
}

TEST_CASE("graph embedding is invariant to node relabelling") {
  const auto p = VaeParams::init(small_dims(7), 4);
  std::vector<int> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    const Matrix a = random_graph(7, 10 + rep);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix b(7, 7);
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j) b(i, j) = a(perm[i], perm[j]);
    CHECK((gcn_embed(a, p) - gcn_embed(b, p)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("encoder sees only the topological difference") {
  const auto p = VaeParams::init(small_dims(), 6);
  const Matrix a = random_graph(6, 1), b = random_graph(6, 2);
  const auto same_a = encode(a, a, p);
  const auto same_b = encode(b, b, p);
  CHECK((same_a.mu - same_b.mu).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((same_a.sigma - same_b.sigma).cwiseAbs().maxCoeff() < 1e-14);

  ad::Tape t;
  const auto vars = VaeVars::bind(t, p, false);
  const Vector forward = (vae::embed(vars, b) - vae::embed(vars, a)).value();
  const Vector backward = (vae::embed(vars, a) - vae::embed(vars, b)).value();
  CHECK((forward + backward).isZero(0.0));
  CHECK(encode(a, b, p).sigma.minCoeff() > 0.0);
}

TEST_CASE("KL divergence closed form") {
  LatentStats s{Vector::Zero(4), Vector::Ones(4)};
  CHECK(kl_divergence(s) == 0.0);
  s.mu[0] = 1.0;
  CHECK(kl_divergence(s) == doctest::Approx(0.5));
  s = LatentStats{Vector::Zero(1), Vector::Constant(1, 2.0)};
  CHECK(kl_divergence(s) == doctest::Approx(0.5 * (4.0 - 1.0 - 2.0 * std::log(2.0))));
  s.sigma[0] = 0.0;
  CHECK_THROWS_AS(kl_divergence(s), ValidationError);
}

TEST_CASE("reparameterised samples have the requested moments") {
  LatentStats s{Vector(2), Vector(2)};
  s.mu << 0.5, -1.0;
  s.sigma << 2.0, 0.1;
  Rng rng(7);
  std::normal_distribution<double> n01;
  const int n = 200000;
  Vector mean = Vector::Zero(2), sq = Vector::Zero(2);
  for (int i = 0; i < n; ++i) {
    Vector eps(2);
    eps << n01(rng), n01(rng);
    const Vector z = sample_latent(s, eps);
    mean += z;
    sq += z.cwiseProduct(z);
  }
  mean /= n;
  const Vector var = sq / n - mean.cwiseProduct(mean);
  CHECK(mean[0] == doctest::Approx(0.5).epsilon(0.03));
  CHECK(mean[1] == doctest::Approx(-1.0).epsilon(0.01));
  CHECK(std::sqrt(var[0]) == doctest::Approx(2.0).epsilon(0.01));
  CHECK(std::sqrt(var[1]) == doctest::Approx(0.1).epsilon(0.01));
}

TEST_CASE("decoder output is nonnegative and starts near the projection") {
  const auto dims = small_dims();
  const auto p = VaeParams::init(dims, 8);
  Rng rng(9);
  for (int rep = 0; rep < 10; ++rep) {
    const Vector r1 = testing::random_vector(dims.edges(), rng);
    const Vector z = testing::random_vector(dims.nlatent, rng);
    const Vector out = decode(r1, z, p);
    CHECK(out.minCoeff() >= 0.0);
    CHECK((decode(r1, Vector::Zero(dims.nlatent), p) - r1.cwiseMax(0.0)).cwiseAbs().maxCoeff() < 0.2);
  }
}

TEST_CASE("train-mode gradient through the decoder matches finite differences") {
  const auto dims = small_dims();
  const auto p = VaeParams::init(dims, 10);
  Rng rng(11);
  Vector r1 = testing::random_vector(dims.edges(), rng);
  // Keep every entry away from the binarisation threshold so the encoder
  // input stays fixed under the perturbation.
  for (auto& x : r1) if (std::abs(x) < 0.05) x = 0.1;
  const Vector eps = testing::random_vector(dims.nlatent, rng);
  const Matrix truth = random_graph(6, 12);

  ad::Tape t;
  const auto vars = VaeVars::bind(t, p, false);
  const ad::Var r = t.variable(r1);
  const auto out = vae::enhance(vars, r, Mode::train, &truth, eps, false, 1e-4);
  t.backward(ad::squared_norm(out.p1));
  const Vector g = t.grad(r);

  const double h = 1e-6;
  for (Eigen::Index k = 0; k < r1.size(); ++k) {
    Vector plus = r1, minus = r1;
    plus[k] += h;
    minus[k] -= h;
    const double fp = enhance(plus, Mode::train, &truth, p, eps).p1.squaredNorm();
    const double fm = enhance(minus, Mode::train, &truth, p, eps).p1.squaredNorm();
    const double num = (fp - fm) / (2 * h);
    CHECK(std::abs(g[k] - num) <= 1e-5 * std::max(1.0, std::abs(num)));
  }
}

TEST_CASE("enhance mode contract") {
  const auto dims = small_dims();
  const auto p = VaeParams::init(dims, 13);
  const Vector r1 = Vector::Constant(dims.edges(), 0.3);
  const Matrix truth = random_graph(6, 1);
  const Vector eps = Vector::Ones(dims.nlatent);
  CHECK_THROWS_AS(enhance(r1, Mode::train, nullptr, p, eps), ContractError);
  CHECK_THROWS_AS(enhance(r1, Mode::infer, &truth, p, eps), ContractError);
  CHECK_THROWS_AS(enhance(r1, Mode::infer, nullptr, p, Vector::Ones(2), true), ConfigError);
  const auto infer = enhance(r1, Mode::infer, nullptr, p, eps);
  CHECK_FALSE(infer.stats.has_value());
  CHECK(infer.p1 == decode(r1, Vector::Zero(dims.nlatent), p));
  CHECK(enhance(r1, Mode::infer, nullptr, p, eps, true).p1 == decode(r1, eps, p));
  const auto train = enhance(r1, Mode::train, &truth, p, eps);
  REQUIRE(train.stats.has_value());
  CHECK(train.p1 == decode(r1, sample_latent(*train.stats, eps), p));
}

TEST_CASE("parameter shapes are checked") {
  auto p = VaeParams::init(small_dims(), 14);
  CHECK_NOTHROW(p.check_shapes());
  CHECK(p.named().size() == 14);
  p.dec2.bias = Matrix::Zero(3, 1);
  CHECK_THROWS_AS(p.check_shapes(), ConfigError);
  VaeDims bad = small_dims();
  bad.nlatent = 0;
  CHECK_THROWS_AS(VaeParams::init(bad, 0), ConfigError);
}
