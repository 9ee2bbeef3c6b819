#include "doctest.h"

#include <cmath>

#include "l2g/error.hpp"
#include "l2g/graph_core.hpp"
#include "support.hpp"

using namespace l2g;
using testing::random_vector;

TEST_CASE("edge_index follows row-major upper-triangle enumeration") {
  for (int m : {2, 3, 7, 20}) {
    std::int64_t k = 0;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j, ++k) {
        CHECK(edge_index(i, j, m) == k);
        CHECK(edge_index(j, i, m) == k);
      }
    CHECK(k == num_edges(m));
    CHECK(num_nodes_for_length(k) == m);
  }
}

TEST_CASE("num_nodes_for_length rejects non-triangular lengths") {
  CHECK_THROWS_AS(num_nodes_for_length(0), ValidationError);
  CHECK_THROWS_AS(num_nodes_for_length(2), ValidationError);
  CHECK_THROWS_AS(num_nodes_for_length(5), ValidationError);
  CHECK_THROWS_AS(EdgeVector(Vector::Zero(4)), ValidationError);
}

TEST_CASE("halfvec and unhalfvec are inverse") {
  Rng rng(1);
  const Vector w = random_vector(num_edges(9), rng, 0.0, 2.0);
  const Matrix a = unhalfvec(w);
  CHECK(a.isApprox(a.transpose(), 0.0));
  CHECK(a.diagonal().isZero(0.0));
  CHECK(halfvec(a).values() == w);
}

TEST_CASE("halfvec validates its input") {
  Matrix asym = Matrix::Zero(3, 3);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(halfvec(asym), ValidationError);
  Matrix diag = Matrix::Zero(3, 3);
  diag(1, 1) = 1.0;
  CHECK_THROWS_AS(halfvec(diag), ValidationError);
  CHECK_THROWS_AS(halfvec(Matrix::Zero(3, 4)), ValidationError);
  Vector bad = Vector::Zero(3);
  bad[1] = std::nan("");
  CHECK_THROWS_AS(EdgeVector{bad}, ValidationError);
  Vector neg = Vector::Ones(3);
  neg[0] = -1.0;
  CHECK_THROWS_AS(DistanceVector{neg}, ValidationError);
}

TEST_CASE("degree operator matches the dense oracle") {
  Rng rng(2);
  for (int m : {2, 5, 13}) {
    const Matrix s = testing::dense_degree_operator(m);
    const Vector w = random_vector(num_edges(m), rng);
    const Vector v = random_vector(m, rng);
    CHECK((degree_apply(w, m) - s * w).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((degree_adjoint(v) - s.transpose() * v).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((degree_apply(w, m) - unhalfvec(w).rowwise().sum()).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("adjoint identity on random instances") {
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const int m = 2 + rep % 30;
    const Vector w = random_vector(num_edges(m), rng);
    const Vector v = random_vector(m, rng);
    const double lhs = degree_apply(w, m).dot(v);
    const double rhs = w.dot(degree_adjoint(v));
    CHECK(std::abs(lhs - rhs) <= 1e-12);
  }
}

TEST_CASE("Laplacian structure") {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const EdgeVector w(random_vector(num_edges(12), rng, 0.0, 3.0));
    const Matrix l = laplacian(w);
    CHECK(l.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(l.isApprox(l.transpose(), 0.0));
    Eigen::SelfAdjointEigenSolver<Matrix> es(l);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
    const Matrix expected = Matrix(degree_apply(w).asDiagonal()) - unhalfvec(w);
    CHECK((l - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("smoothness term equals the weighted distances") {
  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const int m = 3 + rep % 15;
    const int n = 1 + rep % 7;
    const EdgeVector w(random_vector(num_edges(m), rng, 0.0, 1.0));
    Matrix x(m, n);
    for (auto& e : x.reshaped()) e = std::normal_distribution<double>()(rng);
    const double lhs = (x.transpose() * laplacian(w) * x).trace();
    const double rhs = w.values().dot(pairwise_sq_dist(x).values());
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs)));
    // Ordered-pair sum counts every edge twice.
    const Matrix wm = unhalfvec(w);
    double ordered = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) ordered += wm(i, j) * (x.row(i) - x.row(j)).squaredNorm();
    CHECK(std::abs(ordered - 2.0 * rhs) <= 1e-9 * std::max(1.0, std::abs(ordered)));
  }
}

TEST_CASE("pairwise_sq_dist matches brute force") {
  Matrix x(3, 2);
  x << 0, 0, 3, 4, 1, 1;
  const Vector y = pairwise_sq_dist(x).values();
  CHECK(y[edge_index(0, 1, 3)] == doctest::Approx(25.0));
  CHECK(y[edge_index(0, 2, 3)] == doctest::Approx(2.0));
  CHECK(y[edge_index(1, 2, 3)] == doctest::Approx(13.0));
  CHECK_THROWS_AS(pairwise_sq_dist(Matrix(3, 0)), ValidationError);
}

TEST_CASE("binarize uses a strict threshold") {
  Vector w(3);
  w << 0.0, 1e-4, 2e-4;
  const Matrix a = binarize(w, 3);
  CHECK(a(0, 1) == 0.0);
  CHECK(a(0, 2) == 0.0);
  CHECK(a(1, 2) == 1.0);
  CHECK(a(2, 1) == 1.0);
  CHECK_THROWS_AS(binarize(w, 3, -1.0), ValidationError);
}

TEST_CASE("symmetrize averages and clears the diagonal") {
  Matrix w(2, 2);
  w << 5, 1, 3, 7;
  const Matrix s = symmetrize(w);
  CHECK(s(0, 1) == 2.0);
  CHECK(s(1, 0) == 2.0);
  CHECK(s(0, 0) == 0.0);
}
