#include "l2g/graph_core.hpp"

#include <cmath>
#include <string>

namespace l2g {

int num_nodes_for_length(std::int64_t length) {
  // m(m-1)/2 = n  =>  m = (1 + sqrt(1 + 8n)) / 2
  const auto m = static_cast<std::int64_t>(std::llround((1.0 + std::sqrt(1.0 + 8.0 * double(length))) / 2.0));
  if (length < 1 || num_edges(m) != length)
    throw ValidationError("length " + std::to_string(length) + " is not m(m-1)/2 for any m >= 2");
  return static_cast<int>(m);
}

namespace detail {
void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw ValidationError(std::string(what) + " has non-finite entries");
}
}  // namespace detail

EdgeVector halfvec(const Matrix& adjacency) {
  const auto m = adjacency.rows();
  if (m != adjacency.cols()) throw ValidationError("halfvec: matrix is not square");
  if (m < 2) throw ValidationError("halfvec: need at least two nodes");
  Vector w(num_edges(m));
  std::int64_t k = 0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (adjacency(i, i) != 0.0) throw ValidationError("halfvec: nonzero diagonal");
    for (Eigen::Index j = i + 1; j < m; ++j) {
      if (adjacency(i, j) != adjacency(j, i)) throw ValidationError("halfvec: matrix is not symmetric");
      w[k++] = adjacency(i, j);
    }
  }
  return EdgeVector(std::move(w));
}

Matrix unhalfvec(const Vector& w) {
  const int m = num_nodes_for_length(w.size());
  Matrix out = Matrix::Zero(m, m);
  std::int64_t k = 0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      out(i, j) = w[k];
      out(j, i) = w[k];
      ++k;
    }
  return out;
}

Matrix unhalfvec(const EdgeVector& w) { return unhalfvec(w.values()); }

Vector degree_apply(const Vector& w, int m) {
  if (w.size() != num_edges(m)) throw ValidationError("degree_apply: length mismatch");
  Vector d = Vector::Zero(m);
  std::int64_t k = 0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      d[i] += w[k];
      d[j] += w[k];
      ++k;
    }
  return d;
}

Vector degree_adjoint(const Vector& v) {
  const auto m = v.size();
  Vector out(num_edges(m));
  std::int64_t k = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) out[k++] = v[i] + v[j];
  return out;
}

Matrix laplacian(const EdgeVector& w) {
  Matrix adj = unhalfvec(w);
  Matrix lap = -adj;
  lap.diagonal() = adj.rowwise().sum();
  return lap;
}

DistanceVector pairwise_sq_dist(const Matrix& data) {
  if (data.cols() < 1) throw ValidationError("pairwise_sq_dist: need at least one signal");
  if (!data.allFinite()) throw ValidationError("pairwise_sq_dist: non-finite data");
  const auto m = data.rows();
  Vector y(num_edges(m));
  std::int64_t k = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j) y[k++] = (data.row(i) - data.row(j)).squaredNorm();
  return DistanceVector(std::move(y));
}

Matrix binarize(const Vector& w, int m, double eta) {
  if (eta < 0.0) throw ValidationError("binarize: eta must be nonnegative");
  if (w.size() != num_edges(m)) throw ValidationError("binarize: length mismatch");
  Matrix a = Matrix::Zero(m, m);
  std::int64_t k = 0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      if (w[k] > eta) a(i, j) = a(j, i) = 1.0;
      ++k;
    }
  return a;
}

Matrix symmetrize(const Matrix& w) {
  Matrix s = 0.5 * (w + w.transpose());
  s.diagonal().setZero();
  return s;
}

}  // namespace l2g
