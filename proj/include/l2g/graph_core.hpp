#pragma once

// Half-vectorised graph primitives.
//
// Edge ordering is row-major over the strict upper triangle:
//   (0,1), (0,2), ..., (0,m-1), (1,2), ..., (m-2,m-1)
// Every module indexes edge vectors through edge_index()/edge_nodes().

#include <Eigen/Dense>

#include <cstdint>
#include <utility>

#include "l2g/error.hpp"

namespace l2g {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Number of undirected node pairs for m nodes.
constexpr std::int64_t num_edges(std::int64_t m) { return m * (m - 1) / 2; }

/// Inverse of num_edges; throws ValidationError when `length` is not m(m-1)/2
/// for some m >= 2.
int num_nodes_for_length(std::int64_t length);

/// Position of pair (i, j), i != j, in the half-vectorised ordering.
inline std::int64_t edge_index(std::int64_t i, std::int64_t j, std::int64_t m) {
  if (i > j) std::swap(i, j);
  return i * (2 * m - i - 1) / 2 + (j - i - 1);
}

namespace detail {
void require_finite(const Vector& v, const char* what);
}

/// A vector indexed by node pairs. `Tag` distinguishes edge weights from
/// pairwise distances at compile time.
template <class Tag>
class PairVector {
 public:
  PairVector() = default;
  explicit PairVector(Vector values)
      : values_(std::move(values)), num_nodes_(num_nodes_for_length(values_.size())) {
    detail::require_finite(values_, Tag::name);
    if constexpr (Tag::nonnegative) {
      if (values_.size() > 0 && values_.minCoeff() < 0.0)
        throw ValidationError(std::string(Tag::name) + " has negative entries");
    }
  }

  static PairVector zeros(int m) { return PairVector(Vector::Zero(num_edges(m))); }

  const Vector& values() const { return values_; }
  int num_nodes() const { return num_nodes_; }
  Eigen::Index size() const { return values_.size(); }
  double operator[](Eigen::Index k) const { return values_[k]; }

  friend bool operator==(const PairVector& a, const PairVector& b) {
    return a.num_nodes_ == b.num_nodes_ && a.values_ == b.values_;
  }

 private:
  Vector values_;
  int num_nodes_ = 0;
};

struct EdgeTag {
  static constexpr const char* name = "edge vector";
  static constexpr bool nonnegative = false;
};
struct DistanceTag {
  static constexpr const char* name = "distance vector";
  static constexpr bool nonnegative = true;
};

/// Edge weights w. Solver outputs are nonnegative; intermediate quantities
/// (e.g. forward steps) may not be, so nonnegativity is not enforced here.
using EdgeVector = PairVector<EdgeTag>;
/// Squared Euclidean distances y between node signals.
using DistanceVector = PairVector<DistanceTag>;

/// Upper-triangle read-off of a symmetric, zero-diagonal matrix.
EdgeVector halfvec(const Matrix& adjacency);
/// Symmetric zero-diagonal matrix from an edge vector.
Matrix unhalfvec(const EdgeVector& w);
Matrix unhalfvec(const Vector& w);

/// Node degrees D w, i.e. row sums of unhalfvec(w).
Vector degree_apply(const Vector& w, int m);
inline Vector degree_apply(const EdgeVector& w) { return degree_apply(w.values(), w.num_nodes()); }

/// Adjoint of degree_apply: entry (i,j) is v_i + v_j.
Vector degree_adjoint(const Vector& v);

/// Combinatorial Laplacian diag(D w) - W.
Matrix laplacian(const EdgeVector& w);

/// y_(i,j) = ||x_i - x_j||^2 over the rows x_i of `data` (m x n).
DistanceVector pairwise_sq_dist(const Matrix& data);

/// 0/1 adjacency with entry 1 iff the weight is strictly greater than eta.
Matrix binarize(const Vector& w, int m, double eta = 1e-4);
inline Matrix binarize(const EdgeVector& w, double eta = 1e-4) {
  return binarize(w.values(), w.num_nodes(), eta);
}

/// (W + W^T) / 2 with zeroed diagonal.
Matrix symmetrize(const Matrix& w);

}  // namespace l2g
