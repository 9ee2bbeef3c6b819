#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "l2g/datagen.hpp"
#include "l2g/graph_core.hpp"
#include "l2g/random.hpp"

namespace testing {

using l2g::Matrix;
using l2g::Vector;

inline Vector random_vector(Eigen::Index n, l2g::Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Degree operator as an explicit m x E matrix built from the pair enumeration.
inline Matrix dense_degree_operator(int m) {
  Matrix s = Matrix::Zero(m, m * (m - 1) / 2);
  int k = 0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j, ++k) {
      s(i, k) = 1.0;
      s(j, k) = 1.0;
    }
  return s;
}

// Minimiser of a convex scalar function on [lo, hi] by ternary search.
inline double ternary_min(const std::function<double(double)>& f, double lo, double hi, int iters = 300) {
  for (int it = 0; it < iters; ++it) {
    const double a = lo + (hi - lo) / 3.0;
    const double b = hi - (hi - lo) / 3.0;
    if (f(a) < f(b)) hi = b; else lo = a;
  }
  return 0.5 * (lo + hi);
}

// Small connected BA-style sample used across suites.
inline l2g::GraphSample small_sample(int m, std::uint64_t seed, int n_signals = 50) {
  l2g::DatasetConfig cfg;
  cfg.spec = l2g::GraphFamilySpec::defaults(l2g::GraphFamily::er, m);
  cfg.spec.er_prob = 0.5;
  cfg.spec.density_min = 0.2;
  cfg.spec.density_max = 0.8;
  cfg.n_signals = n_signals;
  cfg.seed = seed;
  for (int idx = 0;; ++idx) {
    auto s = l2g::make_sample(cfg, l2g::Split::train, idx);
    if (l2g::is_connected(l2g::binarize(s.w))) return s;
  }
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::path(L2G_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing
