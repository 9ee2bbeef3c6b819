#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "l2g/graph_core.hpp"

namespace l2g {

/// ||estimate - truth||^2 / ||truth||^2. Throws ValidationError when truth is zero.
double normalized_sq_error(const Vector& estimate, const Vector& truth);

/// Mean normalised squared error over samples. Samples whose groundtruth has
/// zero norm are skipped with a warning on stderr; throws when none remain.
double gmse(std::span<const Vector> estimates, std::span<const Vector> truths);

/// Mean and 95% half-width (1.96 * sample std / sqrt(n)) of per-sample values.
struct Summary {
  double mean = 0.0;
  double half_width = 0.0;
  std::size_t count = 0;
};
Summary summarize(std::span<const double> values);

/// ROC AUC of `scores` against 0/1 `labels` via the Mann-Whitney rank
/// statistic with averaged ties.
double auc(const Vector& scores, const std::vector<int>& labels);
/// Edge labels from groundtruth weights (1 iff weight > eta).
std::vector<int> edge_labels(const Vector& truth, double eta = 1e-4);

/// Average ranks (1-based), ties share their mean rank.
Vector average_ranks(const Vector& values);

/// Spearman rank correlation; NaN when either input is constant.
double spearman(const Vector& a, const Vector& b);
/// Mean pairwise Spearman correlation. Constant vectors are skipped with a
/// warning.
double spearman_stability(std::span<const Vector> estimates);

/// Degrees of a 0/1 adjacency matrix.
std::vector<int> degree_sequence(const Matrix& adjacency);

/// Discrete power-law fit with x_min = 1.
struct PowerLawFit {
  double exponent = 0.0;
  double ks_statistic = 0.0;
  double p_value = 0.0;
  int sample_size = 0;
};

/// MLE exponent for a discrete power law on {1, 2, ...}; zero entries are ignored.
double fit_powerlaw_exponent(std::span<const int> values);
/// KS distance between the empirical CDF of `values` and the fitted power law.
double powerlaw_ks_statistic(std::span<const int> values, double exponent);
/// Fit plus bootstrap p-value (fraction of synthetic samples whose KS
/// distance is at least the observed one).
PowerLawFit powerlaw_test(std::span<const int> values, int bootstrap, std::uint64_t seed);

/// Percentage of graphs whose degree sequence has bootstrap p-value > 0.05.
/// Graphs with no edges are skipped with a warning.
double ks_powerlaw_score(std::span<const Matrix> graphs, int bootstrap = 200,
                         std::uint64_t seed = 0);

/// Newman modularity of a 0/1 graph under a node partition.
double modularity(const Matrix& adjacency, const std::vector<int>& partition);

/// Mean local clustering coefficient (nodes of degree < 2 contribute 0).
double clustering_coefficient(const Matrix& adjacency);

struct PathLengthResult {
  double value = 0.0;
  bool connected = true;
  int component_size = 0;
};
/// Mean hop distance over ordered pairs; on the largest component when the
/// graph is disconnected.
PathLengthResult avg_shortest_path(const Matrix& adjacency);

}  // namespace l2g
