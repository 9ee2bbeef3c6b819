#include "l2g/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <queue>

#include <boost/math/special_functions/zeta.hpp>

#include "l2g/random.hpp"

namespace l2g {

double normalized_sq_error(const Vector& estimate, const Vector& truth) {
  if (estimate.size() != truth.size()) throw ValidationError("gmse: length mismatch");
  const double denom = truth.squaredNorm();
  if (denom == 0.0) throw ValidationError("gmse: groundtruth has zero norm");
  return (estimate - truth).squaredNorm() / denom;
}

double gmse(std::span<const Vector> estimates, std::span<const Vector> truths) {
  if (estimates.size() != truths.size()) throw ValidationError("gmse: sample count mismatch");
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (truths[i].squaredNorm() == 0.0) {
      std::cerr << "warning: gmse skips sample " << i << " (zero groundtruth)\n";
      continue;
    }
    total += normalized_sq_error(estimates[i], truths[i]);
    ++used;
  }
  if (used == 0) throw ValidationError("gmse: no sample with nonzero groundtruth");
  return total / double(used);
}

Summary summarize(std::span<const double> values) {
  Summary s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / double(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / double(values.size() - 1));
    s.half_width = 1.96 * sd / std::sqrt(double(values.size()));
  }
  return s;
}

Vector average_ranks(const Vector& values) {
  const auto n = values.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return values[a] < values[b]; });
  Vector ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * double(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::vector<int> edge_labels(const Vector& truth, double eta) {
  std::vector<int> labels(truth.size());
  for (Eigen::Index k = 0; k < truth.size(); ++k) labels[k] = truth[k] > eta ? 1 : 0;
  return labels;
}

double auc(const Vector& scores, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(scores.size()) != labels.size())
    throw ValidationError("auc: length mismatch");
  const Vector ranks = average_ranks(scores);
  double rank_sum = 0.0;
  double pos = 0.0;
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (labels[k]) {
      rank_sum += ranks[k];
      pos += 1.0;
    }
  const double neg = double(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw ValidationError("auc: need both positive and negative labels");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double spearman(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ValidationError("spearman: length mismatch");
  const Vector ra = average_ranks(a);
  const Vector rb = average_ranks(b);
  const Vector ca = ra.array() - ra.mean();
  const Vector cb = rb.array() - rb.mean();
  const double denom = std::sqrt(ca.squaredNorm() * cb.squaredNorm());
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return ca.dot(cb) / denom;
}

double spearman_stability(std::span<const Vector> estimates) {
  if (estimates.size() < 2) throw ValidationError("spearman_stability: need at least two estimates");
  double total = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < estimates.size(); ++i)
    for (std::size_t j = i + 1; j < estimates.size(); ++j) {
      const double rho = spearman(estimates[i], estimates[j]);
      if (std::isnan(rho)) {
        std::cerr << "warning: spearman_stability skips constant pair (" << i << ", " << j << ")\n";
        continue;
      }
      total += rho;
      ++pairs;
    }
  if (pairs == 0) throw ValidationError("spearman_stability: every pair was constant");
  return total / pairs;
}

std::vector<int> degree_sequence(const Matrix& adjacency) {
  std::vector<int> deg(adjacency.rows());
  for (Eigen::Index i = 0; i < adjacency.rows(); ++i)
    deg[i] = static_cast<int>(std::lround(adjacency.row(i).sum()));
  return deg;
}

namespace {

constexpr double kMinExponent = 1.0 + 1e-6;
constexpr double kMaxExponent = 20.0;

std::vector<int> positive_only(std::span<const int> values) {
  std::vector<int> out;
  for (int v : values)
    if (v >= 1) out.push_back(v);
  return out;
}

constexpr int kExactCdfLimit = 1000;

// Log-likelihood per observation of a discrete power law on {1, 2, ...}.
double powerlaw_loglik(double exponent, double mean_log) {
  return -std::log(boost::math::zeta(exponent)) - exponent * mean_log;
}

// Sampler for the discrete power law: exact inverse CDF over a table, with
// the continuous approximation beyond it.
class PowerLawSampler {
 public:
  explicit PowerLawSampler(double exponent) : exponent_(exponent) {
    const double z = boost::math::zeta(exponent);
    double acc = 0.0;
    cdf_.reserve(kTable);
    for (int k = 1; k <= kTable; ++k) {
      acc += std::pow(double(k), -exponent) / z;
      cdf_.push_back(acc);
    }
  }

  int operator()(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    if (it != cdf_.end()) return static_cast<int>(it - cdf_.begin()) + 1;
    const double tail = (1.0 - u) / (1.0 - cdf_.back());
    const double x = (kTable + 0.5) * std::pow(std::max(tail, 1e-300), -1.0 / (exponent_ - 1.0));
    return static_cast<int>(std::min(x, 1e9));
  }

 private:
  static constexpr int kTable = 20000;
  double exponent_;
  std::vector<double> cdf_;
};

}  // namespace

double fit_powerlaw_exponent(std::span<const int> values) {
  const auto data = positive_only(values);
  if (data.empty()) throw ValidationError("powerlaw fit: no positive values");
  double mean_log = 0.0;
  for (int v : data) mean_log += std::log(double(v));
  mean_log /= double(data.size());
  // log-likelihood is concave in the exponent
  double lo = kMinExponent;
  double hi = kMaxExponent;
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double a = lo + (hi - lo) / 3.0;
    const double b = hi - (hi - lo) / 3.0;
    if (powerlaw_loglik(a, mean_log) < powerlaw_loglik(b, mean_log))
      lo = a;
    else
      hi = b;
  }
  return 0.5 * (lo + hi);
}

double powerlaw_ks_statistic(std::span<const int> values, double exponent) {
  auto data = positive_only(values);
  if (data.empty()) throw ValidationError("powerlaw ks: no positive values");
  std::sort(data.begin(), data.end());
  const double z = boost::math::zeta(exponent);
  const double n = double(data.size());
  double model_cdf = 0.0;
  double ks = 0.0;
  std::size_t idx = 0;
  const int exact_limit = std::min(data.back(), kExactCdfLimit);
  for (int x = 1; x <= exact_limit; ++x) {
    model_cdf += std::pow(double(x), -exponent) / z;
    while (idx < data.size() && data[idx] <= x) ++idx;
    ks = std::max(ks, std::abs(double(idx) / n - model_cdf));
  }
  // Beyond the limit the empirical CDF only moves at data values, so the
  // supremum is attained at v - 1 or v; the model tail is the integral bound.
  auto tail_cdf = [&](double x) { return 1.0 - std::pow(x + 0.5, 1.0 - exponent) / ((exponent - 1.0) * z); };
  while (idx < data.size()) {
    const int v = data[idx];
    if (v - 1 > exact_limit) ks = std::max(ks, std::abs(double(idx) / n - tail_cdf(v - 1)));
    while (idx < data.size() && data[idx] == v) ++idx;
    ks = std::max(ks, std::abs(double(idx) / n - tail_cdf(v)));
  }
  return ks;
}

PowerLawFit powerlaw_test(std::span<const int> values, int bootstrap, std::uint64_t seed) {
  const auto data = positive_only(values);
  PowerLawFit fit;
  fit.sample_size = static_cast<int>(data.size());
  fit.exponent = fit_powerlaw_exponent(data);
  fit.ks_statistic = powerlaw_ks_statistic(data, fit.exponent);
  if (bootstrap <= 0) {
    fit.p_value = std::numeric_limits<double>::quiet_NaN();
    return fit;
  }
  const PowerLawSampler sampler(fit.exponent);
  auto rng = make_rng(seed);
  int exceed = 0;
  std::vector<int> synthetic(data.size());
  for (int b = 0; b < bootstrap; ++b) {
    for (auto& s : synthetic) s = sampler(rng);
    const double a = fit_powerlaw_exponent(synthetic);
    if (powerlaw_ks_statistic(synthetic, a) >= fit.ks_statistic) ++exceed;
  }
  fit.p_value = double(exceed) / double(bootstrap);
  return fit;
}

double ks_powerlaw_score(std::span<const Matrix> graphs, int bootstrap, std::uint64_t seed) {
  if (graphs.empty()) throw ValidationError("ks_powerlaw_score: no graphs");
  int tested = 0;
  int passed = 0;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    const auto deg = degree_sequence(graphs[g]);
    if (std::all_of(deg.begin(), deg.end(), [](int d) { return d == 0; })) {
      std::cerr << "warning: ks_powerlaw_score skips graph " << g << " (no edges)\n";
      continue;
    }
    const auto fit = powerlaw_test(deg, bootstrap, derive_seed(seed, {g}));
    ++tested;
    if (fit.p_value > 0.05) ++passed;
  }
  if (tested == 0) throw ValidationError("ks_powerlaw_score: every graph was empty");
  return 100.0 * passed / tested;
}

double modularity(const Matrix& adjacency, const std::vector<int>& partition) {
  const auto m = adjacency.rows();
  if (static_cast<std::size_t>(m) != partition.size())
    throw ValidationError("modularity: partition size does not match node count");
  const Vector k = adjacency.rowwise().sum();
  const double two_m = k.sum();
  if (two_m == 0.0) return 0.0;
  double q = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (partition[i] == partition[j]) q += adjacency(i, j) - k[i] * k[j] / two_m;
  return q / two_m;
}

double clustering_coefficient(const Matrix& adjacency) {
  const auto m = adjacency.rows();
  if (m == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    std::vector<Eigen::Index> nb;
    for (Eigen::Index j = 0; j < m; ++j)
      if (j != i && adjacency(i, j) != 0.0) nb.push_back(j);
    const double d = double(nb.size());
    if (nb.size() < 2) continue;
    double links = 0.0;
    for (std::size_t a = 0; a < nb.size(); ++a)
      for (std::size_t b = a + 1; b < nb.size(); ++b)
        if (adjacency(nb[a], nb[b]) != 0.0) links += 1.0;
    total += 2.0 * links / (d * (d - 1.0));
  }
  return total / double(m);
}

PathLengthResult avg_shortest_path(const Matrix& adjacency) {
  const auto m = static_cast<int>(adjacency.rows());
  std::vector<std::vector<int>> dist(m, std::vector<int>(m, -1));
  for (int s = 0; s < m; ++s) {
    std::queue<int> q;
    dist[s][s] = 0;
    q.push(s);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v = 0; v < m; ++v)
        if (v != u && adjacency(u, v) != 0.0 && dist[s][v] < 0) {
          dist[s][v] = dist[s][u] + 1;
          q.push(v);
        }
    }
  }
  // components via reachability from each node
  std::vector<int> component(m, -1);
  int best = -1;
  int best_size = 0;
  for (int s = 0, c = 0; s < m; ++s) {
    if (component[s] >= 0) continue;
    int size = 0;
    for (int v = 0; v < m; ++v)
      if (dist[s][v] >= 0) {
        component[v] = c;
        ++size;
      }
    if (size > best_size) {
      best_size = size;
      best = c;
    }
    ++c;
  }
  PathLengthResult out;
  out.component_size = best_size;
  out.connected = best_size == m;
  if (best_size < 2) {
    std::cerr << "warning: avg_shortest_path on a graph with only singleton components\n";
    out.value = 0.0;
    return out;
  }
  double total = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (i != j && component[i] == best && component[j] == best) total += dist[i][j];
  out.value = total / (double(best_size) * (best_size - 1));
  return out;
}

}  // namespace l2g
