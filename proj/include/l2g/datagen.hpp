#pragma once

// Synthetic graph families, log-normal edge weights and smooth Gaussian
// signals X ~ N(0, (L + sigma^2 I)^{-1}), plus dataset (de)serialisation.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "l2g/graph_core.hpp"
#include "l2g/random.hpp"
#include "l2g/sample.hpp"

namespace l2g {

enum class GraphFamily { ba, er, sbm, ws };

GraphFamily parse_family(const std::string& name);
std::string to_string(GraphFamily family);

struct GraphFamilySpec {
  GraphFamily family = GraphFamily::ba;
  int m = 20;
  int ba_attach = 1;
  double er_prob = 0.075;
  int sbm_blocks = 4;
  double sbm_p_in = 0.285;
  double sbm_p_out = 0.019;
  int ws_k = 4;
  double ws_p = 0.2;
  double density_min = 0.05;
  double density_max = 0.1;
  int max_attempts = 1000;

  /// Family defaults for m nodes: BA attachment and ER/SBM probabilities are
  /// solved for the middle of [0.05, 0.1]; WS uses k = 4, p = 0.2 with the
  /// wider interval [0.05, 0.25] that a k = 4 ring needs at small m.
  static GraphFamilySpec defaults(GraphFamily family, int m);

  void validate() const;
  nlohmann::json to_json() const;
  static GraphFamilySpec from_json(const nlohmann::json& j);
};

struct Topology {
  Matrix adjacency;         // 0/1, symmetric, zero diagonal
  std::vector<int> blocks;  // SBM only
  bool connected = true;
  int attempts = 1;
};

double edge_density(const Matrix& adjacency);
bool is_connected(const Matrix& adjacency);

/// Raw draws without density screening.
Matrix barabasi_albert(int m, int attach, Rng& rng);
Matrix erdos_renyi(int m, double p, Rng& rng);
Matrix stochastic_block(const std::vector<int>& blocks, double p_in, double p_out, Rng& rng);
Matrix watts_strogatz(int m, int k, double p, Rng& rng);
std::vector<int> equal_blocks(int m, int blocks);

/// Draws until the edge density falls inside the spec's interval.
/// Throws ConfigError after max_attempts.
Topology gen_topology(const GraphFamilySpec& spec, std::uint64_t seed);

/// exp(g), g ~ N(0, 0.1^2), on every present edge; zero elsewhere.
EdgeVector assign_weights(const Matrix& adjacency, std::uint64_t seed, double log_std = 0.1);

/// m x n matrix whose columns are i.i.d. N(0, (L + sigma^2 I)^{-1}).
Matrix gen_signals(const EdgeVector& w, int n, double sigma, std::uint64_t seed);

/// Per-signal mean squared distance: pairwise_sq_dist(X) / n.
DistanceVector mean_sq_dist(const Matrix& signals);

struct DatasetConfig {
  GraphFamilySpec spec;
  int n_train = 1000;
  int n_val = 200;
  int n_test = 64;
  int n_signals = 1000;
  double sigma = 0.01;
  double log_weight_std = 0.1;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static DatasetConfig from_json(const nlohmann::json& j);
};

enum class Split : std::uint64_t { train = 0, val = 1, test = 2 };
std::string to_string(Split split);

/// Sample `index` of `split`; depends only on (cfg, split, index).
GraphSample make_sample(const DatasetConfig& cfg, Split split, int index, bool* connected = nullptr);

struct Dataset {
  DatasetConfig config;
  std::vector<GraphSample> train, val, test;

  const std::vector<GraphSample>& split(Split s) const;
};

Dataset build_dataset(const DatasetConfig& cfg, int threads = 1);

/// Directory with manifest.json plus train.l2gd / val.l2gd / test.l2gd.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// CSV of time series (rows = entities, columns = time points). An optional
/// header row of names is detected when its first field is not numeric; an
/// optional first column of entity labels is detected likewise.
struct TimeSeries {
  std::vector<std::string> names;
  Matrix values;
};
TimeSeries read_timeseries_csv(const std::filesystem::path& path);

}  // namespace l2g
