#include "l2g/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "l2g/container.hpp"
#include "l2g/error.hpp"
#include "l2g/parallel.hpp"

namespace l2g {

GraphFamily parse_family(const std::string& name) {
  if (name == "ba") return GraphFamily::ba;
  if (name == "er") return GraphFamily::er;
  if (name == "sbm") return GraphFamily::sbm;
  if (name == "ws") return GraphFamily::ws;
  throw ConfigError("unknown graph family '" + name + "' (expected ba, er, sbm or ws)");
}

std::string to_string(GraphFamily family) {
  switch (family) {
    case GraphFamily::ba: return "ba";
    case GraphFamily::er: return "er";
    case GraphFamily::sbm: return "sbm";
    case GraphFamily::ws: return "ws";
  }
  return "?";
}

std::vector<int> equal_blocks(int m, int blocks) {
  if (blocks < 1 || blocks > m) throw ConfigError("sbm: block count must lie in [1, m]");
  std::vector<int> labels(m);
  for (int i = 0; i < m; ++i) labels[i] = static_cast<int>(std::int64_t(i) * blocks / m);
  return labels;
}

GraphFamilySpec GraphFamilySpec::defaults(GraphFamily family, int m) {
  GraphFamilySpec s;
  s.family = family;
  s.m = m;
  const double target = 0.5 * (s.density_min + s.density_max);
  const double pairs = double(num_edges(m));
  // BA: (m - a) a edges; pick the attachment count closest to the target.
  double best = 1e300;
  for (int a = 1; a < m; ++a) {
    const double d = (m - a) * double(a) / pairs;
    if (std::abs(d - target) < best) {
      best = std::abs(d - target);
      s.ba_attach = a;
    }
  }
  s.er_prob = target;
  // SBM: p_out = p_in / 15, expected density at the target.
  const auto labels = equal_blocks(m, std::min(s.sbm_blocks, m));
  double intra = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) intra += labels[i] == labels[j] ? 1.0 : 0.0;
  const double inter = pairs - intra;
  s.sbm_p_in = std::min(1.0, target * pairs / (intra + inter / 15.0));
  s.sbm_p_out = s.sbm_p_in / 15.0;
  if (family == GraphFamily::ws) s.density_max = 0.25;
  return s;
}

void GraphFamilySpec::validate() const {
  if (m < 3) throw ConfigError("graph family: need m >= 3");
  if (!(density_min >= 0.0 && density_min <= density_max && density_max <= 1.0))
    throw ConfigError("graph family: density interval must satisfy 0 <= min <= max <= 1");
  if (max_attempts < 1) throw ConfigError("graph family: max_attempts must be >= 1");
  switch (family) {
    case GraphFamily::ba:
      if (ba_attach < 1 || ba_attach >= m) throw ConfigError("ba: attachment count must lie in [1, m)");
      break;
    case GraphFamily::er:
      if (!(er_prob >= 0.0 && er_prob <= 1.0)) throw ConfigError("er: probability must lie in [0, 1]");
      break;
    case GraphFamily::sbm:
      if (sbm_blocks < 1 || sbm_blocks > m) throw ConfigError("sbm: block count must lie in [1, m]");
      if (!(sbm_p_in >= 0.0 && sbm_p_in <= 1.0 && sbm_p_out >= 0.0 && sbm_p_out <= 1.0))
        throw ConfigError("sbm: probabilities must lie in [0, 1]");
      break;
    case GraphFamily::ws:
      if (ws_k < 2 || ws_k % 2 != 0 || ws_k >= m) throw ConfigError("ws: k must be even and in [2, m)");
      if (!(ws_p >= 0.0 && ws_p <= 1.0)) throw ConfigError("ws: rewiring probability must lie in [0, 1]");
      break;
  }
}

nlohmann::json GraphFamilySpec::to_json() const {
  return {{"family", to_string(family)}, {"m", m},
          {"ba_attach", ba_attach},      {"er_prob", er_prob},
          {"sbm_blocks", sbm_blocks},    {"sbm_p_in", sbm_p_in},
          {"sbm_p_out", sbm_p_out},      {"ws_k", ws_k},
          {"ws_p", ws_p},                {"density_min", density_min},
          {"density_max", density_max},  {"max_attempts", max_attempts}};
}

GraphFamilySpec GraphFamilySpec::from_json(const nlohmann::json& j) {
  try {
    GraphFamilySpec s;
    s.family = parse_family(j.at("family").get<std::string>());
    s.m = j.at("m").get<int>();
    s.ba_attach = j.at("ba_attach").get<int>();
    s.er_prob = j.at("er_prob").get<double>();
    s.sbm_blocks = j.at("sbm_blocks").get<int>();
    s.sbm_p_in = j.at("sbm_p_in").get<double>();
    s.sbm_p_out = j.at("sbm_p_out").get<double>();
    s.ws_k = j.at("ws_k").get<int>();
    s.ws_p = j.at("ws_p").get<double>();
    s.density_min = j.at("density_min").get<double>();
    s.density_max = j.at("density_max").get<double>();
    s.max_attempts = j.at("max_attempts").get<int>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("graph family manifest: ") + e.what());
  }
}

double edge_density(const Matrix& adjacency) {
  const auto m = adjacency.rows();
  return adjacency.sum() / 2.0 / double(num_edges(m));
}

bool is_connected(const Matrix& adjacency) {
  const auto m = adjacency.rows();
  if (m == 0) return true;
  std::vector<char> seen(m, 0);
  std::vector<Eigen::Index> stack{0};
  seen[0] = 1;
  Eigen::Index count = 1;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (Eigen::Index v = 0; v < m; ++v)
      if (!seen[v] && adjacency(u, v) != 0.0) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
  }
  return count == m;
}

Matrix barabasi_albert(int m, int attach, Rng& rng) {
  Matrix a = Matrix::Zero(m, m);
  std::vector<int> targets(attach);
  for (int i = 0; i < attach; ++i) targets[i] = i;
  std::vector<int> repeated;
  for (int source = attach; source < m; ++source) {
    for (int t : targets) a(source, t) = a(t, source) = 1.0;
    repeated.insert(repeated.end(), targets.begin(), targets.end());
    repeated.insert(repeated.end(), attach, source);
    // preferential attachment: uniform over the degree-weighted node list
    std::vector<int> next;
    std::uniform_int_distribution<std::size_t> pick(0, repeated.size() - 1);
    while (static_cast<int>(next.size()) < attach) {
      const int c = repeated[pick(rng)];
      if (std::find(next.begin(), next.end(), c) == next.end()) next.push_back(c);
    }
    targets = std::move(next);
  }
  return a;
}

Matrix erdos_renyi(int m, double p, Rng& rng) {
  Matrix a = Matrix::Zero(m, m);
  std::bernoulli_distribution coin(p);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (coin(rng)) a(i, j) = a(j, i) = 1.0;
  return a;
}

Matrix stochastic_block(const std::vector<int>& blocks, double p_in, double p_out, Rng& rng) {
  const int m = static_cast<int>(blocks.size());
  Matrix a = Matrix::Zero(m, m);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (u(rng) < (blocks[i] == blocks[j] ? p_in : p_out)) a(i, j) = a(j, i) = 1.0;
  return a;
}

Matrix watts_strogatz(int m, int k, double p, Rng& rng) {
  Matrix a = Matrix::Zero(m, m);
  for (int j = 1; j <= k / 2; ++j)
    for (int u = 0; u < m; ++u) a(u, (u + j) % m) = a((u + j) % m, u) = 1.0;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> node(0, m - 1);
  for (int j = 1; j <= k / 2; ++j)
    for (int u = 0; u < m; ++u) {
      if (coin(rng) >= p) continue;
      const int v = (u + j) % m;
      if (a(u, v) == 0.0) continue;  // already rewired away
      if (a.row(u).sum() >= m - 1) continue;
      int w = node(rng);
      while (w == u || a(u, w) != 0.0) w = node(rng);
      a(u, v) = a(v, u) = 0.0;
      a(u, w) = a(w, u) = 1.0;
    }
  return a;
}

Topology gen_topology(const GraphFamilySpec& spec, std::uint64_t seed) {
  spec.validate();
  auto rng = make_rng(seed);
  Topology topo;
  if (spec.family == GraphFamily::sbm) topo.blocks = equal_blocks(spec.m, spec.sbm_blocks);
  for (int attempt = 1; attempt <= spec.max_attempts; ++attempt) {
    switch (spec.family) {
      case GraphFamily::ba: topo.adjacency = barabasi_albert(spec.m, spec.ba_attach, rng); break;
      case GraphFamily::er: topo.adjacency = erdos_renyi(spec.m, spec.er_prob, rng); break;
      case GraphFamily::sbm:
        topo.adjacency = stochastic_block(topo.blocks, spec.sbm_p_in, spec.sbm_p_out, rng);
        break;
      case GraphFamily::ws: topo.adjacency = watts_strogatz(spec.m, spec.ws_k, spec.ws_p, rng); break;
    }
    const double d = edge_density(topo.adjacency);
    if (d >= spec.density_min && d <= spec.density_max) {
      topo.connected = is_connected(topo.adjacency);
      topo.attempts = attempt;
      return topo;
    }
  }
  throw ConfigError("gen_topology: no " + to_string(spec.family) + " draw reached density in [" +
                    std::to_string(spec.density_min) + ", " + std::to_string(spec.density_max) +
                    "] after " + std::to_string(spec.max_attempts) + " attempts");
}

EdgeVector assign_weights(const Matrix& adjacency, std::uint64_t seed, double log_std) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, log_std);
  const auto m = adjacency.rows();
  Vector w = Vector::Zero(num_edges(m));
  std::int64_t k = 0;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j, ++k)
      if (adjacency(i, j) != 0.0) w[k] = std::exp(g(rng));
  return EdgeVector(std::move(w));
}

Matrix gen_signals(const EdgeVector& w, int n, double sigma, std::uint64_t seed) {
  if (!(sigma > 0.0)) throw ConfigError("gen_signals: sigma must be > 0");
  if (n < 1) throw ConfigError("gen_signals: need at least one signal");
  const int m = w.num_nodes();
  Matrix k = laplacian(w);
  k.diagonal().array() += sigma * sigma;
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success) throw NumericError("gen_signals: L + sigma^2 I is not positive definite");
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(m, n);
  for (int c = 0; c < n; ++c)
    for (int r = 0; r < m; ++r) z(r, c) = normal(rng);
  // K = C C^T  =>  C^{-T} z ~ N(0, K^{-1})
  llt.matrixU().solveInPlace(z);
  return z;
}

DistanceVector mean_sq_dist(const Matrix& signals) {
  return DistanceVector(pairwise_sq_dist(signals).values() / double(signals.cols()));
}

nlohmann::json DatasetConfig::to_json() const {
  return {{"spec", spec.to_json()},  {"n_train", n_train},     {"n_val", n_val},
          {"n_test", n_test},        {"n_signals", n_signals}, {"sigma", sigma},
          {"seed", seed},            {"distance", "mean squared distance per signal"},
          {"log_weight_std", log_weight_std}};
}

DatasetConfig DatasetConfig::from_json(const nlohmann::json& j) {
  try {
    DatasetConfig c;
    c.spec = GraphFamilySpec::from_json(j.at("spec"));
    c.n_train = j.at("n_train").get<int>();
    c.n_val = j.at("n_val").get<int>();
    c.n_test = j.at("n_test").get<int>();
    c.n_signals = j.at("n_signals").get<int>();
    c.sigma = j.at("sigma").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.log_weight_std = j.at("log_weight_std").get<double>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("dataset manifest: ") + e.what());
  }
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

GraphSample make_sample(const DatasetConfig& cfg, Split split, int index, bool* connected) {
  const auto s = static_cast<std::uint64_t>(split);
  const auto i = static_cast<std::uint64_t>(index);
  const auto topo = gen_topology(cfg.spec, derive_seed(cfg.seed, {s, i, 0}));
  EdgeVector w = assign_weights(topo.adjacency, derive_seed(cfg.seed, {s, i, 1}), cfg.log_weight_std);
  const Matrix x = gen_signals(w, cfg.n_signals, cfg.sigma, derive_seed(cfg.seed, {s, i, 2}));
  if (connected) *connected = topo.connected;
  return GraphSample{std::move(w),   mean_sq_dist(x),        to_string(cfg.spec.family),
                     derive_seed(cfg.seed, {s, i}), cfg.n_signals, cfg.sigma, topo.blocks};
}

const std::vector<GraphSample>& Dataset::split(Split s) const {
  switch (s) {
    case Split::train: return train;
    case Split::val: return val;
    case Split::test: return test;
  }
  return test;
}

Dataset build_dataset(const DatasetConfig& cfg, int threads) {
  cfg.spec.validate();
  if (cfg.n_train < 0 || cfg.n_val < 0 || cfg.n_test < 0) throw ConfigError("dataset: negative split size");
  if (!(cfg.sigma > 0.0)) throw ConfigError("dataset: sigma must be > 0");
  Dataset ds;
  ds.config = cfg;
  for (Split s : {Split::train, Split::val, Split::test}) {
    const int count = s == Split::train ? cfg.n_train : s == Split::val ? cfg.n_val : cfg.n_test;
    auto& out = s == Split::train ? ds.train : s == Split::val ? ds.val : ds.test;
    out.resize(count);
    parallel_for(count, threads, [&](std::size_t i) { out[i] = make_sample(cfg, s, static_cast<int>(i)); });
  }
  return ds;
}

namespace {

std::string split_file(Split s) { return to_string(s) + ".l2gd"; }

Container split_container(const Dataset& ds, Split s) {
  const auto& samples = ds.split(s);
  const int m = ds.config.spec.m;
  const auto e = num_edges(m);
  Container c;
  c.manifest = {{"format", "l2g-dataset-split"}, {"version", 1}, {"split", to_string(s)},
                {"count", samples.size()},       {"config", ds.config.to_json()}};
  Matrix w(samples.size(), e), y(samples.size(), e);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    w.row(i) = samples[i].w.values().transpose();
    y.row(i) = samples[i].y.values().transpose();
  }
  c.arrays["w"] = Array::from_matrix(w);
  c.arrays["y"] = Array::from_matrix(y);
  if (ds.config.spec.family == GraphFamily::sbm) {
    Matrix b(samples.size(), m);
    for (std::size_t i = 0; i < samples.size(); ++i)
      for (int k = 0; k < m; ++k) b(i, k) = samples[i].blocks[k];
    c.arrays["blocks"] = Array::from_matrix(b);
  }
  return c;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  nlohmann::json manifest = {{"format", "l2g-dataset"}, {"version", 1}, {"config", ds.config.to_json()}};
  for (Split s : {Split::train, Split::val, Split::test}) {
    const auto& samples = ds.split(s);
    std::vector<int> disconnected;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (!is_connected(binarize(samples[i].w, 0.0))) disconnected.push_back(static_cast<int>(i));
    manifest["splits"][to_string(s)] = {
        {"file", split_file(s)}, {"count", samples.size()}, {"disconnected", disconnected}};
    write_container(dir / split_file(s), split_container(ds, s));
  }
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(dir.string() + "/manifest.json: " + e.what());
  }
  if (manifest.value("format", "") != "l2g-dataset") throw DataError(dir.string() + ": not a dataset directory");
  Dataset ds;
  ds.config = DatasetConfig::from_json(manifest.at("config"));
  for (Split s : {Split::train, Split::val, Split::test}) {
    const auto c = read_container(dir / split_file(s));
    const Matrix w = c.at("w").to_matrix();
    const Matrix y = c.at("y").to_matrix();
    if (w.rows() != y.rows() || w.cols() != num_edges(ds.config.spec.m))
      throw DataError(to_string(s) + ": array shapes do not match the manifest");
    Matrix blocks;
    if (c.arrays.count("blocks")) blocks = c.at("blocks").to_matrix();
    auto& out = s == Split::train ? ds.train : s == Split::val ? ds.val : ds.test;
    out.reserve(w.rows());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      GraphSample g{EdgeVector(w.row(i).transpose()), DistanceVector(y.row(i).transpose()),
                    to_string(ds.config.spec.family),
                    derive_seed(ds.config.seed, {static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(i)}),
                    ds.config.n_signals, ds.config.sigma, {}};
      if (blocks.size() > 0)
        for (Eigen::Index k = 0; k < blocks.cols(); ++k) g.blocks.push_back(static_cast<int>(blocks(i, k)));
      out.push_back(std::move(g));
    }
  }
  return ds;
}

namespace {

bool parse_double(const std::string& field, double& out) {
  std::istringstream ss(field);
  ss >> out;
  return !ss.fail() && (ss >> std::ws).eof();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

TimeSeries read_timeseries_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw DataError(path.string() + ": empty CSV");
  double tmp = 0.0;
  bool header = false;
  for (std::size_t f = 1; f < rows[0].size(); ++f)
    if (!parse_double(rows[0][f], tmp)) header = true;
  const std::size_t first = header ? 1 : 0;
  if (rows.size() <= first) throw DataError(path.string() + ": no data rows");
  const bool labels = !parse_double(rows[first][0], tmp);
  const std::size_t width = rows[first].size() - (labels ? 1 : 0);
  if (width < 1) throw DataError(path.string() + ": no numeric columns");
  TimeSeries ts;
  ts.values.resize(static_cast<Eigen::Index>(rows.size() - first), static_cast<Eigen::Index>(width));
  for (std::size_t r = first; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != width + (labels ? 1 : 0))
      throw DataError(path.string() + ": row " + std::to_string(r + 1) + " has " +
                      std::to_string(row.size()) + " fields");
    ts.names.push_back(labels ? row[0] : "node" + std::to_string(r - first));
    for (std::size_t c = 0; c < width; ++c) {
      double v = 0.0;
      if (!parse_double(row[c + (labels ? 1 : 0)], v) || !std::isfinite(v))
        throw DataError(path.string() + ": non-numeric value at row " + std::to_string(r + 1));
      ts.values(static_cast<Eigen::Index>(r - first), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return ts;
}

}  // namespace l2g
