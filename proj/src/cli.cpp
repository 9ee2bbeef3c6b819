#include "l2g/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "l2g/container.hpp"
#include "l2g/datagen.hpp"
#include "l2g/error.hpp"
#include "l2g/metrics.hpp"
#include "l2g/parallel.hpp"
#include "l2g/solvers.hpp"
#include "l2g/trainer.hpp"
#include "l2g/unroll_net.hpp"

namespace l2g {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_run_manifest(const fs::path& dir, const std::string& command, const json& options) {
  const json j = {{"format", "l2g-run"}, {"version", 1}, {"command", command}, {"options", options}};
  write_text_file(dir / "run.json", j.dump(2) + "\n");
}

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "' (expected train, val or test)");
}

// "lo:hi:points" in powers of ten.
std::vector<double> parse_grid(const std::string& s) {
  double lo = 0.0, hi = 0.0;
  int points = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  if (!(in >> lo >> c1 >> hi >> c2 >> points) || c1 != ':' || c2 != ':' || !in.eof())
    throw ConfigError("grid '" + s + "' must look like lo:hi:points");
  return log_grid(lo, hi, points);
}

std::map<std::string, std::string> parse_pairs(const std::vector<std::string>& items, const char* flag) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
      throw ConfigError(std::string(flag) + " expects NAME=PATH, got '" + item + "'");
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

json solver_config_json(SolverKind kind, const SolverConfig& c, int m) {
  return {{"solver", to_string(kind)}, {"alpha", c.alpha},        {"beta", c.beta},
          {"gamma", c.step_size(m)},   {"tol", c.tol},            {"max_iter", c.max_iter},
          {"lambda_relax", c.lambda_relax}};
}

SolverConfig solver_config_from_json(const json& j) {
  SolverConfig c;
  c.alpha = j.at("alpha").get<double>();
  c.beta = j.at("beta").get<double>();
  if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
  c.tol = j.value("tol", c.tol);
  c.max_iter = j.value("max_iter", c.max_iter);
  c.lambda_relax = j.value("lambda_relax", c.lambda_relax);
  return c;
}

/// Tuned configuration from a tune.json file.
SolverConfig load_tuned(const fs::path& path) {
  const json j = read_json_file(path);
  if (j.value("format", "") != "l2g-tune") throw DataError(path.string() + ": not a tune result");
  try {
    return solver_config_from_json(j.at("best"));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_estimates(const fs::path& path, const std::vector<Vector>& est, json meta) {
  if (est.empty()) throw ValidationError("no estimates to write");
  Matrix w(static_cast<Eigen::Index>(est.size()), est[0].size());
  for (std::size_t i = 0; i < est.size(); ++i) w.row(static_cast<Eigen::Index>(i)) = est[i].transpose();
  Container c;
  meta["format"] = "l2g-estimates";
  meta["count"] = est.size();
  meta["num_nodes"] = num_nodes_for_length(est[0].size());
  c.manifest = std::move(meta);
  c.arrays["w"] = Array::from_matrix(w);
  write_container(path, c);
}

std::vector<Vector> read_estimates(const fs::path& path) {
  const Container c = read_container(path);
  if (c.manifest.value("format", "") != "l2g-estimates") throw DataError(path.string() + ": not an estimates file");
  const Matrix w = c.at("w").to_matrix();
  std::vector<Vector> out;
  for (Eigen::Index i = 0; i < w.rows(); ++i) out.push_back(w.row(i).transpose());
  return out;
}

struct SampleMetrics {
  double gmse = kNaN;
  double auc = kNaN;
  double clustering = kNaN;
  double avg_path = kNaN;
  double modularity = kNaN;
  bool connected = true;
};

struct SetEval {
  std::vector<SampleMetrics> per;
  std::vector<Matrix> graphs;  // binarised estimates
  double ks_score = kNaN;
  bool has_blocks = false;
};

SetEval evaluate_set(const std::vector<Vector>& est, std::span<const GraphSample> truth, double eta,
                     int ks_bootstrap, std::uint64_t ks_seed, int threads) {
  if (est.size() != truth.size())
    throw DataError("estimates hold " + std::to_string(est.size()) + " samples, the split holds " +
                    std::to_string(truth.size()));
  SetEval out;
  out.per.resize(est.size());
  out.graphs.resize(est.size());
  out.has_blocks = !truth.empty() && !truth[0].blocks.empty();
  parallel_for(est.size(), threads, [&](std::size_t i) {
    const Vector& w = truth[i].w.values();
    const int m = truth[i].num_nodes();
    if (est[i].size() != w.size()) throw DataError("estimate " + std::to_string(i) + " has the wrong length");
    SampleMetrics& s = out.per[i];
    if (w.squaredNorm() > 0.0) s.gmse = normalized_sq_error(est[i], w);
    const auto labels = edge_labels(w, eta);
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos > 0 && pos < static_cast<long>(labels.size())) s.auc = auc(est[i], labels);
    out.graphs[i] = binarize(est[i], m, eta);
    s.clustering = clustering_coefficient(out.graphs[i]);
    const auto p = avg_shortest_path(out.graphs[i]);
    s.avg_path = p.value;
    s.connected = p.connected;
    if (!truth[i].blocks.empty()) s.modularity = modularity(out.graphs[i], truth[i].blocks);
  });
  const bool any_edges =
      std::any_of(out.graphs.begin(), out.graphs.end(), [](const Matrix& a) { return a.sum() > 0.0; });
  if (any_edges) out.ks_score = ks_powerlaw_score(out.graphs, ks_bootstrap, ks_seed);
  return out;
}

Summary summarize_finite(const std::vector<double>& values) {
  std::vector<double> finite;
  for (double v : values)
    if (std::isfinite(v)) finite.push_back(v);
  if (finite.empty()) return {kNaN, kNaN, 0};
  return summarize(finite);
}

template <class Field>
std::vector<double> column(const SetEval& e, Field f) {
  std::vector<double> out;
  for (const auto& s : e.per) out.push_back(s.*f);
  return out;
}

void report_summary(std::ostream& os, const std::string& key, const std::vector<double>& values) {
  const Summary s = summarize_finite(values);
  os << key << ".mean = " << num(s.mean) << "\n";
  os << key << ".ci95 = " << num(s.half_width) << "\n";
  os << key << ".count = " << s.count << "\n";
}

void report_set(std::ostream& os, const std::string& prefix, const SetEval& e, int ks_bootstrap,
                std::uint64_t ks_seed) {
  report_summary(os, prefix + "gmse", column(e, &SampleMetrics::gmse));
  report_summary(os, prefix + "auc", column(e, &SampleMetrics::auc));
  report_summary(os, prefix + "clustering", column(e, &SampleMetrics::clustering));
  report_summary(os, prefix + "avg_shortest_path", column(e, &SampleMetrics::avg_path));
  int disconnected = 0;
  for (const auto& s : e.per) disconnected += s.connected ? 0 : 1;
  os << prefix << "avg_shortest_path.disconnected = " << disconnected << "\n";
  if (e.has_blocks) {
    report_summary(os, prefix + "modularity", column(e, &SampleMetrics::modularity));
    os << prefix << "modularity.definition = newman modularity against the generating block partition\n";
  }
  os << prefix << "ks_powerlaw.score = " << num(e.ks_score) << "\n";
  os << prefix << "ks_powerlaw.protocol = discrete power-law mle, x_min 1, bootstrap p-value > 0.05\n";
  os << prefix << "ks_powerlaw.bootstrap = " << ks_bootstrap << "\n";
  os << prefix << "ks_powerlaw.seed = " << ks_seed << "\n";
}

std::string per_sample_csv(const SetEval& e) {
  std::ostringstream os;
  os << "index,gmse,auc,clustering,avg_shortest_path,connected,modularity\n";
  for (std::size_t i = 0; i < e.per.size(); ++i) {
    const auto& s = e.per[i];
    os << i << ',' << num(s.gmse) << ',' << num(s.auc) << ',' << num(s.clustering) << ',' << num(s.avg_path) << ','
       << (s.connected ? 1 : 0) << ',' << num(s.modularity) << "\n";
  }
  return os.str();
}

std::string degree_hist_csv(const std::vector<Matrix>& estimate, const std::vector<Matrix>& truth) {
  std::map<int, std::pair<long, long>> hist;
  for (const auto& a : estimate)
    for (int d : degree_sequence(a)) ++hist[d].first;
  for (const auto& a : truth)
    for (int d : degree_sequence(a)) ++hist[d].second;
  std::ostringstream os;
  os << "degree,estimate_count,truth_count\n";
  for (const auto& [d, c] : hist) os << d << ',' << c.first << ',' << c.second << "\n";
  return os.str();
}

std::string matrix_csv(const Matrix& a) {
  std::ostringstream os;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) os << (j ? "," : "") << num(a(i, j));
    os << "\n";
  }
  return os.str();
}

std::vector<Vector> truth_vectors(std::span<const GraphSample> samples) {
  std::vector<Vector> out;
  for (const auto& s : samples) out.push_back(s.w.values());
  return out;
}

std::vector<Vector> predict_all(const Model& model, std::span<const GraphSample> samples, int threads,
                                bool stochastic = false, std::uint64_t noise_seed = 0) {
  if (!samples.empty() && samples[0].num_nodes() != model.num_nodes)
    throw DataError("model expects " + std::to_string(model.num_nodes) + " nodes, data has " +
                    std::to_string(samples[0].num_nodes()));
  std::vector<Vector> out(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    out[i] = predict(model, samples[i].y, derive_seed(noise_seed, {i}), stochastic).values();
  });
  return out;
}

std::vector<Vector> solve_all(SolverKind kind, const SolverConfig& cfg, std::span<const GraphSample> samples,
                              int threads, std::vector<SolveResult>* results = nullptr) {
  std::vector<SolveResult> res(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) { res[i] = solve(kind, samples[i].y, cfg); });
  std::vector<Vector> out;
  for (const auto& r : res) out.push_back(r.w.values());
  if (results) *results = std::move(res);
  return out;
}

// ---- generate -------------------------------------------------------------

struct GenerateOpts {
  std::string family = "ba";
  int m = 20;
  int n_train = 1000, n_val = 200, n_test = 64;
  int n_signals = 1000;
  double sigma = 0.01;
  double log_weight_std = 0.1;
  std::uint64_t seed = 0;
  int ba_attach = 0;
  double er_prob = 0, p_in = 0, p_out = 0, ws_p = 0, density_min = 0, density_max = 0;
  int sbm_blocks = 0, ws_k = 0;
  std::string out;
  std::map<std::string, CLI::Option*> overrides;
};

int cmd_generate(const GenerateOpts& o, int threads) {
  DatasetConfig cfg;
  cfg.spec = GraphFamilySpec::defaults(parse_family(o.family), o.m);
  auto set = [&](const char* name) { return o.overrides.at(name)->count() > 0; };
  if (set("--ba-attach")) cfg.spec.ba_attach = o.ba_attach;
  if (set("--er-prob")) cfg.spec.er_prob = o.er_prob;
  if (set("--sbm-blocks")) cfg.spec.sbm_blocks = o.sbm_blocks;
  if (set("--p-in")) cfg.spec.sbm_p_in = o.p_in;
  if (set("--p-out")) cfg.spec.sbm_p_out = o.p_out;
  if (set("--ws-k")) cfg.spec.ws_k = o.ws_k;
  if (set("--ws-p")) cfg.spec.ws_p = o.ws_p;
  if (set("--density-min")) cfg.spec.density_min = o.density_min;
  if (set("--density-max")) cfg.spec.density_max = o.density_max;
  cfg.n_train = o.n_train;
  cfg.n_val = o.n_val;
  cfg.n_test = o.n_test;
  cfg.n_signals = o.n_signals;
  cfg.sigma = o.sigma;
  cfg.log_weight_std = o.log_weight_std;
  cfg.seed = o.seed;
  cfg.spec.validate();
  const Dataset ds = build_dataset(cfg, threads);
  save_dataset(ds, o.out);
  write_run_manifest(o.out, "generate", {{"dataset", cfg.to_json()}, {"out", o.out}});
  std::cout << "wrote " << ds.train.size() << "/" << ds.val.size() << "/" << ds.test.size() << " "
            << to_string(cfg.spec.family) << " samples (m=" << cfg.spec.m << ") to " << o.out << "\n";
  return exit_ok;
}

// ---- tune -----------------------------------------------------------------

struct TuneOpts {
  std::string dataset, split = "train", solver = "pds";
  std::string alpha_grid = "-2:1:7", beta_grid = "-2:1:7";
  double tol = 1e-6;
  int max_iter = 10000;
  double lambda_relax = 1.5;
  int limit = 0;
  std::string out;
};

int cmd_tune(const TuneOpts& o, int threads) {
  const SolverKind kind = parse_solver_kind(o.solver);
  const auto alphas = parse_grid(o.alpha_grid);
  const auto betas = parse_grid(o.beta_grid);
  const Dataset ds = load_dataset(o.dataset);
  std::span<const GraphSample> samples = ds.split(parse_split(o.split));
  if (o.limit < 0) throw ConfigError("--limit must be >= 0");
  if (o.limit > 0 && static_cast<std::size_t>(o.limit) < samples.size()) samples = samples.first(o.limit);
  if (samples.empty()) throw DataError("split '" + o.split + "' is empty");
  SolverConfig base;
  base.tol = o.tol;
  base.max_iter = o.max_iter;
  base.lambda_relax = o.lambda_relax;
  const auto res = grid_search(samples, alphas, betas, kind, base, threads);
  const int m = samples[0].num_nodes();
  json grid = json::array();
  std::ostringstream csv;
  csv << "alpha,beta,mean_gmse,failed\n";
  for (const auto& p : res.grid) {
    grid.push_back({{"alpha", p.alpha}, {"beta", p.beta}, {"mean_gmse", p.failed ? json() : json(p.mean_gmse)},
                    {"failed", p.failed}});
    csv << num(p.alpha) << ',' << num(p.beta) << ',' << num(p.mean_gmse) << ',' << (p.failed ? 1 : 0) << "\n";
  }
  const json result = {{"format", "l2g-tune"},
                       {"solver", to_string(kind)},
                       {"split", o.split},
                       {"samples", samples.size()},
                       {"best", solver_config_json(kind, res.best, m)},
                       {"best_gmse", res.best_gmse},
                       {"grid", grid}};
  write_text_file(fs::path(o.out) / "tune.json", result.dump(2) + "\n");
  write_text_file(fs::path(o.out) / "grid.csv", csv.str());
  write_run_manifest(o.out, "tune",
                     {{"dataset", o.dataset}, {"split", o.split}, {"solver", o.solver}, {"alpha_grid", o.alpha_grid},
                      {"beta_grid", o.beta_grid}, {"tol", o.tol}, {"max_iter", o.max_iter},
                      {"lambda_relax", o.lambda_relax}, {"limit", o.limit}});
  std::cout << "best alpha = " << num(res.best.alpha) << "\nbest beta = " << num(res.best.beta)
            << "\nmean gmse = " << num(res.best_gmse) << "\n";
  return exit_ok;
}

// ---- solve ----------------------------------------------------------------

struct SolveOpts {
  std::string dataset, split = "test", solver = "pds", config;
  double alpha = 1.0, beta = 0.1, gamma = 0.0, tol = 1e-6, lambda_relax = 1.5;
  int max_iter = 10000;
  std::string out;
  CLI::Option *alpha_opt = nullptr, *beta_opt = nullptr, *gamma_opt = nullptr, *tol_opt = nullptr,
              *iter_opt = nullptr, *lambda_opt = nullptr;
};

int cmd_solve(const SolveOpts& o, int threads) {
  const SolverKind kind = parse_solver_kind(o.solver);
  SolverConfig cfg;
  if (!o.config.empty()) cfg = load_tuned(o.config);
  if (o.alpha_opt->count()) cfg.alpha = o.alpha;
  if (o.beta_opt->count()) cfg.beta = o.beta;
  if (o.gamma_opt->count()) cfg.gamma = o.gamma;
  if (o.tol_opt->count()) cfg.tol = o.tol;
  if (o.iter_opt->count()) cfg.max_iter = o.max_iter;
  if (o.lambda_opt->count()) cfg.lambda_relax = o.lambda_relax;
  cfg.validate(kind == SolverKind::admm);
  const Dataset ds = load_dataset(o.dataset);
  const auto& samples = ds.split(parse_split(o.split));
  if (samples.empty()) throw DataError("split '" + o.split + "' is empty");
  std::vector<SolveResult> results;
  const auto est = solve_all(kind, cfg, samples, threads, &results);
  const json used = solver_config_json(kind, cfg, samples[0].num_nodes());
  write_estimates(fs::path(o.out) / "estimates.l2ge", est,
                  {{"source", "solver"}, {"solver", used}, {"dataset", o.dataset}, {"split", o.split}});
  std::ostringstream csv;
  csv << "index,gmse,iterations,converged\n";
  std::vector<double> errs;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Vector& w = samples[i].w.values();
    const double e = w.squaredNorm() > 0.0 ? normalized_sq_error(est[i], w) : kNaN;
    errs.push_back(e);
    csv << i << ',' << num(e) << ',' << results[i].iterations << ',' << (results[i].converged ? 1 : 0) << "\n";
  }
  std::ostringstream rep;
  rep << "solver = " << to_string(kind) << "\nsplit = " << o.split << "\nsamples = " << est.size() << "\n";
  report_summary(rep, "gmse", errs);
  write_text_file(fs::path(o.out) / "per_sample.csv", csv.str());
  write_text_file(fs::path(o.out) / "report.txt", rep.str());
  write_run_manifest(o.out, "solve", {{"dataset", o.dataset}, {"split", o.split}, {"solver", used}});
  std::cout << rep.str();
  return exit_ok;
}

// ---- train ----------------------------------------------------------------

struct TrainOpts {
  std::string dataset, model = "unroll", enhance = "last", init;
  int layers = 20;
  double alpha = 0.5, beta = 0.5, gamma = 0.1;
  TrainConfig cfg;
  VaeDims dims;
  std::string out;
  CLI::Option *alpha_opt = nullptr, *beta_opt = nullptr, *gamma_opt = nullptr, *enhance_opt = nullptr;
};

std::vector<int> parse_enhance(const std::string& s, int layers) {
  if (s == "last") return {layers - 1};
  if (s == "none") return {};
  if (s == "all") {
    std::vector<int> all(layers);
    for (int t = 0; t < layers; ++t) all[t] = t;
    return all;
  }
  std::vector<int> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    std::size_t used = 0;
    int t = 0;
    try {
      t = std::stoi(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || t < 1 || t > layers)
      throw ConfigError("--enhance expects last, none, all or 1-based layer numbers up to " +
                        std::to_string(layers) + ", got '" + s + "'");
    out.push_back(t - 1);
  }
  return out;
}

json model_spec_json(const Model::Spec& s) {
  json j = {{"kind", to_string(s.kind)}, {"num_nodes", s.num_nodes}, {"layers", s.layers},
            {"alpha", s.alpha},          {"beta", s.beta},           {"gamma", s.gamma},
            {"seed", s.seed}};
  if (s.kind == ModelKind::l2g) {
    j["enhanced_layers"] = s.enhanced_layers ? json(*s.enhanced_layers) : json();
    j["vae_dims"] = {{"nhid", s.vae_dims.nhid},
                     {"nhid2", s.vae_dims.nhid2},
                     {"emb_out", s.vae_dims.emb_out},
                     {"nlatent", s.vae_dims.nlatent}};
  }
  return j;
}

int cmd_train(TrainOpts o, int threads) {
  const Dataset ds = load_dataset(o.dataset);
  if (ds.train.empty() || ds.val.empty()) throw DataError("training needs non-empty train and val splits");
  Model::Spec spec;
  spec.kind = parse_model_kind(o.model);
  spec.num_nodes = ds.train[0].num_nodes();
  spec.layers = o.layers;
  if (spec.layers < 1) throw ConfigError("--layers must be >= 1");
  if (!o.init.empty()) {
    const SolverConfig tuned = load_tuned(o.init);
    spec.alpha = tuned.alpha;
    spec.beta = tuned.beta;
    spec.gamma = tuned.step_size(spec.num_nodes);
  }
  if (o.alpha_opt->count()) spec.alpha = o.alpha;
  if (o.beta_opt->count()) spec.beta = o.beta;
  if (o.gamma_opt->count()) spec.gamma = o.gamma;
  if (spec.kind == ModelKind::l2g) {
    spec.enhanced_layers = parse_enhance(o.enhance, spec.layers);
    o.dims.num_nodes = spec.num_nodes;
    spec.vae_dims = o.dims;
  } else if (o.enhance_opt->count() && o.enhance != "none") {
    throw ConfigError("--enhance applies to --model l2g only");
  }
  spec.seed = o.cfg.seed;
  o.cfg.threads = threads;
  o.cfg.validate();
  const Model init = Model::create(spec);

  const AuditReport audit = preflight_audit(init, o.cfg.seed);
  const json audit_json = {{"step", audit.step},
                           {"tolerance", audit.tolerance},
                           {"checked", audit.checked},
                           {"max_rel_error", audit.max_rel_error},
                           {"worst_param", audit.worst.param},
                           {"passed", audit.passed}};
  write_text_file(fs::path(o.out) / "audit.json", audit_json.dump(2) + "\n");

  std::string log;
  TrainConfig cfg = o.cfg;
  cfg.preflight_audit = false;  // already run above
  const auto result = train(ds.train, ds.val, init, cfg, [&](const EpochRecord& r) {
    log += r.to_line() + "\n";
    std::cerr << r.to_line() << "\n";
  });
  write_text_file(fs::path(o.out) / "train_log.jsonl", log);
  const json extra = {{"dataset", o.dataset}, {"dataset_config", ds.config.to_json()}, {"model_spec", model_spec_json(spec)}};
  save_checkpoint(fs::path(o.out) / "checkpoint.l2gc", result, cfg, extra);
  write_run_manifest(o.out, "train",
                     {{"dataset", o.dataset}, {"init", o.init}, {"model_spec", model_spec_json(spec)},
                      {"train_config", cfg.to_json()}});
  std::cout << "best epoch = " << result.best_epoch << "\nval gmse = " << num(result.best_val_gmse) << "\n";
  return exit_ok;
}

// ---- infer ----------------------------------------------------------------

struct InferOpts {
  std::string checkpoint, input, distances, dataset, split = "test", out;
  bool stochastic = false;
  std::uint64_t noise_seed = 0;
};

DistanceVector read_distance_matrix(const fs::path& path) {
  const TimeSeries t = read_timeseries_csv(path);
  if (t.values.rows() != t.values.cols()) throw DataError(path.string() + ": distance matrix must be square");
  Matrix d = t.values;
  d.diagonal().setZero();
  try {
    return DistanceVector(halfvec(d).values());
  } catch (const ValidationError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

int cmd_infer(const InferOpts& o, int threads) {
  const int sources = int(!o.input.empty()) + int(!o.distances.empty()) + int(!o.dataset.empty());
  if (sources != 1) throw ConfigError("infer needs exactly one of --input, --distances or --dataset");
  const Model model = load_checkpoint(o.checkpoint);
  const json options = {{"checkpoint", o.checkpoint}, {"input", o.input},           {"distances", o.distances},
                        {"dataset", o.dataset},       {"split", o.split},           {"stochastic", o.stochastic},
                        {"noise_seed", o.noise_seed}};
  if (!o.dataset.empty()) {
    const Dataset ds = load_dataset(o.dataset);
    const auto est = predict_all(model, ds.split(parse_split(o.split)), threads, o.stochastic, o.noise_seed);
    write_estimates(fs::path(o.out) / "estimates.l2ge", est,
                    {{"source", "checkpoint"}, {"checkpoint", o.checkpoint}, {"dataset", o.dataset}, {"split", o.split}});
    write_run_manifest(o.out, "infer", options);
    std::cout << "wrote " << est.size() << " estimates\n";
    return exit_ok;
  }
  std::vector<std::string> names;
  DistanceVector y = DistanceVector::zeros(2);
  if (!o.input.empty()) {
    const TimeSeries t = read_timeseries_csv(o.input);
    names = t.names;
    y = mean_sq_dist(t.values);
  } else {
    y = read_distance_matrix(o.distances);
  }
  const int m = y.num_nodes();
  if (m != model.num_nodes)
    throw DataError("model expects " + std::to_string(model.num_nodes) + " nodes, input has " + std::to_string(m));
  if (names.empty())
    for (int i = 0; i < m; ++i) names.push_back("node" + std::to_string(i));
  const Vector w = predict(model, y, o.noise_seed, o.stochastic).values();
  std::ostringstream csv;
  csv << "source,target,weight\n";
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const double v = w[edge_index(i, j, m)];
      if (v > 0.0) csv << names[i] << ',' << names[j] << ',' << num(v) << "\n";
    }
  write_text_file(fs::path(o.out) / "edges.csv", csv.str());
  write_estimates(fs::path(o.out) / "estimates.l2ge", {w}, {{"source", "checkpoint"}, {"checkpoint", o.checkpoint}});
  write_run_manifest(o.out, "infer", options);
  std::cout << "wrote edge list for " << m << " nodes\n";
  return exit_ok;
}

// ---- eval -----------------------------------------------------------------

struct EvalOpts {
  std::string dataset, split = "test", estimates, checkpoint, out;
  bool groundtruth = false;
  double eta = 1e-4;
  int ks_bootstrap = 200;
  std::uint64_t ks_seed = 0;
  int heatmap_index = 0;
};

int cmd_eval(const EvalOpts& o, int threads) {
  const int sources = int(!o.estimates.empty()) + int(!o.checkpoint.empty()) + int(o.groundtruth);
  if (sources != 1) throw ConfigError("eval needs exactly one of --estimates, --checkpoint or --groundtruth");
  const Dataset ds = load_dataset(o.dataset);
  const auto& samples = ds.split(parse_split(o.split));
  if (samples.empty()) throw DataError("split '" + o.split + "' is empty");
  std::vector<Vector> est;
  std::string source;
  if (o.groundtruth) {
    est = truth_vectors(samples);
    source = "groundtruth";
  } else if (!o.checkpoint.empty()) {
    est = predict_all(load_checkpoint(o.checkpoint), samples, threads);
    source = o.checkpoint;
  } else {
    est = read_estimates(o.estimates);
    source = o.estimates;
  }
  const SetEval e = evaluate_set(est, samples, o.eta, o.ks_bootstrap, o.ks_seed, threads);
  std::vector<Matrix> truth_graphs;
  for (const auto& s : samples) truth_graphs.push_back(binarize(s.w, o.eta));

  std::ostringstream rep;
  rep << "source = " << source << "\nsplit = " << o.split << "\nsamples = " << samples.size()
      << "\neta = " << num(o.eta) << "\nci = 1.96 * sample std / sqrt(count)\n";
  report_set(rep, "", e, o.ks_bootstrap, o.ks_seed);
  const fs::path out(o.out);
  write_text_file(out / "report.txt", rep.str());
  write_text_file(out / "per_sample.csv", per_sample_csv(e));
  write_text_file(out / "degree_hist.csv", degree_hist_csv(e.graphs, truth_graphs));
  if (o.heatmap_index < 0 || static_cast<std::size_t>(o.heatmap_index) >= samples.size())
    throw ConfigError("--heatmap-index out of range");
  write_text_file(out / "heatmap_estimate.csv", matrix_csv(unhalfvec(est[o.heatmap_index])));
  write_text_file(out / "heatmap_truth.csv", matrix_csv(unhalfvec(samples[o.heatmap_index].w)));
  write_run_manifest(o.out, "eval",
                     {{"dataset", o.dataset}, {"split", o.split}, {"estimates", o.estimates},
                      {"checkpoint", o.checkpoint}, {"groundtruth", o.groundtruth}, {"eta", o.eta},
                      {"ks_bootstrap", o.ks_bootstrap}, {"ks_seed", o.ks_seed}, {"heatmap_index", o.heatmap_index}});
  std::cout << rep.str();
  return exit_ok;
}

// ---- compare --------------------------------------------------------------

struct CompareOpts {
  std::string dataset, split = "test", models = "pds,admm,unroll,recurrent,l2g", out;
  std::vector<std::string> solver_configs, checkpoints;
  double eta = 1e-4;
  int ks_bootstrap = 200;
  std::uint64_t ks_seed = 0;
};

int cmd_compare(const CompareOpts& o, int threads) {
  const auto solver_cfgs = parse_pairs(o.solver_configs, "--solver-config");
  const auto ckpts = parse_pairs(o.checkpoints, "--checkpoint");
  std::vector<std::string> names;
  {
    std::istringstream in(o.models);
    std::string tok;
    while (std::getline(in, tok, ','))
      if (!tok.empty()) names.push_back(tok);
  }
  if (names.empty()) throw ConfigError("--models is empty");
  // Resolve every input before doing any work.
  for (const auto& n : names) {
    if (n == "groundtruth") continue;
    if (n == "pds" || n == "admm") {
      if (!solver_cfgs.count(n)) throw ConfigError("model '" + n + "' needs --solver-config " + n + "=tune.json");
      if (!fs::exists(solver_cfgs.at(n))) throw DataError("missing solver config " + solver_cfgs.at(n));
    } else {
      if (!ckpts.count(n)) throw ConfigError("model '" + n + "' needs --checkpoint " + n + "=PATH (compare never trains)");
      if (!fs::exists(ckpts.at(n))) throw DataError("missing checkpoint " + ckpts.at(n));
    }
  }
  const Dataset ds = load_dataset(o.dataset);
  const auto& samples = ds.split(parse_split(o.split));
  if (samples.empty()) throw DataError("split '" + o.split + "' is empty");

  std::ostringstream rep, table;
  rep << "split = " << o.split << "\nsamples = " << samples.size() << "\neta = " << num(o.eta) << "\n";
  table << "model,gmse,gmse_ci95,auc,auc_ci95,ks_score,clustering,clustering_ci95,avg_shortest_path,"
           "avg_shortest_path_ci95,modularity,modularity_ci95\n";
  for (const auto& n : names) {
    std::vector<Vector> est;
    if (n == "groundtruth") {
      est = truth_vectors(samples);
    } else if (n == "pds" || n == "admm") {
      est = solve_all(parse_solver_kind(n), load_tuned(solver_cfgs.at(n)), samples, threads);
    } else {
      est = predict_all(load_checkpoint(ckpts.at(n)), samples, threads);
    }
    const SetEval e = evaluate_set(est, samples, o.eta, o.ks_bootstrap, o.ks_seed, threads);
    report_set(rep, n + ".", e, o.ks_bootstrap, o.ks_seed);
    auto cell = [&](auto field) {
      const Summary s = summarize_finite(column(e, field));
      return num(s.mean) + "," + num(s.half_width);
    };
    table << n << ',' << cell(&SampleMetrics::gmse) << ',' << cell(&SampleMetrics::auc) << ',' << num(e.ks_score)
          << ',' << cell(&SampleMetrics::clustering) << ',' << cell(&SampleMetrics::avg_path) << ','
          << cell(&SampleMetrics::modularity) << "\n";
  }
  write_text_file(fs::path(o.out) / "table.csv", table.str());
  write_text_file(fs::path(o.out) / "report.txt", rep.str());
  write_run_manifest(o.out, "compare",
                     {{"dataset", o.dataset}, {"split", o.split}, {"models", o.models},
                      {"solver_configs", solver_cfgs}, {"checkpoints", ckpts}, {"eta", o.eta},
                      {"ks_bootstrap", o.ks_bootstrap}, {"ks_seed", o.ks_seed}});
  std::cout << table.str();
  return exit_ok;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Learning graph topologies from smooth signals"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "Worker thread cap")->check(CLI::PositiveNumber);
  app.fallthrough();

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic dataset");
  g->add_option("--family", gen.family, "ba, er, sbm or ws")->capture_default_str();
  g->add_option("--m", gen.m, "Number of nodes")->capture_default_str();
  g->add_option("--train", gen.n_train)->capture_default_str();
  g->add_option("--val", gen.n_val)->capture_default_str();
  g->add_option("--test", gen.n_test)->capture_default_str();
  g->add_option("--signals", gen.n_signals, "Signals per graph")->capture_default_str();
  g->add_option("--sigma", gen.sigma, "Signal noise level")->capture_default_str();
  g->add_option("--log-weight-std", gen.log_weight_std)->capture_default_str();
  g->add_option("--seed", gen.seed)->capture_default_str();
  gen.overrides["--ba-attach"] = g->add_option("--ba-attach", gen.ba_attach);
  gen.overrides["--er-prob"] = g->add_option("--er-prob", gen.er_prob);
  gen.overrides["--sbm-blocks"] = g->add_option("--sbm-blocks", gen.sbm_blocks);
  gen.overrides["--p-in"] = g->add_option("--p-in", gen.p_in);
  gen.overrides["--p-out"] = g->add_option("--p-out", gen.p_out);
  gen.overrides["--ws-k"] = g->add_option("--ws-k", gen.ws_k);
  gen.overrides["--ws-p"] = g->add_option("--ws-p", gen.ws_p);
  gen.overrides["--density-min"] = g->add_option("--density-min", gen.density_min);
  gen.overrides["--density-max"] = g->add_option("--density-max", gen.density_max);
  g->add_option("--out", gen.out, "Output directory")->required();

  TuneOpts tune;
  auto* t = app.add_subcommand("tune", "Grid-search solver hyperparameters");
  t->add_option("--dataset", tune.dataset)->required();
  t->add_option("--split", tune.split)->capture_default_str();
  t->add_option("--solver", tune.solver)->capture_default_str();
  t->add_option("--alpha-grid", tune.alpha_grid, "lo:hi:points in powers of ten")->capture_default_str();
  t->add_option("--beta-grid", tune.beta_grid, "lo:hi:points in powers of ten")->capture_default_str();
  t->add_option("--tol", tune.tol)->capture_default_str();
  t->add_option("--max-iter", tune.max_iter)->capture_default_str();
  t->add_option("--lambda", tune.lambda_relax, "ADMM relaxation")->capture_default_str();
  t->add_option("--limit", tune.limit, "Use only the first N samples (0 = all)")->capture_default_str();
  t->add_option("--out", tune.out)->required();

  SolveOpts sol;
  auto* s = app.add_subcommand("solve", "Solve every sample of a split with PDS or ADMM");
  s->add_option("--dataset", sol.dataset)->required();
  s->add_option("--split", sol.split)->capture_default_str();
  s->add_option("--solver", sol.solver)->capture_default_str();
  s->add_option("--config", sol.config, "tune.json with the selected hyperparameters");
  sol.alpha_opt = s->add_option("--alpha", sol.alpha);
  sol.beta_opt = s->add_option("--beta", sol.beta);
  sol.gamma_opt = s->add_option("--gamma", sol.gamma);
  sol.tol_opt = s->add_option("--tol", sol.tol);
  sol.iter_opt = s->add_option("--max-iter", sol.max_iter);
  sol.lambda_opt = s->add_option("--lambda", sol.lambda_relax);
  s->add_option("--out", sol.out)->required();

  TrainOpts tr;
  auto* r = app.add_subcommand("train", "Train an unrolled model");
  r->add_option("--dataset", tr.dataset)->required();
  r->add_option("--model", tr.model, "unroll, recurrent or l2g")->capture_default_str();
  r->add_option("--layers", tr.layers)->capture_default_str();
  tr.enhance_opt = r->add_option("--enhance", tr.enhance, "last, none, all or 1-based layer list")->capture_default_str();
  r->add_option("--init", tr.init, "tune.json used to initialise alpha, beta and gamma");
  tr.alpha_opt = r->add_option("--alpha", tr.alpha);
  tr.beta_opt = r->add_option("--beta", tr.beta);
  tr.gamma_opt = r->add_option("--gamma", tr.gamma);
  r->add_option("--lr0", tr.cfg.lr0)->capture_default_str();
  r->add_option("--lr-decay", tr.cfg.lr_decay)->capture_default_str();
  r->add_option("--batch-size", tr.cfg.batch_size)->capture_default_str();
  r->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  r->add_option("--patience", tr.cfg.patience, "0 disables early stopping")->capture_default_str();
  r->add_option("--tau", tr.cfg.tau)->capture_default_str();
  r->add_option("--beta-kl", tr.cfg.beta_kl)->capture_default_str();
  r->add_option("--seed", tr.cfg.seed)->capture_default_str();
  r->add_option("--nhid", tr.dims.nhid)->capture_default_str();
  r->add_option("--nhid2", tr.dims.nhid2)->capture_default_str();
  r->add_option("--emb-out", tr.dims.emb_out)->capture_default_str();
  r->add_option("--nlatent", tr.dims.nlatent)->capture_default_str();
  r->add_option("--out", tr.out)->required();

  InferOpts inf;
  auto* i = app.add_subcommand("infer", "Estimate graphs with a trained checkpoint");
  i->add_option("--checkpoint", inf.checkpoint)->required();
  i->add_option("--input", inf.input, "CSV time series, rows = entities, columns = time points");
  i->add_option("--distances", inf.distances, "CSV square matrix of mean squared distances");
  i->add_option("--dataset", inf.dataset);
  i->add_option("--split", inf.split)->capture_default_str();
  i->add_flag("--stochastic", inf.stochastic, "Sample the latent instead of using its prior mean");
  i->add_option("--noise-seed", inf.noise_seed)->capture_default_str();
  i->add_option("--out", inf.out)->required();

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "Evaluate estimates against the groundtruth");
  e->add_option("--dataset", ev.dataset)->required();
  e->add_option("--split", ev.split)->capture_default_str();
  e->add_option("--estimates", ev.estimates);
  e->add_option("--checkpoint", ev.checkpoint);
  e->add_flag("--groundtruth", ev.groundtruth, "Report structure statistics of the groundtruth graphs");
  e->add_option("--eta", ev.eta, "Edge threshold for binarisation")->capture_default_str();
  e->add_option("--ks-bootstrap", ev.ks_bootstrap)->capture_default_str();
  e->add_option("--ks-seed", ev.ks_seed)->capture_default_str();
  e->add_option("--heatmap-index", ev.heatmap_index)->capture_default_str();
  e->add_option("--out", ev.out)->required();

  CompareOpts cmp;
  auto* c = app.add_subcommand("compare", "Tabulate metrics of tuned solvers and trained checkpoints");
  c->add_option("--dataset", cmp.dataset)->required();
  c->add_option("--split", cmp.split)->capture_default_str();
  c->add_option("--models", cmp.models)->capture_default_str();
  c->add_option("--solver-config", cmp.solver_configs, "NAME=tune.json for pds/admm");
  c->add_option("--checkpoint", cmp.checkpoints, "NAME=checkpoint for trained models");
  c->add_option("--eta", cmp.eta)->capture_default_str();
  c->add_option("--ks-bootstrap", cmp.ks_bootstrap)->capture_default_str();
  c->add_option("--ks-seed", cmp.ks_seed)->capture_default_str();
  c->add_option("--out", cmp.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*g) return cmd_generate(gen, threads);
    if (*t) return cmd_tune(tune, threads);
    if (*s) return cmd_solve(sol, threads);
    if (*r) return cmd_train(tr, threads);
    if (*i) return cmd_infer(inf, threads);
    if (*e) return cmd_eval(ev, threads);
    if (*c) return cmd_compare(cmp, threads);
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what() << "\n";
    return exit_numeric;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return exit_data;
  } catch (const ValidationError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return exit_data;
  } catch (const ConfigError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return exit_usage;
  } catch (const nlohmann::json::exception& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return exit_data;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return exit_failure;
  }
  return exit_usage;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace l2g
