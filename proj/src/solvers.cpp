#include "l2g/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "l2g/metrics.hpp"
#include "l2g/parallel.hpp"

namespace l2g {

SolverKind parse_solver_kind(const std::string& name) {
  if (name == "pds") return SolverKind::pds;
  if (name == "admm") return SolverKind::admm;
  throw ConfigError("unknown solver '" + name + "' (expected pds or admm)");
}

std::string to_string(SolverKind kind) { return kind == SolverKind::pds ? "pds" : "admm"; }

double default_step_size(double beta, int m) {
  return 0.9 / (2.0 * beta + std::sqrt(2.0 * (m - 1)));
}

void SolverConfig::validate(bool admm) const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
  if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
  if (gamma && !(*gamma > 0.0)) throw ConfigError("gamma must be > 0");
  if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
  if (max_iter < 1) throw ConfigError("max_iter must be >= 1");
  if (admm && !(lambda_relax >= 1.5 && lambda_relax <= 2.0))
    throw ConfigError("lambda_relax must lie in [1.5, 2]");
}

double SolverConfig::step_size(int m) const { return gamma ? *gamma : default_step_size(beta, m); }

double objective(const Vector& w, const DistanceVector& y, double alpha, double beta) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (w.size() != y.size()) throw ValidationError("objective: length mismatch");
  if (w.size() > 0 && w.minCoeff() < 0.0) return inf;
  const Vector d = degree_apply(w, y.num_nodes());
  if (d.minCoeff() <= 0.0) return inf;
  return 2.0 * w.dot(y.values()) - alpha * d.array().log().sum() + beta * w.squaredNorm();
}

Vector prox_nonneg(const Vector& r) { return r.cwiseMax(0.0); }

Vector prox_dual_logbarrier(const Vector& r, double alpha, double gamma) {
  if (!(alpha > 0.0) || !(gamma > 0.0)) throw ConfigError("prox_dual_logbarrier: alpha and gamma must be > 0");
  return 0.5 * (r.array() - (r.array().square() + 4.0 * alpha * gamma).sqrt()).matrix();
}

Vector prox_logbarrier(const Vector& r, double alpha, double gamma) {
  if (!(alpha > 0.0) || !(gamma > 0.0)) throw ConfigError("prox_logbarrier: alpha and gamma must be > 0");
  return 0.5 * (r.array() + (r.array().square() + 4.0 * alpha * gamma).sqrt()).matrix();
}

PdsState pds_step(const PdsState& s, const Vector& y, int m, double alpha, double beta,
                  double gamma) {
  const Vector r1 = s.w - gamma * (2.0 * beta * s.w + 2.0 * y + degree_adjoint(s.v));
  const Vector r2 = s.v + gamma * degree_apply(s.w, m);
  const Vector p1 = r1.cwiseMax(0.0);
  const Vector p2 = 0.5 * (r2.array() - (r2.array().square() + 4.0 * alpha * gamma).sqrt()).matrix();
  const Vector q1 = p1 - gamma * (2.0 * beta * p1 + 2.0 * y + degree_adjoint(p2));
  const Vector q2 = p2 + gamma * degree_apply(p1, m);
  return {s.w - r1 + q1, s.v - r2 + q2};
}

PdsState pds_iterate(const DistanceVector& y, double alpha, double beta, double gamma,
                     int iterations) {
  const int m = y.num_nodes();
  PdsState s{Vector::Zero(y.size()), Vector::Zero(m)};
  for (int t = 0; t < iterations; ++t) s = pds_step(s, y.values(), m, alpha, beta, gamma);
  return s;
}

namespace {

void check_finite(const PdsState& s, int iteration) {
  if (!s.w.allFinite() || !s.v.allFinite()) throw NumericError("solver diverged", iteration);
}

}  // namespace

SolveResult pds_solve(const DistanceVector& y, const SolverConfig& cfg) {
  cfg.validate();
  const int m = y.num_nodes();
  const double gamma = cfg.step_size(m);
  PdsState s{Vector::Zero(y.size()), Vector::Zero(m)};
  SolveResult out;
  for (int t = 1; t <= cfg.max_iter; ++t) {
    PdsState next = pds_step(s, y.values(), m, cfg.alpha, cfg.beta, gamma);
    check_finite(next, t);
    const double change = (next.w - s.w).lpNorm<Eigen::Infinity>();
    s = std::move(next);
    out.iterations = t;
    if (cfg.record_objective) out.objective_trace.push_back(objective(prox_nonneg(s.w), y, cfg.alpha, cfg.beta));
    if (change <= cfg.tol) {
      out.converged = true;
      break;
    }
  }
  out.w = EdgeVector(prox_nonneg(s.w));
  out.v_dual = std::move(s.v);
  return out;
}

SolveResult admm_solve(const DistanceVector& y, const SolverConfig& cfg) {
  cfg.validate(true);
  const int m = y.num_nodes();
  const double gamma = cfg.step_size(m);
  const double lambda = cfg.lambda_relax;
  const Vector& yv = y.values();
  Vector w = Vector::Zero(y.size());
  Vector v = Vector::Zero(m);
  SolveResult out;
  for (int t = 1; t <= cfg.max_iter; ++t) {
    const Vector r1 = w - gamma * (2.0 * cfg.beta * w + 2.0 * yv + degree_adjoint(v));
    const Vector p1 = r1.cwiseMax(0.0);
    // Dual step is taken at the extrapolated projected primal 2 p1 - w.
    const Vector r2 = v + gamma * degree_apply(2.0 * p1 - w, m);
    const Vector p2 = prox_dual_logbarrier(r2, cfg.alpha, gamma);
    Vector w_next = w + lambda * (p1 - w);
    Vector v_next = v + lambda * (p2 - v);
    if (!w_next.allFinite() || !v_next.allFinite()) throw NumericError("solver diverged", t);
    // The projected primal can sit still while the dual moves (e.g. at w = 0
    // on the first sweep), so both changes enter the stopping test.
    const double change =
        std::max((w_next - w).lpNorm<Eigen::Infinity>(), (v_next - v).lpNorm<Eigen::Infinity>());
    w = std::move(w_next);
    v = std::move(v_next);
    out.iterations = t;
    if (cfg.record_objective) out.objective_trace.push_back(objective(prox_nonneg(w), y, cfg.alpha, cfg.beta));
    if (change <= cfg.tol) {
      out.converged = true;
      break;
    }
  }
  out.w = EdgeVector(prox_nonneg(w));
  out.v_dual = std::move(v);
  return out;
}

SolveResult solve(SolverKind kind, const DistanceVector& y, const SolverConfig& cfg) {
  return kind == SolverKind::pds ? pds_solve(y, cfg) : admm_solve(y, cfg);
}

std::vector<double> log_grid(double lo_exp, double hi_exp, int points) {
  if (points < 1) throw ConfigError("log_grid: need at least one point");
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) {
    const double e = points == 1 ? lo_exp : lo_exp + (hi_exp - lo_exp) * i / (points - 1);
    g[i] = std::pow(10.0, e);
  }
  return g;
}

GridSearchResult grid_search(std::span<const GraphSample> train, std::vector<double> alpha_grid,
                             std::vector<double> beta_grid, SolverKind kind,
                             const SolverConfig& base, int threads) {
  if (train.empty()) throw ConfigError("grid_search: empty training set");
  if (alpha_grid.empty() || beta_grid.empty()) throw ConfigError("grid_search: empty grid");
  std::sort(alpha_grid.begin(), alpha_grid.end());
  std::sort(beta_grid.begin(), beta_grid.end());

  GridSearchResult result;
  for (double a : alpha_grid)
    for (double b : beta_grid) result.grid.push_back({a, b, std::numeric_limits<double>::quiet_NaN(), false});

  parallel_for(result.grid.size(), threads, [&](std::size_t g) {
    auto& point = result.grid[g];
    SolverConfig cfg = base;
    cfg.alpha = point.alpha;
    cfg.beta = point.beta;
    try {
      double total = 0.0;
      for (const auto& s : train) total += normalized_sq_error(solve(kind, s.y, cfg).w.values(), s.w.values());
      point.mean_gmse = total / double(train.size());
    } catch (const NumericError&) {
      point.failed = true;
    }
  });

  const GridPoint* best = nullptr;
  for (const auto& p : result.grid)
    if (!p.failed && (best == nullptr || p.mean_gmse < best->mean_gmse)) best = &p;
  if (best == nullptr) {
    std::ostringstream msg;
    msg << "grid_search: every configuration diverged; tried alpha {";
    for (double a : alpha_grid) msg << ' ' << a;
    msg << " } x beta {";
    for (double b : beta_grid) msg << ' ' << b;
    msg << " }";
    throw NumericError(msg.str());
  }
  result.best = base;
  result.best.alpha = best->alpha;
  result.best.beta = best->beta;
  result.best_gmse = best->mean_gmse;
  return result;
}

}  // namespace l2g
