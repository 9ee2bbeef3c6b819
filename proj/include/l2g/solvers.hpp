#pragma once

// Iterative solvers for
//   min_w  2 w'y - alpha * 1' log(D w) + beta * ||w||^2   s.t. w >= 0.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "l2g/graph_core.hpp"
#include "l2g/sample.hpp"

namespace l2g {

enum class SolverKind { pds, admm };

SolverKind parse_solver_kind(const std::string& name);
std::string to_string(SolverKind kind);

struct SolverConfig {
  double alpha = 1.0;
  double beta = 0.1;
  /// Step size. When unset, 0.9 / (2 beta + sqrt(2 (m - 1))).
  std::optional<double> gamma;
  double tol = 1e-6;
  int max_iter = 10000;
  /// ADMM over-relaxation, constant across iterations.
  double lambda_relax = 1.5;
  bool record_objective = false;

  /// Throws ConfigError on out-of-range values.
  void validate(bool admm = false) const;
  double step_size(int m) const;
};

double default_step_size(double beta, int m);

struct SolveResult {
  EdgeVector w;
  Vector v_dual;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

/// Objective value; +inf when w has a negative entry or a node has zero degree.
double objective(const Vector& w, const DistanceVector& y, double alpha, double beta);

/// Projection onto the nonnegative orthant.
Vector prox_nonneg(const Vector& r);

/// Dual proximal step of the log-barrier: (r - sqrt(r^2 + 4 alpha gamma)) / 2.
Vector prox_dual_logbarrier(const Vector& r, double alpha, double gamma);
/// Primal companion (r + sqrt(r^2 + 4 alpha gamma)) / 2, the prox of gamma * (-alpha log).
Vector prox_logbarrier(const Vector& r, double alpha, double gamma);

/// Primal/dual iterate of the forward-backward-forward scheme.
struct PdsState {
  Vector w;
  Vector v;
};

/// One PDS sweep from `state`, without projection of the returned primal.
PdsState pds_step(const PdsState& state, const Vector& y, int m, double alpha, double beta,
                  double gamma);

/// `iterations` raw PDS sweeps from zero. The primal is not projected.
PdsState pds_iterate(const DistanceVector& y, double alpha, double beta, double gamma,
                     int iterations);

/// Runs PDS from w = v = 0 until ||w_t - w_{t-1}||_inf <= tol or max_iter.
/// The returned primal is projected onto w >= 0.
SolveResult pds_solve(const DistanceVector& y, const SolverConfig& cfg);

/// Relaxed primal-dual (ADMM-type) iteration with constant lambda_relax. Stops
/// when both the primal and the dual change fall below tol.
SolveResult admm_solve(const DistanceVector& y, const SolverConfig& cfg);

SolveResult solve(SolverKind kind, const DistanceVector& y, const SolverConfig& cfg);

struct GridPoint {
  double alpha;
  double beta;
  double mean_gmse;  // NaN when the configuration failed
  bool failed;
};

struct GridSearchResult {
  SolverConfig best;
  double best_gmse;
  std::vector<GridPoint> grid;
};

/// Log-spaced grid 10^lo .. 10^hi with `points` entries.
std::vector<double> log_grid(double lo_exp, double hi_exp, int points);

/// Exhaustive (alpha, beta) search minimising mean GMSE over `train`.
/// Ties go to the smaller alpha, then the smaller beta.
GridSearchResult grid_search(std::span<const GraphSample> train, std::vector<double> alpha_grid,
                             std::vector<double> beta_grid, SolverKind kind,
                             const SolverConfig& base, int threads = 1);

}  // namespace l2g
