#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "l2g/container.hpp"
#include "l2g/sample.hpp"
#include "l2g/unroll_net.hpp"

namespace l2g {

struct TrainConfig {
  double lr0 = 1e-2;
  double lr_decay = 0.95;
  int batch_size = 32;
  int epochs = 200;
  /// Stop after this many epochs without a validation improvement; 0 disables.
  int patience = 20;
  double tau = 0.9;
  double beta_kl = 1.0;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int threads = 1;
  bool preflight_audit = true;

  void validate() const;
  /// lr0 * lr_decay^epoch, epochs counted from 0.
  double lr_at(int epoch) const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct AdamState {
  std::vector<Matrix> first;
  std::vector<Matrix> second;
  long step = 0;
};

/// One bias-corrected Adam update. Throws NumericError on non-finite gradients.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state, double lr,
               const TrainConfig& cfg);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<Matrix> grads;
};

/// Training-mode loss of one sample and its gradient w.r.t. every parameter.
LossAndGrad loss_and_grad(const Model& model, const GraphSample& sample, double tau, double beta_kl,
                          std::uint64_t noise_seed);
double sample_loss(const Model& model, const GraphSample& sample, double tau, double beta_kl,
                   std::uint64_t noise_seed);

/// GMSE of the projected final-layer estimates.
double evaluate_gmse(const Model& model, std::span<const GraphSample> samples, int threads = 1);
/// Mean GMSE of every layer's projected estimate (index t -> layer t + 1).
std::vector<double> layerwise_gmse(const Model& model, std::span<const GraphSample> samples, int threads = 1);

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_gmse = 0.0;

  /// One line of the training log.
  std::string to_line() const;
};

struct TrainResult {
  Model model;  // parameters of the best validation epoch
  int best_epoch = -1;
  double best_val_gmse = 0.0;
  std::vector<EpochRecord> history;
};

TrainResult train(std::span<const GraphSample> train_set, std::span<const GraphSample> val_set, Model init,
                  const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch = {});

struct AuditEntry {
  std::string param;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct AuditReport {
  double step = 0.0;
  double tolerance = 0.0;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
  AuditEntry worst;
};

/// Relative error |a - n| / max(|a|, |n|, floor).
double audit_relative_error(double analytic, double numeric, double floor = 1e-6);

/// Central finite differences against the analytic gradient for every
/// parameter entry. `corrupt` (test hook) may alter the analytic gradients.
AuditReport finite_diff_audit(const Model& model, const GraphSample& sample, double step, double tolerance,
                              double tau = 0.9, double beta_kl = 1.0, std::uint64_t noise_seed = 0,
                              const std::function<void(std::vector<Matrix>&)>& corrupt = {});

/// Hex digest of the training configuration as stored in checkpoints.
std::string config_digest(const TrainConfig& cfg);

/// Checkpoint of the selected model; the manifest records the training
/// config, its digest, the selected epoch and its validation GMSE.
Container make_checkpoint(const TrainResult& result, const TrainConfig& cfg,
                          const nlohmann::json& extra = nlohmann::json::object());
void save_checkpoint(const std::filesystem::path& path, const TrainResult& result, const TrainConfig& cfg,
                     const nlohmann::json& extra = nlohmann::json::object());
Model load_checkpoint(const std::filesystem::path& path);

/// Builds a small model of the same kind (m = 6, T = 3) on a synthetic
/// sample and audits it. Throws NumericError when the audit fails.
AuditReport preflight_audit(const Model& model, std::uint64_t seed);

}  // namespace l2g
