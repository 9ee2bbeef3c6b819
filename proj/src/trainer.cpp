#include "l2g/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "l2g/datagen.hpp"
#include "l2g/error.hpp"
#include "l2g/metrics.hpp"
#include "l2g/parallel.hpp"
#include "l2g/random.hpp"

namespace l2g {

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("train: lr0 must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("train: lr_decay must lie in (0, 1]");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (patience < 0) throw ConfigError("train: patience must be >= 0");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("train: tau must lie in (0, 1]");
  if (!(beta_kl >= 0.0)) throw ConfigError("train: beta_kl must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0))
    throw ConfigError("train: invalid Adam constants");
}

double TrainConfig::lr_at(int epoch) const { return lr0 * std::pow(lr_decay, epoch); }

nlohmann::json TrainConfig::to_json() const {
  return {{"lr0", lr0},           {"lr_decay", lr_decay},     {"batch_size", batch_size},
          {"epochs", epochs},     {"patience", patience},     {"tau", tau},
          {"beta_kl", beta_kl},   {"seed", seed},             {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2}, {"adam_eps", adam_eps}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr0 = j.value("lr0", c.lr0);
  c.lr_decay = j.value("lr_decay", c.lr_decay);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.patience = j.value("patience", c.patience);
  c.tau = j.value("tau", c.tau);
  c.beta_kl = j.value("beta_kl", c.beta_kl);
  c.seed = j.value("seed", c.seed);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  return c;
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state, double lr,
               const TrainConfig& cfg) {
  if (params.size() != grads.size()) throw ConfigError("adam: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols())
      throw ConfigError("adam: shape mismatch for parameter " + std::to_string(i));
    if (!grads[i].allFinite()) throw NumericError("adam: non-finite gradient in parameter " + std::to_string(i));
  }
  if (state.first.empty()) {
    for (const auto& g : grads) {
      state.first.push_back(Matrix::Zero(g.rows(), g.cols()));
      state.second.push_back(Matrix::Zero(g.rows(), g.cols()));
    }
  }
  ++state.step;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, double(state.step));
  const double c2 = 1.0 - std::pow(b2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.first[i] = b1 * state.first[i] + (1.0 - b1) * grads[i];
    state.second[i] = b2 * state.second[i] + (1.0 - b2) * grads[i].cwiseAbs2();
    const auto m_hat = state.first[i].array() / c1;
    const auto v_hat = state.second[i].array() / c2;
    params[i]->array() -= lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
  }
}

LossAndGrad loss_and_grad(const Model& model, const GraphSample& sample, double tau, double beta_kl,
                          std::uint64_t noise_seed) {
  GradientContext ctx(model, true);
  ForwardOptions opt;
  opt.mode = Mode::train;
  opt.groundtruth = &sample.w;
  opt.noise_seed = noise_seed;
  const auto trace = forward(ctx, sample.y, opt);
  const ad::Var l = loss(ctx, trace, sample.w, tau, beta_kl);
  LossAndGrad out;
  out.loss = l.value()(0, 0);
  out.grads = gradients(ctx, l);
  return out;
}

double sample_loss(const Model& model, const GraphSample& sample, double tau, double beta_kl,
                   std::uint64_t noise_seed) {
  GradientContext ctx(model, false);
  ForwardOptions opt;
  opt.mode = Mode::train;
  opt.groundtruth = &sample.w;
  opt.noise_seed = noise_seed;
  const auto trace = forward(ctx, sample.y, opt);
  return loss(ctx, trace, sample.w, tau, beta_kl).value()(0, 0);
}

double evaluate_gmse(const Model& model, std::span<const GraphSample> samples, int threads) {
  if (samples.empty()) throw ValidationError("evaluate_gmse: no samples");
  std::vector<Vector> est(samples.size()), truth(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    est[i] = predict(model, samples[i].y).values();
    truth[i] = samples[i].w.values();
  });
  return gmse(est, truth);
}

std::vector<double> layerwise_gmse(const Model& model, std::span<const GraphSample> samples, int threads) {
  if (samples.empty()) throw ValidationError("layerwise_gmse: no samples");
  const int layers = model.unroll.layers();
  std::vector<std::vector<double>> per(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const auto ws = predict_layers(model, samples[i].y);
    for (const auto& w : ws) per[i].push_back(normalized_sq_error(w, samples[i].w.values()));
  });
  std::vector<double> out(layers, 0.0);
  for (const auto& p : per)
    for (int t = 0; t < layers; ++t) out[t] += p[t] / double(samples.size());
  return out;
}

std::string EpochRecord::to_line() const {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "{\"epoch\": %d, \"lr\": %.17g, \"train_loss\": %.17g, \"val_gmse\": %.17g}",
                epoch, lr, train_loss, val_gmse);
  return buf;
}

TrainResult train(std::span<const GraphSample> train_set, std::span<const GraphSample> val_set, Model init,
                  const TrainConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("train: empty training split");
  if (val_set.empty()) throw ConfigError("train: empty validation split");
  init.validate();
  if (cfg.preflight_audit) preflight_audit(init, cfg.seed);

  Model model = std::move(init);
  TrainResult result;
  result.model = model;
  AdamState adam;
  std::vector<Matrix*> params;
  for (auto& [name, m] : model.parameters()) params.push_back(m);

  std::vector<std::size_t> order(train_set.size());
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    std::iota(order.begin(), order.end(), 0);
    auto shuffle_rng = make_rng(cfg.seed, {static_cast<std::uint64_t>(epoch), 0x5u});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      std::vector<LossAndGrad> parts(n);
      parallel_for(n, cfg.threads, [&](std::size_t b) {
        const std::size_t idx = order[start + b];
        parts[b] = loss_and_grad(model, train_set[idx], cfg.tau, cfg.beta_kl,
                                 derive_seed(cfg.seed, {static_cast<std::uint64_t>(epoch), idx, 0xbu}));
      });
      std::vector<Matrix> grad = parts[0].grads;
      double batch_loss = parts[0].loss;
      for (std::size_t b = 1; b < n; ++b) {
        batch_loss += parts[b].loss;
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += parts[b].grads[k];
      }
      if (!std::isfinite(batch_loss)) throw NumericError("train: non-finite loss", epoch);
      for (auto& g : grad) g /= double(n);
      adam_step(params, grad, adam, lr, cfg);
      loss_sum += batch_loss;
    }

    EpochRecord rec{epoch, lr, loss_sum / double(train_set.size()), evaluate_gmse(model, val_set, cfg.threads)};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (result.best_epoch < 0 || rec.val_gmse < result.best_val_gmse) {
      result.best_epoch = epoch;
      result.best_val_gmse = rec.val_gmse;
      result.model = model;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

double audit_relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

AuditReport finite_diff_audit(const Model& model, const GraphSample& sample, double step, double tolerance,
                              double tau, double beta_kl, std::uint64_t noise_seed,
                              const std::function<void(std::vector<Matrix>&)>& corrupt) {
  if (!(step > 0.0)) throw ConfigError("audit: step must be > 0");
  auto analytic = loss_and_grad(model, sample, tau, beta_kl, noise_seed).grads;
  if (corrupt) corrupt(analytic);
  AuditReport report;
  report.step = step;
  report.tolerance = tolerance;
  Model probe = model;
  auto params = probe.parameters();
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = *params[k].second;
    for (Eigen::Index i = 0; i < p.rows(); ++i)
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const double saved = p(i, j);
        p(i, j) = saved + step;
        const double up = sample_loss(probe, sample, tau, beta_kl, noise_seed);
        p(i, j) = saved - step;
        const double down = sample_loss(probe, sample, tau, beta_kl, noise_seed);
        p(i, j) = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double err = audit_relative_error(analytic[k](i, j), numeric);
        ++report.checked;
        if (err > report.max_rel_error || report.checked == 1) {
          report.max_rel_error = err;
          report.worst = {params[k].first, i, j, analytic[k](i, j), numeric, err};
        }
      }
  }
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

std::string config_digest(const TrainConfig& cfg) { return fnv1a_hex(cfg.to_json().dump()); }

Container make_checkpoint(const TrainResult& result, const TrainConfig& cfg, const nlohmann::json& extra) {
  nlohmann::json info = extra;
  info["train_config"] = cfg.to_json();
  info["config_digest"] = config_digest(cfg);
  info["epoch"] = result.best_epoch;
  info["val_gmse"] = result.best_val_gmse;
  return to_container(result.model, info);
}

void save_checkpoint(const std::filesystem::path& path, const TrainResult& result, const TrainConfig& cfg,
                     const nlohmann::json& extra) {
  write_container(path, make_checkpoint(result, cfg, extra));
}

Model load_checkpoint(const std::filesystem::path& path) { return model_from_container(read_container(path)); }

AuditReport preflight_audit(const Model& model, std::uint64_t seed) {
  Model::Spec spec;
  spec.kind = model.kind;
  spec.num_nodes = 6;
  spec.layers = 3;
  spec.alpha = model.unroll.alpha(0);
  spec.beta = model.unroll.beta(0);
  spec.gamma = model.unroll.gamma(0);
  spec.seed = seed;
  if (model.kind == ModelKind::l2g) {
    spec.enhanced_layers = std::vector<int>{2};
    spec.vae_dims = {6, 8, 16, 8, 4};
  }
  const Model small = Model::create(spec);
  DatasetConfig dc;
  dc.spec = GraphFamilySpec::defaults(GraphFamily::er, 6);
  dc.spec.er_prob = 0.5;
  dc.spec.density_min = 0.2;
  dc.spec.density_max = 0.8;
  dc.n_signals = 50;
  dc.seed = seed;
  // Isolated nodes give signal variances near 1/sigma^2; such scales put
  // relu kinks inside the finite-difference step.
  GraphSample sample;
  for (int i = 0;; ++i) {
    bool connected = false;
    sample = make_sample(dc, Split::train, i, &connected);
    if (connected) break;
    if (i > 1000) throw DataError("pre-flight audit: no connected sample found");
  }
  auto report = finite_diff_audit(small, sample, 1e-5, 1e-4, 0.9, 1.0, seed);
  if (!report.passed)
    throw NumericError("pre-flight gradient audit failed: max relative error " +
                       std::to_string(report.max_rel_error) + " at " + report.worst.param);
  return report;
}

}  // namespace l2g
