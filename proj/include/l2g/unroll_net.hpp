#pragma once

// Unrolled primal-dual network. Layer t maps (w, v) to (w', v') with
//   r1 = w - gamma_t (2 beta_t w + 2y + D^T v)
//   r2 = v + gamma_t D w
//   p1 = relu(r1), or the TopoDiffVAE output on enhanced layers
//   p2 = (r2 - sqrt(r2^2 + 4 alpha_t gamma_t)) / 2
//   q1 = p1 - gamma_t (2 beta_t p1 + 2y + D^T p2)
//   q2 = p2 + gamma_t D p1
//   w' = w - r1 + q1,  v' = v - r2 + q2
// with alpha_t, beta_t, gamma_t = softplus(raw_*).

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "l2g/autodiff.hpp"
#include "l2g/container.hpp"
#include "l2g/graph_core.hpp"
#include "l2g/topodiffvae.hpp"

namespace l2g {

enum class ModelKind { unrolling, recurrent, l2g };

ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind kind);

struct UnrollParams {
  Matrix raw_alpha;  // T x 1, or 1 x 1 when shared
  Matrix raw_beta;
  Matrix raw_gamma;
  bool shared = false;
  std::vector<bool> enhancement_mask;  // length T

  /// Raw values chosen so that softplus gives (alpha, beta, gamma) on every layer.
  static UnrollParams init(int layers, bool shared, double alpha, double beta, double gamma);

  int layers() const { return static_cast<int>(enhancement_mask.size()); }
  double alpha(int t) const;
  double beta(int t) const;
  double gamma(int t) const;
  bool any_enhanced() const;
  void validate() const;
};

struct Model {
  ModelKind kind = ModelKind::unrolling;
  int num_nodes = 0;
  UnrollParams unroll;
  std::optional<VaeParams> vae;

  struct Spec {
    ModelKind kind = ModelKind::unrolling;
    int num_nodes = 20;
    int layers = 20;
    double alpha = 0.5;
    double beta = 0.5;
    double gamma = 0.1;
    /// Enhanced layer indices for l2g; defaults to the last layer.
    std::optional<std::vector<int>> enhanced_layers;
    VaeDims vae_dims;
    std::uint64_t seed = 0;
  };
  static Model create(const Spec& spec);

  /// Trainable arrays in a fixed order with stable names.
  std::vector<std::pair<std::string, Matrix*>> parameters();
  std::vector<std::pair<std::string, const Matrix*>> parameters() const;
  std::size_t parameter_count() const;
  void validate() const;
};

struct ForwardOptions {
  Mode mode = Mode::infer;
  /// Required in train mode when any layer is enhanced; forbidden in infer mode.
  const EdgeVector* groundtruth = nullptr;
  /// Seeds the per-layer reparameterisation noise.
  std::uint64_t noise_seed = 0;
  bool stochastic_infer = false;
  double eta = 1e-4;
};

/// Tape plus the model parameters bound as leaves.
class GradientContext {
 public:
  /// `record` tracks parameter gradients; otherwise parameters are constants.
  GradientContext(const Model& model, bool record);

  ad::Tape& tape() { return tape_; }
  const Model& model() const { return model_; }
  bool recording() const { return record_; }
  const std::vector<ad::Var>& leaves() const { return leaves_; }
  ad::Var raw_alpha() const { return leaves_[0]; }
  ad::Var raw_beta() const { return leaves_[1]; }
  ad::Var raw_gamma() const { return leaves_[2]; }
  const VaeVars* vae() const { return vae_ ? &*vae_ : nullptr; }

 private:
  const Model& model_;
  bool record_;
  ad::Tape tape_;
  std::vector<ad::Var> leaves_;
  std::optional<VaeVars> vae_;
};

struct ForwardTrace {
  std::vector<ad::Var> w_layers;   // w^(1) .. w^(T)
  std::vector<ad::Var> r1_layers;  // forward primal step of each layer
  std::vector<ad::Var> v_layers;   // dual state after each layer
  /// Latent statistics of enhanced layers (train mode), by layer index.
  std::vector<std::pair<int, LatentVars>> latent;

  int layers() const { return static_cast<int>(w_layers.size()); }
  Vector w(int t) const { return w_layers.at(t).value(); }
  /// Final estimate projected onto w >= 0.
  EdgeVector estimate() const;
};

/// Standard-normal noise for enhanced layer t under `noise_seed`.
Vector layer_noise(std::uint64_t noise_seed, int layer, int nlatent);

ForwardTrace forward(GradientContext& ctx, const DistanceVector& y, const ForwardOptions& opt);

/// sum_t tau^(T-t) ||w^(t) - w||^2 / ||w||^2 + beta_kl * sum KL over enhanced layers.
ad::Var loss(GradientContext& ctx, const ForwardTrace& trace, const EdgeVector& w, double tau,
             double beta_kl);

/// d loss / d parameter, in Model::parameters() order. Throws ContractError
/// when the context was not recording.
std::vector<Matrix> gradients(GradientContext& ctx, ad::Var loss_value);

/// Inference-mode forward returning the projected final estimate.
EdgeVector predict(const Model& model, const DistanceVector& y, std::uint64_t noise_seed = 0,
                   bool stochastic = false);
/// Projected estimate after every layer.
std::vector<Vector> predict_layers(const Model& model, const DistanceVector& y);

/// Checkpoint container (manifest + named parameter arrays).
Container to_container(const Model& model, const nlohmann::json& extra = nlohmann::json::object());
Model model_from_container(const Container& c);

}  // namespace l2g
