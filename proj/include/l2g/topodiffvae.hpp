#pragma once

// Topological-difference conditional VAE.
//
//   encoder: delta = f_emb(A_w) - f_emb(A_r); mu = f_mean(delta);
//            sigma = exp(f_cov(delta) / 2)     (f_cov is a log-variance head)
//   f_emb(A) = mean_nodes( relu( A relu(A d h0^T) H1 ) ),  d = A 1
//   decoder: p1 = relu(W2 relu(W1 [r1; z] + b1) + b2)
//
// f_mean and f_cov are FC -> tanh -> FC perceptrons.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "l2g/autodiff.hpp"
#include "l2g/graph_core.hpp"

namespace l2g {

struct VaeDims {
  int num_nodes = 20;
  int nhid = 64;
  int nhid2 = 256;
  int emb_out = 64;
  int nlatent = 16;

  int edges() const { return static_cast<int>(num_edges(num_nodes)); }
  void validate() const;
};

/// Fully connected layer y = weight * x + bias.
struct Dense {
  Matrix weight;  // out x in
  Matrix bias;    // out x 1
};

struct VaeParams {
  VaeDims dims;
  Matrix gcn_h0;  // 1 x nhid (h0 transposed)
  Matrix gcn_H1;  // nhid x emb_out
  Dense mean1, mean2;
  Dense cov1, cov2;
  Dense dec1, dec2;

  /// Glorot-style random init. With `identity_decoder`, the decoder starts
  /// as relu(r1) on its first min(E, nhid2) units, i.e. the handcrafted
  /// nonnegativity projection, plus small random couplings.
  static VaeParams init(const VaeDims& dims, std::uint64_t seed, bool identity_decoder = true);

  std::vector<std::pair<std::string, Matrix*>> named();
  std::vector<std::pair<std::string, const Matrix*>> named() const;
  /// Throws ConfigError when any array disagrees with `dims`.
  void check_shapes() const;
};

struct LatentStats {
  Vector mu;
  Vector sigma;
};

/// VAE parameters bound to a tape, one Var per array in named() order.
struct VaeVars {
  ad::Var gcn_h0, gcn_H1;
  ad::Var mean1_w, mean1_b, mean2_w, mean2_b;
  ad::Var cov1_w, cov1_b, cov2_w, cov2_b;
  ad::Var dec1_w, dec1_b, dec2_w, dec2_b;

  static VaeVars bind(ad::Tape& tape, const VaeParams& p, bool track);
  std::vector<ad::Var> all() const;
};

struct LatentVars {
  ad::Var mu;
  ad::Var log_var;
};

namespace vae {

ad::Var embed(const VaeVars& p, const Matrix& adjacency);
LatentVars encode(const VaeVars& p, const Matrix& a_r, const Matrix& a_w);
/// z = mu + exp(log_var / 2) * eps
ad::Var sample(const LatentVars& stats, const Vector& eps);
ad::Var decode(const VaeVars& p, ad::Var r1, ad::Var z);
/// 0.5 * sum(mu^2 + exp(log_var) - 1 - log_var)
ad::Var kl(const LatentVars& stats);

}  // namespace vae

enum class Mode { train, infer };

// Value-level entry points (no gradient tracking).

Vector gcn_embed(const Matrix& adjacency, const VaeParams& params);
LatentStats encode(const Matrix& a_r, const Matrix& a_w, const VaeParams& params);
Vector sample_latent(const LatentStats& stats, const Vector& eps);
Vector decode(const Vector& r1, const Vector& z, const VaeParams& params);
double kl_divergence(const LatentStats& stats);

struct EnhanceResult {
  Vector p1;
  std::optional<LatentStats> stats;
};

/// Replacement of the primal projection. Train mode encodes the difference
/// between binarize(r1, eta) and `groundtruth_adjacency` and samples with
/// `eps`; infer mode forbids groundtruth and uses z = 0, or z = eps when
/// `stochastic` is set.
EnhanceResult enhance(const Vector& r1, Mode mode, const Matrix* groundtruth_adjacency,
                      const VaeParams& params, const Vector& eps, bool stochastic = false,
                      double eta = 1e-4);

namespace vae {

struct EnhanceVars {
  ad::Var p1;
  std::optional<LatentVars> stats;
};

/// Tape-level enhance(); see the value-level overload for the contract.
EnhanceVars enhance(const VaeVars& p, ad::Var r1, Mode mode, const Matrix* groundtruth_adjacency,
                    const Vector& eps, bool stochastic, double eta);

}  // namespace vae

}  // namespace l2g
