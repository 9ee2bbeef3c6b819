#include "l2g/topodiffvae.hpp"

#include <cmath>

#include "l2g/error.hpp"
#include "l2g/random.hpp"

namespace l2g {

void VaeDims::validate() const {
  if (num_nodes < 2) throw ConfigError("vae: need at least two nodes");
  if (nhid < 1 || nhid2 < 1 || emb_out < 1 || nlatent < 1) throw ConfigError("vae: dimensions must be >= 1");
}

namespace {

Matrix glorot(int out, int in, Rng& rng, double gain = 1.0) {
  std::normal_distribution<double> g(0.0, gain * std::sqrt(2.0 / double(in + out)));
  Matrix w(out, in);
  for (int i = 0; i < out; ++i)
    for (int j = 0; j < in; ++j) w(i, j) = g(rng);
  return w;
}

// Biases ~ U(-gain/sqrt(in), gain/sqrt(in)) so no unit starts exactly on a relu kink.
Dense dense(int out, int in, Rng& rng, double gain = 1.0) {
  Matrix w = glorot(out, in, rng, gain);
  const double b = gain / std::sqrt(double(in));
  std::uniform_real_distribution<double> u(-b, b);
  Matrix bias(out, 1);
  for (int i = 0; i < out; ++i) bias(i, 0) = u(rng);
  return {std::move(w), std::move(bias)};
}

void expect_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols)
    throw ConfigError(std::string("vae: '") + name + "' has shape " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                      std::to_string(cols));
}

}  // namespace

VaeParams VaeParams::init(const VaeDims& dims, std::uint64_t seed, bool identity_decoder) {
  dims.validate();
  auto rng = make_rng(seed, {0x7ae});
  const int e = dims.edges();
  VaeParams p;
  p.dims = dims;
  // Degree features are O(m); keep first-layer activations O(1).
  p.gcn_h0 = glorot(1, dims.nhid, rng) / double(dims.num_nodes);
  p.gcn_H1 = glorot(dims.nhid, dims.emb_out, rng) / double(dims.num_nodes);
  p.mean1 = dense(dims.nhid, dims.emb_out, rng);
  p.mean2 = dense(dims.nlatent, dims.nhid, rng);
  p.cov1 = dense(dims.nhid, dims.emb_out, rng);
  p.cov2 = dense(dims.nlatent, dims.nhid, rng, 0.1);
  if (identity_decoder) {
    p.dec1 = dense(dims.nhid2, e + dims.nlatent, rng, 0.05);
    p.dec2 = dense(e, dims.nhid2, rng, 0.05);
    const int k = std::min(e, dims.nhid2);
    for (int i = 0; i < k; ++i) {
      p.dec1.weight.row(i).head(e).setZero();
      p.dec1.weight(i, i) = 1.0;
      p.dec2.weight.col(i).setZero();
      p.dec2.weight(i, i) = 1.0;
    }
  } else {
    p.dec1 = dense(dims.nhid2, e + dims.nlatent, rng);
    p.dec2 = dense(e, dims.nhid2, rng);
  }
  return p;
}

std::vector<std::pair<std::string, Matrix*>> VaeParams::named() {
  return {{"vae.gcn_h0", &gcn_h0},        {"vae.gcn_H1", &gcn_H1},        {"vae.mean1.weight", &mean1.weight},
          {"vae.mean1.bias", &mean1.bias}, {"vae.mean2.weight", &mean2.weight}, {"vae.mean2.bias", &mean2.bias},
          {"vae.cov1.weight", &cov1.weight}, {"vae.cov1.bias", &cov1.bias}, {"vae.cov2.weight", &cov2.weight},
          {"vae.cov2.bias", &cov2.bias},   {"vae.dec1.weight", &dec1.weight}, {"vae.dec1.bias", &dec1.bias},
          {"vae.dec2.weight", &dec2.weight}, {"vae.dec2.bias", &dec2.bias}};
}

std::vector<std::pair<std::string, const Matrix*>> VaeParams::named() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [n, m] : const_cast<VaeParams*>(this)->named()) out.emplace_back(n, m);
  return out;
}

void VaeParams::check_shapes() const {
  dims.validate();
  const int e = dims.edges();
  expect_shape(gcn_h0, 1, dims.nhid, "gcn_h0");
  expect_shape(gcn_H1, dims.nhid, dims.emb_out, "gcn_H1");
  expect_shape(mean1.weight, dims.nhid, dims.emb_out, "mean1.weight");
  expect_shape(mean1.bias, dims.nhid, 1, "mean1.bias");
  expect_shape(mean2.weight, dims.nlatent, dims.nhid, "mean2.weight");
  expect_shape(mean2.bias, dims.nlatent, 1, "mean2.bias");
  expect_shape(cov1.weight, dims.nhid, dims.emb_out, "cov1.weight");
  expect_shape(cov1.bias, dims.nhid, 1, "cov1.bias");
  expect_shape(cov2.weight, dims.nlatent, dims.nhid, "cov2.weight");
  expect_shape(cov2.bias, dims.nlatent, 1, "cov2.bias");
  expect_shape(dec1.weight, dims.nhid2, e + dims.nlatent, "dec1.weight");
  expect_shape(dec1.bias, dims.nhid2, 1, "dec1.bias");
  expect_shape(dec2.weight, e, dims.nhid2, "dec2.weight");
  expect_shape(dec2.bias, e, 1, "dec2.bias");
}

VaeVars VaeVars::bind(ad::Tape& tape, const VaeParams& p, bool track) {
  auto leaf = [&](const Matrix& m) { return track ? tape.variable(m) : tape.constant(m); };
  VaeVars v;
  v.gcn_h0 = leaf(p.gcn_h0);
  v.gcn_H1 = leaf(p.gcn_H1);
  v.mean1_w = leaf(p.mean1.weight);
  v.mean1_b = leaf(p.mean1.bias);
  v.mean2_w = leaf(p.mean2.weight);
  v.mean2_b = leaf(p.mean2.bias);
  v.cov1_w = leaf(p.cov1.weight);
  v.cov1_b = leaf(p.cov1.bias);
  v.cov2_w = leaf(p.cov2.weight);
  v.cov2_b = leaf(p.cov2.bias);
  v.dec1_w = leaf(p.dec1.weight);
  v.dec1_b = leaf(p.dec1.bias);
  v.dec2_w = leaf(p.dec2.weight);
  v.dec2_b = leaf(p.dec2.bias);
  return v;
}

std::vector<ad::Var> VaeVars::all() const {
  return {gcn_h0, gcn_H1, mean1_w, mean1_b, mean2_w, mean2_b, cov1_w,
          cov1_b, cov2_w, cov2_b,  dec1_w,  dec1_b,  dec2_w,  dec2_b};
}

namespace vae {

namespace {

ad::Var affine(ad::Var w, ad::Var b, ad::Var x) { return ad::matmul(w, x) + b; }

void check_adjacency(const Matrix& a, int m) {
  if (a.rows() != m || a.cols() != m) throw ConfigError("vae: adjacency size does not match the model");
}

}  // namespace

ad::Var embed(const VaeVars& p, const Matrix& adjacency) {
  ad::Tape& t = *p.gcn_h0.tape();
  const int m = static_cast<int>(adjacency.rows());
  if (adjacency.cols() != m) throw ConfigError("vae: adjacency must be square");
  const ad::Var a = t.constant(adjacency);
  const ad::Var ad_feat = t.constant(adjacency * adjacency.rowwise().sum());  // A d
  const ad::Var h1 = ad::relu(ad::matmul(ad_feat, p.gcn_h0));               // m x nhid
  const ad::Var h2 = ad::relu(ad::matmul(ad::matmul(a, h1), p.gcn_H1));     // m x emb_out
  return ad::mean_rows(h2);
}

LatentVars encode(const VaeVars& p, const Matrix& a_r, const Matrix& a_w) {
  if (a_r.rows() != a_w.rows() || a_r.cols() != a_w.cols())
    throw ConfigError("vae: encoder adjacencies differ in size");
  const ad::Var delta = embed(p, a_w) - embed(p, a_r);
  const ad::Var mu = affine(p.mean2_w, p.mean2_b, ad::tanh(affine(p.mean1_w, p.mean1_b, delta)));
  const ad::Var log_var = affine(p.cov2_w, p.cov2_b, ad::tanh(affine(p.cov1_w, p.cov1_b, delta)));
  return {mu, log_var};
}

ad::Var sample(const LatentVars& stats, const Vector& eps) {
  if (eps.size() != stats.mu.rows()) throw ConfigError("vae: noise length does not match latent size");
  ad::Tape& t = *stats.mu.tape();
  const ad::Var sigma = ad::exp(0.5 * stats.log_var);
  return stats.mu + ad::cwise_mul(sigma, t.constant(eps));
}

ad::Var decode(const VaeVars& p, ad::Var r1, ad::Var z) {
  if (r1.rows() + z.rows() != p.dec1_w.cols() || r1.cols() != 1 || z.cols() != 1)
    throw ConfigError("vae: decoder input has the wrong length");
  const ad::Var hidden = ad::relu(affine(p.dec1_w, p.dec1_b, ad::concat_rows(r1, z)));
  return ad::relu(affine(p.dec2_w, p.dec2_b, hidden));
}

ad::Var kl(const LatentVars& stats) {
  ad::Tape& t = *stats.mu.tape();
  const auto k = stats.mu.rows();
  const ad::Var terms = ad::square(stats.mu) + ad::exp(stats.log_var) - stats.log_var;
  return 0.5 * (ad::sum(terms) - t.constant(Matrix::Constant(1, 1, double(k))));
}

EnhanceVars enhance(const VaeVars& p, ad::Var r1, Mode mode, const Matrix* groundtruth_adjacency,
                    const Vector& eps, bool stochastic, double eta) {
  ad::Tape& t = *r1.tape();
  const int m = num_nodes_for_length(r1.rows());
  const auto nlatent = p.mean2_w.rows();
  if (mode == Mode::train) {
    if (!groundtruth_adjacency) throw ContractError("enhance: train mode requires the groundtruth adjacency");
    check_adjacency(*groundtruth_adjacency, m);
    // Thresholding is not differentiated; the binarised estimate enters as a constant.
    const Matrix a_r = binarize(Vector(r1.value()), m, eta);
    LatentVars stats = encode(p, a_r, *groundtruth_adjacency);
    const ad::Var z = sample(stats, eps);
    return {decode(p, r1, z), stats};
  }
  if (groundtruth_adjacency) throw ContractError("enhance: infer mode must not see the groundtruth");
  if (stochastic && eps.size() != nlatent) throw ConfigError("vae: noise length does not match latent size");
  const ad::Var z = t.constant(stochastic ? Matrix(eps) : Matrix::Zero(nlatent, 1));
  return {decode(p, r1, z), std::nullopt};
}

}  // namespace vae

Vector gcn_embed(const Matrix& adjacency, const VaeParams& params) {
  ad::Tape t;
  const auto p = VaeVars::bind(t, params, false);
  return vae::embed(p, adjacency).value();
}

LatentStats encode(const Matrix& a_r, const Matrix& a_w, const VaeParams& params) {
  ad::Tape t;
  const auto p = VaeVars::bind(t, params, false);
  const auto s = vae::encode(p, a_r, a_w);
  return {s.mu.value(), (0.5 * s.log_var.value().array()).exp().matrix()};
}

Vector sample_latent(const LatentStats& stats, const Vector& eps) {
  if (eps.size() != stats.mu.size() || stats.sigma.size() != stats.mu.size())
    throw ConfigError("sample_latent: dimension mismatch");
  return stats.mu + stats.sigma.cwiseProduct(eps);
}

Vector decode(const Vector& r1, const Vector& z, const VaeParams& params) {
  ad::Tape t;
  const auto p = VaeVars::bind(t, params, false);
  return vae::decode(p, t.constant(r1), t.constant(z)).value();
}

double kl_divergence(const LatentStats& stats) {
  if (stats.sigma.size() != stats.mu.size()) throw ConfigError("kl_divergence: dimension mismatch");
  if (stats.sigma.size() > 0 && !(stats.sigma.minCoeff() > 0.0)) throw ValidationError("kl_divergence: sigma must be > 0");
  return 0.5 * (stats.mu.array().square() + stats.sigma.array().square() - 1.0 -
                2.0 * stats.sigma.array().log())
                   .sum();
}

EnhanceResult enhance(const Vector& r1, Mode mode, const Matrix* groundtruth_adjacency,
                      const VaeParams& params, const Vector& eps, bool stochastic, double eta) {
  ad::Tape t;
  const auto p = VaeVars::bind(t, params, false);
  const auto out = vae::enhance(p, t.constant(r1), mode, groundtruth_adjacency, eps, stochastic, eta);
  EnhanceResult r{out.p1.value(), std::nullopt};
  if (out.stats)
    r.stats = LatentStats{out.stats->mu.value(), (0.5 * out.stats->log_var.value().array()).exp().matrix()};
  return r;
}

}  // namespace l2g
