#include "l2g/unroll_net.hpp"

#include <cmath>

#include "l2g/error.hpp"
#include "l2g/random.hpp"

namespace l2g {

ModelKind parse_model_kind(const std::string& name) {
  if (name == "unroll" || name == "unrolling") return ModelKind::unrolling;
  if (name == "recurrent") return ModelKind::recurrent;
  if (name == "l2g") return ModelKind::l2g;
  throw ConfigError("unknown model '" + name + "' (expected unroll, recurrent or l2g)");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::unrolling: return "unroll";
    case ModelKind::recurrent: return "recurrent";
    case ModelKind::l2g: return "l2g";
  }
  return "?";
}

UnrollParams UnrollParams::init(int layers, bool shared, double alpha, double beta, double gamma) {
  if (layers < 1) throw ConfigError("unroll: need at least one layer");
  const int n = shared ? 1 : layers;
  UnrollParams p;
  p.raw_alpha = Matrix::Constant(n, 1, ad::softplus_inverse(alpha));
  p.raw_beta = Matrix::Constant(n, 1, ad::softplus_inverse(beta));
  p.raw_gamma = Matrix::Constant(n, 1, ad::softplus_inverse(gamma));
  p.shared = shared;
  p.enhancement_mask.assign(layers, false);
  return p;
}

double UnrollParams::alpha(int t) const { return ad::softplus(raw_alpha(shared ? 0 : t, 0)); }
double UnrollParams::beta(int t) const { return ad::softplus(raw_beta(shared ? 0 : t, 0)); }
double UnrollParams::gamma(int t) const { return ad::softplus(raw_gamma(shared ? 0 : t, 0)); }

bool UnrollParams::any_enhanced() const {
  for (bool e : enhancement_mask)
    if (e) return true;
  return false;
}

void UnrollParams::validate() const {
  const int n = shared ? 1 : layers();
  if (layers() < 1) throw ConfigError("unroll: need at least one layer");
  for (const Matrix* m : {&raw_alpha, &raw_beta, &raw_gamma})
    if (m->rows() != n || m->cols() != 1) throw ConfigError("unroll: raw parameter has the wrong length");
}

Model Model::create(const Spec& spec) {
  Model model;
  model.kind = spec.kind;
  model.num_nodes = spec.num_nodes;
  model.unroll = UnrollParams::init(spec.layers, spec.kind == ModelKind::recurrent, spec.alpha, spec.beta,
                                    spec.gamma);
  if (spec.kind == ModelKind::l2g) {
    const std::vector<int> layers = spec.enhanced_layers.value_or(std::vector<int>{spec.layers - 1});
    for (int t : layers) {
      if (t < 0 || t >= spec.layers) throw ConfigError("l2g: enhanced layer index out of range");
      model.unroll.enhancement_mask[t] = true;
    }
    VaeDims dims = spec.vae_dims;
    dims.num_nodes = spec.num_nodes;
    model.vae = VaeParams::init(dims, spec.seed);
  } else if (spec.enhanced_layers && !spec.enhanced_layers->empty()) {
    throw ConfigError("only l2g models have enhanced layers");
  }
  model.validate();
  return model;
}

std::vector<std::pair<std::string, Matrix*>> Model::parameters() {
  std::vector<std::pair<std::string, Matrix*>> out = {
      {"unroll.raw_alpha", &unroll.raw_alpha},
      {"unroll.raw_beta", &unroll.raw_beta},
      {"unroll.raw_gamma", &unroll.raw_gamma}};
  if (vae)
    for (auto& p : vae->named()) out.push_back(p);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> Model::parameters() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [n, m] : const_cast<Model*>(this)->parameters()) out.emplace_back(n, m);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (auto& [name, m] : parameters()) n += static_cast<std::size_t>(m->size());
  return n;
}

void Model::validate() const {
  if (num_nodes < 2) throw ConfigError("model: need at least two nodes");
  unroll.validate();
  if (unroll.any_enhanced() && !vae) throw ConfigError("model: enhanced layers need TopoDiffVAE parameters");
  if (vae) {
    vae->check_shapes();
    if (vae->dims.num_nodes != num_nodes) throw ConfigError("model: TopoDiffVAE node count mismatch");
  }
}

GradientContext::GradientContext(const Model& model, bool record) : model_(model), record_(record) {
  model.validate();
  for (auto& [name, m] : model.parameters()) {
    (void)name;
    if (leaves_.size() == 3) break;
    leaves_.push_back(record ? tape_.variable(*m) : tape_.constant(*m));
  }
  if (model.vae) {
    vae_ = VaeVars::bind(tape_, *model.vae, record);
    for (auto v : vae_->all()) leaves_.push_back(v);
  }
}

EdgeVector ForwardTrace::estimate() const { return EdgeVector(w_layers.back().value().cwiseMax(0.0)); }

Vector layer_noise(std::uint64_t noise_seed, int layer, int nlatent) {
  auto rng = make_rng(noise_seed, {static_cast<std::uint64_t>(layer)});
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector eps(nlatent);
  for (auto& e : eps) e = normal(rng);
  return eps;
}

ForwardTrace forward(GradientContext& ctx, const DistanceVector& y, const ForwardOptions& opt) {
  const Model& model = ctx.model();
  const int m = y.num_nodes();
  if (m != model.num_nodes)
    throw ConfigError("forward: model expects " + std::to_string(model.num_nodes) + " nodes, got " +
                      std::to_string(m));
  const UnrollParams& up = model.unroll;
  if (opt.mode == Mode::train && up.any_enhanced() && !opt.groundtruth)
    throw ContractError("forward: train mode with enhanced layers requires the groundtruth graph");
  if (opt.mode == Mode::infer && opt.groundtruth)
    throw ContractError("forward: infer mode must not receive the groundtruth graph");
  if (opt.groundtruth && opt.groundtruth->num_nodes() != m)
    throw ConfigError("forward: groundtruth size does not match the distances");

  ad::Tape& t = ctx.tape();
  std::optional<Matrix> a_w;
  if (opt.mode == Mode::train && opt.groundtruth) a_w = binarize(*opt.groundtruth, opt.eta);

  const ad::Var two_y = t.constant(2.0 * y.values());
  const ad::Var alpha_all = ad::softplus(ctx.raw_alpha());
  const ad::Var beta_all = ad::softplus(ctx.raw_beta());
  const ad::Var gamma_all = ad::softplus(ctx.raw_gamma());

  ad::Var w = t.constant(Vector::Zero(y.size()));
  ad::Var v = t.constant(Vector::Zero(m));
  ForwardTrace trace;
  for (int layer = 0; layer < up.layers(); ++layer) {
    const Eigen::Index k = up.shared ? 0 : layer;
    const ad::Var alpha = ad::element(alpha_all, k);
    const ad::Var two_beta = 2.0 * ad::element(beta_all, k);
    const ad::Var gamma = ad::element(gamma_all, k);

    const ad::Var r1 = w - ad::scalar_mul(gamma, ad::scalar_mul(two_beta, w) + two_y + ad::degree_adjoint(v));
    const ad::Var r2 = v + ad::scalar_mul(gamma, ad::degree(w, m));
    ad::Var p1;
    if (up.enhancement_mask[layer]) {
      const int nlatent = model.vae->dims.nlatent;
      const bool needs_noise = opt.mode == Mode::train || opt.stochastic_infer;
      const Vector eps = needs_noise ? layer_noise(opt.noise_seed, layer, nlatent) : Vector::Zero(nlatent);
      auto out = vae::enhance(*ctx.vae(), r1, opt.mode, a_w ? &*a_w : nullptr, eps, opt.stochastic_infer,
                              opt.eta);
      p1 = out.p1;
      if (out.stats) trace.latent.emplace_back(layer, *out.stats);
    } else {
      p1 = ad::relu(r1);
    }
    const ad::Var p2 = ad::prox_dual(r2, alpha, gamma);
    const ad::Var q1 = p1 - ad::scalar_mul(gamma, ad::scalar_mul(two_beta, p1) + two_y + ad::degree_adjoint(p2));
    const ad::Var q2 = p2 + ad::scalar_mul(gamma, ad::degree(p1, m));
    w = w - r1 + q1;
    v = v - r2 + q2;
    if (!w.value().allFinite() || !v.value().allFinite())
      throw NumericError("forward: non-finite iterate", layer);
    trace.w_layers.push_back(w);
    trace.r1_layers.push_back(r1);
    trace.v_layers.push_back(v);
  }
  return trace;
}

ad::Var loss(GradientContext& ctx, const ForwardTrace& trace, const EdgeVector& w, double tau,
             double beta_kl) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("loss: tau must lie in (0, 1]");
  if (!(beta_kl >= 0.0)) throw ConfigError("loss: beta_kl must be >= 0");
  if (trace.layers() == 0) throw ContractError("loss: empty trace");
  if (trace.w_layers[0].rows() != w.size()) throw ValidationError("loss: groundtruth length mismatch");
  const double norm = w.values().squaredNorm();
  if (norm == 0.0) throw ValidationError("loss: groundtruth graph has zero norm");
  ad::Tape& t = ctx.tape();
  const ad::Var target = t.constant(w.values());
  const int layers = trace.layers();
  ad::Var total = t.constant(Matrix::Zero(1, 1));
  for (int i = 0; i < layers; ++i) {
    const double weight = std::pow(tau, layers - 1 - i) / norm;
    total = total + weight * ad::squared_norm(trace.w_layers[i] - target);
  }
  if (beta_kl > 0.0)
    for (const auto& [layer, stats] : trace.latent) total = total + beta_kl * vae::kl(stats);
  if (!std::isfinite(total.value()(0, 0))) throw NumericError("loss: non-finite value");
  return total;
}

std::vector<Matrix> gradients(GradientContext& ctx, ad::Var loss_value) {
  if (!ctx.recording()) throw ContractError("gradients: forward pass was not recorded");
  ctx.tape().backward(loss_value);
  std::vector<Matrix> out;
  out.reserve(ctx.leaves().size());
  for (auto leaf : ctx.leaves()) out.push_back(ctx.tape().grad(leaf));
  return out;
}

EdgeVector predict(const Model& model, const DistanceVector& y, std::uint64_t noise_seed, bool stochastic) {
  GradientContext ctx(model, false);
  ForwardOptions opt;
  opt.noise_seed = noise_seed;
  opt.stochastic_infer = stochastic;
  return forward(ctx, y, opt).estimate();
}

std::vector<Vector> predict_layers(const Model& model, const DistanceVector& y) {
  GradientContext ctx(model, false);
  const auto trace = forward(ctx, y, {});
  std::vector<Vector> out;
  for (int i = 0; i < trace.layers(); ++i) out.push_back(trace.w(i).cwiseMax(0.0));
  return out;
}

Container to_container(const Model& model, const nlohmann::json& extra) {
  model.validate();
  Container c;
  c.manifest = {{"format", "l2g-checkpoint"},
                {"version", 1},
                {"kind", to_string(model.kind)},
                {"num_nodes", model.num_nodes},
                {"layers", model.unroll.layers()},
                {"shared", model.unroll.shared},
                {"enhancement_mask", model.unroll.enhancement_mask}};
  if (model.vae) {
    const auto& d = model.vae->dims;
    c.manifest["vae_dims"] = {{"nhid", d.nhid}, {"nhid2", d.nhid2}, {"emb_out", d.emb_out}, {"nlatent", d.nlatent}};
  }
  for (auto& [k, v] : extra.items()) c.manifest[k] = v;
  for (auto& [name, m] : model.parameters()) c.arrays[name] = Array::from_matrix(*m);
  return c;
}

Model model_from_container(const Container& c) {
  const auto& j = c.manifest;
  if (j.value("format", "") != "l2g-checkpoint") throw DataError("checkpoint: wrong format tag");
  if (j.value("version", 0) != 1) throw DataError("checkpoint: unsupported version");
  Model model;
  try {
    model.kind = parse_model_kind(j.at("kind").get<std::string>());
    model.num_nodes = j.at("num_nodes").get<int>();
    model.unroll.shared = j.at("shared").get<bool>();
    model.unroll.enhancement_mask = j.at("enhancement_mask").get<std::vector<bool>>();
    if (j.contains("vae_dims")) {
      VaeParams p;
      p.dims.num_nodes = model.num_nodes;
      p.dims.nhid = j["vae_dims"].at("nhid").get<int>();
      p.dims.nhid2 = j["vae_dims"].at("nhid2").get<int>();
      p.dims.emb_out = j["vae_dims"].at("emb_out").get<int>();
      p.dims.nlatent = j["vae_dims"].at("nlatent").get<int>();
      model.vae = std::move(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint manifest: ") + e.what());
  }
  for (auto& [name, m] : model.parameters()) *m = c.at(name).to_matrix();
  try {
    model.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return model;
}

}  // namespace l2g
