#include "anr/representation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace anr::repr {
namespace {

void init_uniform(Tensor& t, double bound, Prng& rng) {
  for (double& v : t.data) v = rng.uniform(-bound, bound);
}

}  // namespace

PositionalEncoder PositionalEncoder::random(std::size_t coord_dims, std::size_t features, double sigma_pe, Prng& rng,
                                            bool paired) {
  if (coord_dims == 0 || features == 0) throw std::invalid_argument("PositionalEncoder: empty dimensions");
  if (paired && features % 2 != 0) throw std::invalid_argument("PositionalEncoder: paired features must be even");
  if (!(sigma_pe >= 0.0)) throw std::invalid_argument("PositionalEncoder: sigma_pe must be >= 0");
  PositionalEncoder enc;
  enc.sigma_pe = sigma_pe;
  enc.paired = paired;
  enc.omega = Tensor(Shape{features, coord_dims});
  enc.phi = Tensor(Shape{features});
  const double scale = 2.0 * std::numbers::pi * sigma_pe;
  const std::size_t distinct = paired ? features / 2 : features;
  for (std::size_t i = 0; i < distinct; ++i) {
    for (std::size_t c = 0; c < coord_dims; ++c) {
      const double w = scale * rng.normal();
      if (paired) {
        enc.omega(2 * i, c) = w;
        enc.omega(2 * i + 1, c) = w;
      } else {
        enc.omega(i, c) = w;
      }
    }
    if (paired) enc.phi.data[2 * i + 1] = std::numbers::pi / 2.0;
  }
  return enc;
}

double PositionalEncoder::max_row_norm() const {
  double best = 0.0;
  for (std::size_t r = 0; r < features(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < coord_dims(); ++c) s += std::abs(omega(r, c));
    best = std::max(best, s);
  }
  return best;
}

Var fourier_embed(const PositionalEncoder& enc, Var coords) {
  Tape& t = coords.tape();
  if (coords.value().cols() != enc.coord_dims()) throw DimensionError("fourier_embed", coords.shape(), enc.omega.shape);
  Var pre = ops::add_row(ops::matmul_nt(coords, t.constant(enc.omega)), t.constant(enc.phi));
  return ops::sin(pre);
}

Tensor fourier_embed(const PositionalEncoder& enc, const Tensor& coords) {
  Tape t;
  return fourier_embed(enc, t.constant(coords)).value();
}

RTokens::RTokens(Tensor t) : tokens(std::move(t)) {
  if (tokens.rank() != 2) throw DimensionError("RTokens must be [N x d], got " + to_string(tokens.shape));
}

RTokens RTokens::random(std::size_t count, std::size_t dim, Prng& rng, double scale) {
  if (count == 0 || dim == 0) throw std::invalid_argument("RTokens: N and d must be >= 1");
  Tensor t(Shape{count, dim});
  for (double& v : t.data) v = scale * rng.normal();
  return RTokens(std::move(t));
}

Tensor CoordinateModel::evaluate(const Tensor& coords) {
  Tape t;
  return forward(t, coords).value();
}

AnrModel::AnrModel(const AnrConfig& cfg, Prng& rng) : attention(cfg.attention) {
  if (cfg.token_dim == 0 || cfg.tokens == 0) throw std::invalid_argument("AnrModel: tokens and token_dim must be >= 1");
  encoder = PositionalEncoder::random(cfg.coord_dims, cfg.pe_features, cfg.pe_sigma, rng);
  const std::size_t d = cfg.token_dim, p = cfg.pe_features;
  w_q = Tensor(Shape{d, p});
  w_k = Tensor(Shape{d, d});
  w_v = Tensor(Shape{d, d});
  init_uniform(w_q, std::sqrt(1.0 / static_cast<double>(p)), rng);
  init_uniform(w_k, std::sqrt(1.0 / static_cast<double>(d)), rng);
  init_uniform(w_v, std::sqrt(1.0 / static_cast<double>(d)), rng);
  lal = {cfg.threshold, d};
  lal.validate();
  nn::MlpConfig conv = cfg.converter;
  conv.input_dim = d;
  converter = nn::Mlp(conv, rng);
}

void AnrModel::append_parameters(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".w_q", &w_q});
  out.push_back({prefix + ".w_k", &w_k});
  out.push_back({prefix + ".w_v", &w_v});
  converter.append_parameters(out, prefix + ".converter");
}

Var anr_forward(AnrModel& model, Var rtokens, Var coords, attention::LalTrace* trace,
                attention::ScoreCounter* counter) {
  Tape& t = coords.tape();
  if (rtokens.value().rank() != 2 || rtokens.value().cols() != model.token_dim()) {
    throw DimensionError("anr_forward: tokens vs model token_dim", rtokens.shape(), model.w_k.shape);
  }
  Var gamma = fourier_embed(model.encoder, coords);
  Var q = ops::matmul_nt(gamma, t.leaf(model.w_q));
  Var k = ops::matmul_nt(rtokens, t.leaf(model.w_k));
  Var v = ops::matmul_nt(rtokens, t.leaf(model.w_v));
  Var fused;
  if (model.attention == AttentionImpl::localized) {
    fused = attention::lal_forward(q, k, v, model.lal.m, trace, counter);
  } else {
    if (counter) counter->add(q.value().rows(), k.value().rows());
    const double inv = 1.0 / std::sqrt(static_cast<double>(model.token_dim()));
    fused = ops::matmul(nn::softmax(ops::scale(ops::matmul_nt(q, k), inv), 1), v);
  }
  return nn::mlp_forward(model.converter, fused);
}

AnrInstance::AnrInstance(const AnrConfig& cfg, Prng& rng) : model(cfg, rng) {
  tokens = RTokens::random(cfg.tokens, cfg.token_dim, rng);
}

Var AnrInstance::forward(Tape& tape, const Tensor& coords) {
  return anr_forward(model, tape.leaf(tokens.tokens), tape.constant(coords));
}

ParamList AnrInstance::parameters() {
  ParamList out{{"rtokens", &tokens.tokens}};
  model.append_parameters(out);
  return out;
}

ParamList AnrInstance::representation_parameters() { return {{"rtokens", &tokens.tokens}}; }

std::size_t AnrInstance::repr_param_count() const { return repr::repr_param_count(tokens); }

MlpInrModel::MlpInrModel(const MlpInrConfig& cfg, Prng& rng)
    : modulation(cfg.modulation), repr_layers(cfg.repr_layers) {
  encoder = PositionalEncoder::random(cfg.coord_dims, cfg.pe_features, cfg.pe_sigma, rng);
  nn::MlpConfig m = cfg.mlp;
  m.input_dim = cfg.pe_features;
  mlp = nn::Mlp(m, rng);
  if (modulation) {
    if (*modulation == 0) throw std::invalid_argument("MlpInrModel: modulation needs at least one column");
    if (*modulation > m.width) {
      throw std::invalid_argument("MlpInrModel: modulated columns (" + std::to_string(*modulation) +
                                  ") exceed layer width " + std::to_string(m.width));
    }
  }
  if (repr_layers && *repr_layers > mlp.layers.size()) {
    throw std::invalid_argument("MlpInrModel: repr_layers exceeds layer count");
  }
  if (modulation) {
    for (std::size_t i = 0; i < instance_layers(); ++i) {
      Tensor& w = mlp.layers[i].weight;
      const std::size_t rows = w.rows(), cols = w.cols(), k = std::min(*modulation, cols);
      Tensor mod(Shape{rows, k});
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < k; ++c) {
          mod.data[r * k + c] = w.data[r * cols + c];
          w.data[r * cols + c] = 0.0;
        }
      modulated.push_back(std::move(mod));
    }
  }
}

Var mlp_inr_forward(MlpInrModel& model, Var coords) {
  Var h = fourier_embed(model.encoder, coords);
  if (!model.modulation) return nn::mlp_forward(model.mlp, h);
  Tape& t = coords.tape();
  auto& layers = model.mlp.layers;
  const auto& c = model.mlp.config;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Var z;
    if (i < model.modulated.size()) {
      const std::size_t k = model.modulated[i].cols(), in = layers[i].in_features();
      Var shared = ops::slice_cols(t.leaf(layers[i].weight), k, in);
      const Var parts[] = {t.leaf(model.modulated[i]), shared};
      Var w = k == in ? parts[0] : ops::concat_cols(parts);
      z = ops::add_row(ops::matmul_nt(h, w), t.leaf(layers[i].bias));
    } else {
      z = nn::linear_forward(layers[i], h);
    }
    h = i + 1 < layers.size() ? nn::activate(z, c.activation) : z;
  }
  return h;
}

Var MlpInrModel::forward(Tape& tape, const Tensor& coords) { return mlp_inr_forward(*this, tape.constant(coords)); }

ParamList MlpInrModel::parameters() {
  ParamList out;
  mlp.append_parameters(out, "mlp");
  for (std::size_t i = 0; i < modulated.size(); ++i) out.push_back({"mod" + std::to_string(i), &modulated[i]});
  return out;
}

ParamList MlpInrModel::representation_parameters() {
  ParamList out;
  if (modulation) {
    for (std::size_t i = 0; i < modulated.size(); ++i) out.push_back({"mod" + std::to_string(i), &modulated[i]});
    return out;
  }
  for (std::size_t i = 0; i < instance_layers(); ++i) mlp.layers[i].append_parameters(out, "mlp." + std::to_string(i));
  return out;
}

std::size_t MlpInrModel::repr_param_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < instance_layers(); ++i) {
    const auto& l = mlp.layers[i];
    if (modulation) {
      count += l.out_features() * std::min(*modulation, l.in_features());
    } else {
      count += l.weight.size() + l.bias.size();
    }
  }
  return count;
}

std::size_t repr_param_count(const RTokens& tokens) { return tokens.count() * tokens.dim(); }

}  // namespace anr::repr
