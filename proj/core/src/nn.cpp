#include "anr/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace anr {

std::size_t count_parameters(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor->size();
  return n;
}

void zero_grads(const ParamList& params) {
  for (const auto& p : params) p.tensor->clear_grad();
}

namespace nn {
namespace {

struct AxisLayout {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisLayout layout(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw std::out_of_range(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + to_string(shape));
  }
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  l.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

void softmax_into(const std::vector<double>& x, std::vector<double>& out, const AxisLayout& l) {
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      const std::size_t base = o * l.len * l.inner + in;
      double mx = x[base];
      for (std::size_t j = 1; j < l.len; ++j) mx = std::max(mx, x[base + j * l.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < l.len; ++j) {
        const double e = std::exp(x[base + j * l.inner] - mx);
        out[base + j * l.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < l.len; ++j) out[base + j * l.inner] /= z;
    }
  }
}

void check_finite(const Tensor& x, const char* op) {
  for (double v : x.data) {
    if (std::isnan(v)) throw std::domain_error(std::string(op) + ": NaN input");
  }
}

}  // namespace

Var softmax(Var x, std::size_t axis) {
  const Tensor& in = x.value();
  check_finite(in, "softmax");
  const AxisLayout l = layout(in.shape, axis, "softmax");
  Tensor out(in.shape);
  softmax_into(in.data, out.data, l);
  const std::size_t ix = x.id();
  Tape& tape = x.tape();
  const std::size_t self = tape.size();
  return tape.record(std::move(out), {x}, [ix, self, l](Tape& t, std::span<const double> g) {
    double* gx = t.grad_ptr(ix);
    if (!gx) return;
    const Tensor& p = t.value(self);
    for (std::size_t o = 0; o < l.outer; ++o) {
      for (std::size_t in = 0; in < l.inner; ++in) {
        const std::size_t base = o * l.len * l.inner + in;
        double dot = 0.0;
        for (std::size_t j = 0; j < l.len; ++j) dot += p.data[base + j * l.inner] * g[base + j * l.inner];
        for (std::size_t j = 0; j < l.len; ++j) {
          const std::size_t k = base + j * l.inner;
          gx[k] += p.data[k] * (g[k] - dot);
        }
      }
    }
  });
}

Tensor softmax(const Tensor& x) {
  check_finite(x, "softmax");
  if (x.rank() == 0) return Tensor::scalar(1.0);
  Tensor out(x.shape);
  softmax_into(x.data, out.data, layout(x.shape, x.rank() - 1, "softmax"));
  return out;
}

Var layernorm(Var x, Var gain, Var bias, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("layernorm: eps must be positive");
  const Tensor& in = x.value();
  const std::size_t m = in.rows(), n = in.cols();
  if (gain.value().size() != n) throw DimensionError("layernorm gain", in.shape, gain.shape());
  if (bias.value().size() != n) throw DimensionError("layernorm bias", in.shape, bias.shape());

  Tensor out(in.shape);
  std::vector<double> xhat(m * n), inv_std(m);
  const auto& gv = gain.value().data;
  const auto& bv = bias.value().data;
  for (std::size_t r = 0; r < m; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += in.data[r * n + c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double d = in.data[r * n + c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t k = r * n + c;
      xhat[k] = (in.data[k] - mu) * inv_std[r];
      out.data[k] = gv[c] * xhat[k] + bv[c];
    }
  }

  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().record(
      std::move(out), {x, gain, bias},
      [ix, ig, ib, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, std::span<const double> g) {
        double* gx = t.grad_ptr(ix);
        double* gg = t.grad_ptr(ig);
        double* gb = t.grad_ptr(ib);
        const auto& gain_v = t.value(ig).data;
        std::vector<double> dxhat(n);
        for (std::size_t r = 0; r < m; ++r) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t c = 0; c < n; ++c) {
            const std::size_t k = r * n + c;
            if (gg) gg[c] += g[k] * xhat[k];
            if (gb) gb[c] += g[k];
            dxhat[c] = g[k] * gain_v[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * xhat[k];
          }
          if (!gx) continue;
          mean_d /= static_cast<double>(n);
          mean_dx /= static_cast<double>(n);
          for (std::size_t c = 0; c < n; ++c) {
            const std::size_t k = r * n + c;
            gx[k] += inv_std[r] * (dxhat[c] - mean_d - xhat[k] * mean_dx);
          }
        }
      });
}

Activation Activation::polynomial(std::vector<double> c) {
  if (c.size() < 2) throw std::invalid_argument("polynomial activation needs order K >= 1");
  return {Kind::polynomial, std::move(c)};
}

Var activate(Var x, const Activation& act) {
  switch (act.kind) {
    case Activation::Kind::relu:
      return ops::relu(x);
    case Activation::Kind::sine:
      return ops::sin(x);
    case Activation::Kind::polynomial: {
      const auto& c = act.coeffs;
      if (c.size() < 2) throw std::invalid_argument("polynomial activation needs order K >= 1");
      // Horner: (((a_K x + a_{K-1}) x + ...) x + a_0)
      Var acc = ops::shift(ops::scale(x, c.back()), c[c.size() - 2]);
      for (std::size_t k = c.size() - 2; k-- > 0;) acc = ops::shift(ops::mul(acc, x), c[k]);
      return acc;
    }
  }
  throw std::logic_error("unknown activation");
}

LinearLayer::LinearLayer(std::size_t in, std::size_t out) : weight(Shape{out, in}), bias(Shape{out}) {}

void LinearLayer::append_parameters(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", &weight});
  out.push_back({prefix + ".bias", &bias});
}

Var linear_forward(LinearLayer& layer, Var x) {
  Tape& t = x.tape();
  if (x.value().cols() != layer.in_features()) throw DimensionError("linear_forward", x.shape(), layer.weight.shape);
  if (layer.bias.size() != layer.out_features()) throw DimensionError("linear_forward bias", layer.weight.shape, layer.bias.shape);
  return ops::add_row(ops::matmul_nt(x, t.leaf(layer.weight)), t.leaf(layer.bias));
}

void default_init(LinearLayer& layer, Prng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(layer.in_features()));
  for (double& w : layer.weight.data) w = rng.uniform(-bound, bound);
  std::fill(layer.bias.data.begin(), layer.bias.data.end(), 0.0);
}

double sine_init_bound(std::size_t fan_in, double bound_numerator) {
  return std::sqrt(bound_numerator / static_cast<double>(fan_in));
}

void sine_init(LinearLayer& layer, std::size_t fan_in, Prng& rng, double bound_numerator) {
  const double bound = sine_init_bound(fan_in, bound_numerator);
  for (double& w : layer.weight.data) w = rng.uniform(-bound, bound);
  std::fill(layer.bias.data.begin(), layer.bias.data.end(), 0.0);
}

void MlpConfig::validate() const {
  if (width < 1) throw std::invalid_argument("MlpConfig: width must be >= 1");
  if (input_dim < 1 || output_dim < 1) throw std::invalid_argument("MlpConfig: input/output dims must be >= 1");
  if (activation.kind == Activation::Kind::polynomial && activation.coeffs.size() < 2)
    throw std::invalid_argument("MlpConfig: polynomial activation needs order K >= 1");
}

Mlp::Mlp(MlpConfig cfg, Prng& rng) : config(std::move(cfg)) {
  config.validate();
  std::size_t in = config.input_dim;
  for (std::size_t i = 0; i < config.depth; ++i) {
    layers.emplace_back(in, config.width);
    in = config.width;
  }
  layers.emplace_back(in, config.output_dim);
  for (auto& layer : layers) {
    if (config.activation.kind == Activation::Kind::sine)
      sine_init(layer, layer.in_features(), rng, config.sine_bound_numerator);
    else
      default_init(layer, rng);
  }
}

void Mlp::append_parameters(ParamList& out, const std::string& prefix) {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].append_parameters(out, prefix + "." + std::to_string(i));
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

Var mlp_forward(Mlp& mlp, Var x) {
  const MlpConfig& c = mlp.config;
  if (mlp.layers.size() != c.depth + 1) {
    throw std::invalid_argument("mlp_forward: " + std::to_string(mlp.layers.size()) + " layers for depth " +
                                std::to_string(c.depth));
  }
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    const std::size_t want_in = i == 0 ? c.input_dim : c.width;
    const std::size_t want_out = i == c.depth ? c.output_dim : c.width;
    if (mlp.layers[i].in_features() != want_in || mlp.layers[i].out_features() != want_out) {
      throw DimensionError("mlp_forward layer " + std::to_string(i), mlp.layers[i].weight.shape, Shape{want_out, want_in});
    }
  }
  Var h = x;
  for (std::size_t i = 0; i < c.depth; ++i) h = activate(linear_forward(mlp.layers[i], h), c.activation);
  return linear_forward(mlp.layers.back(), h);
}

}  // namespace nn
}  // namespace anr
