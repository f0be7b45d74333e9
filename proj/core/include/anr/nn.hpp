#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "anr/ops.hpp"
#include "anr/prng.hpp"

namespace anr {

/// A trainable tensor exposed under a stable name (checkpoints, optimizer diagnostics).
struct NamedParam {
  std::string name;
  Tensor* tensor;
};
using ParamList = std::vector<NamedParam>;

std::size_t count_parameters(const ParamList& params);
void zero_grads(const ParamList& params);

namespace nn {

inline constexpr double kLayerNormEps = 1e-5;

/// Softmax along `axis` with max subtraction. Throws std::domain_error on NaN input.
Var softmax(Var x, std::size_t axis);
/// Softmax of a plain tensor along its last axis (no tape).
Tensor softmax(const Tensor& x);

/// Per-row normalization to zero mean / unit variance, then gain * x + bias.
Var layernorm(Var x, Var gain, Var bias, double eps = kLayerNormEps);

struct Activation {
  enum class Kind { relu, sine, polynomial };
  Kind kind = Kind::relu;
  /// rho(x) = sum_k coeffs[k] x^k for the polynomial kind; needs at least two coefficients.
  std::vector<double> coeffs;

  static Activation relu() { return {}; }
  static Activation sine() { return {Kind::sine, {}}; }
  static Activation polynomial(std::vector<double> c);
};

Var activate(Var x, const Activation& act);

struct LinearLayer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  LinearLayer() = default;
  LinearLayer(std::size_t in, std::size_t out);

  [[nodiscard]] std::size_t in_features() const { return weight.shape.at(1); }
  [[nodiscard]] std::size_t out_features() const { return weight.shape.at(0); }
  void append_parameters(ParamList& out, const std::string& prefix);
};

/// y = x W^T + b for x of shape [q x in].
Var linear_forward(LinearLayer& layer, Var x);

/// Uniform +-sqrt(1/fan_in) weights, zero bias.
void default_init(LinearLayer& layer, Prng& rng);
/// Uniform +-sqrt(bound_numerator / fan_in) weights, zero bias.
void sine_init(LinearLayer& layer, std::size_t fan_in, Prng& rng, double bound_numerator = 6.0);
double sine_init_bound(std::size_t fan_in, double bound_numerator = 6.0);

struct MlpConfig {
  std::size_t input_dim = 1;
  std::size_t depth = 0;  // hidden layers
  std::size_t width = 1;
  Activation activation;
  std::size_t output_dim = 1;
  /// Numerator of the sine init bound sqrt(n / fan_in).
  double sine_bound_numerator = 6.0;

  void validate() const;
};

/// depth x (linear + activation) followed by a linear head.
struct Mlp {
  MlpConfig config;
  std::vector<LinearLayer> layers;

  Mlp() = default;
  Mlp(MlpConfig cfg, Prng& rng);

  void append_parameters(ParamList& out, const std::string& prefix);
  [[nodiscard]] std::size_t parameter_count() const;
};

Var mlp_forward(Mlp& mlp, Var x);

}  // namespace nn
}  // namespace anr
