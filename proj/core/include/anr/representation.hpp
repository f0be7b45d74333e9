#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "anr/attention.hpp"
#include "anr/nn.hpp"

namespace anr::repr {

/// Fourier positional embedding gamma(c) = sin(Omega c + phi).
///
/// Omega rows are drawn N(0, (2 pi sigma_pe)^2) and frozen. With pairing, rows
/// come in (phi = 0, phi = pi/2) pairs sharing one frequency, i.e. sin and cos.
struct PositionalEncoder {
  Tensor omega;  // [p x C]
  Tensor phi;    // [p]
  double sigma_pe = 1.0;
  bool paired = true;

  static PositionalEncoder random(std::size_t coord_dims, std::size_t features, double sigma_pe, Prng& rng,
                                  bool paired = true);

  [[nodiscard]] std::size_t features() const { return omega.shape.at(0); }
  [[nodiscard]] std::size_t coord_dims() const { return omega.shape.at(1); }
  /// max_i ||Omega_i||_1, the Lipschitz constant of gamma under the infinity norm.
  [[nodiscard]] double max_row_norm() const;
};

Var fourier_embed(const PositionalEncoder& enc, Var coords);
Tensor fourier_embed(const PositionalEncoder& enc, const Tensor& coords);

/// Per-instance representation: N tokens of dimension d, one per row.
struct RTokens {
  Tensor tokens;  // [N x d]

  RTokens() = default;
  explicit RTokens(Tensor t);
  static RTokens random(std::size_t count, std::size_t dim, Prng& rng, double scale = 1.0);

  [[nodiscard]] std::size_t count() const { return tokens.shape.at(0); }
  [[nodiscard]] std::size_t dim() const { return tokens.shape.at(1); }
};

/// Anything that maps a batch of coordinates [q x C] to signal values [q x S].
class CoordinateModel {
 public:
  virtual ~CoordinateModel() = default;
  virtual Var forward(Tape& tape, const Tensor& coords) = 0;
  virtual ParamList parameters() = 0;
  /// The per-instance subset of parameters(); the rest is shared across instances.
  virtual ParamList representation_parameters() = 0;
  [[nodiscard]] virtual std::size_t coord_dims() const = 0;
  [[nodiscard]] virtual std::size_t output_dim() const = 0;
  [[nodiscard]] virtual std::size_t repr_param_count() const = 0;
  [[nodiscard]] virtual std::string kind() const = 0;

  /// Forward without gradient bookkeeping beyond a throwaway tape.
  Tensor evaluate(const Tensor& coords);
};

/// Softmax-only attention for reference runs; localized uses the L-softmax.
enum class AttentionImpl { localized, reference };

struct AnrConfig {
  std::size_t coord_dims = 2;
  std::size_t pe_features = 64;
  double pe_sigma = 10.0;
  std::size_t token_dim = 32;  // d
  std::size_t tokens = 64;     // N
  double threshold = attention::kDefaultThreshold;
  nn::MlpConfig converter{.input_dim = 0, .depth = 5, .width = 64, .activation = {}, .output_dim = 3};
  AttentionImpl attention = AttentionImpl::localized;
};

/// Instance-agnostic part of an ANR: encoder, Q/K/V projections, threshold and converter MLP.
struct AnrModel {
  PositionalEncoder encoder;
  Tensor w_q;  // [d x p]
  Tensor w_k;  // [d x d]
  Tensor w_v;  // [d x d]
  attention::LalParams lal;
  nn::Mlp converter;
  AttentionImpl attention = AttentionImpl::localized;

  AnrModel() = default;
  AnrModel(const AnrConfig& cfg, Prng& rng);

  [[nodiscard]] std::size_t token_dim() const { return w_k.shape.at(0); }
  [[nodiscard]] std::size_t output_dim() const { return converter.config.output_dim; }
  void append_parameters(ParamList& out, const std::string& prefix = "anr");
};

/// MLP( LAL(W_q gamma(c), W_k D, W_v D) ) with tokens D as rows.
Var anr_forward(AnrModel& model, Var rtokens, Var coords, attention::LalTrace* trace = nullptr,
                attention::ScoreCounter* counter = nullptr);

/// An ANR bound to directly-trained tokens (single-instance fitting).
class AnrInstance : public CoordinateModel {
 public:
  AnrInstance(const AnrConfig& cfg, Prng& rng);

  Var forward(Tape& tape, const Tensor& coords) override;
  ParamList parameters() override;
  ParamList representation_parameters() override;
  [[nodiscard]] std::size_t coord_dims() const override { return model.encoder.coord_dims(); }
  [[nodiscard]] std::size_t output_dim() const override { return model.output_dim(); }
  [[nodiscard]] std::size_t repr_param_count() const override;
  [[nodiscard]] std::string kind() const override { return "anr"; }

  AnrModel model;
  RTokens tokens;
};

struct MlpInrConfig {
  std::size_t coord_dims = 2;
  std::size_t pe_features = 64;
  double pe_sigma = 10.0;
  nn::MlpConfig mlp{.input_dim = 0, .depth = 5, .width = 64, .activation = {}, .output_dim = 3};
  /// Predicted weight columns per instance-specific layer; nullopt predicts whole layers.
  std::optional<std::size_t> modulation;
  /// How many leading linear layers are instance-specific; nullopt means all of them.
  std::optional<std::size_t> repr_layers;
};

/// Positional embedding followed by an MLP.
///
/// With modulation k, the first min(k, in) weight columns of each
/// instance-specific layer live in `modulated` and the matching columns of the
/// layer weight are unused (kept at zero).
class MlpInrModel : public CoordinateModel {
 public:
  MlpInrModel(const MlpInrConfig& cfg, Prng& rng);

  Var forward(Tape& tape, const Tensor& coords) override;
  ParamList parameters() override;
  ParamList representation_parameters() override;
  [[nodiscard]] std::size_t coord_dims() const override { return encoder.coord_dims(); }
  [[nodiscard]] std::size_t output_dim() const override { return mlp.config.output_dim; }
  [[nodiscard]] std::size_t repr_param_count() const override;
  [[nodiscard]] std::string kind() const override { return "mlp_inr"; }

  PositionalEncoder encoder;
  nn::Mlp mlp;
  std::optional<std::size_t> modulation;
  std::optional<std::size_t> repr_layers;
  std::vector<Tensor> modulated;  // [out x min(k, in)] per instance-specific layer

  [[nodiscard]] std::size_t instance_layers() const { return repr_layers.value_or(mlp.layers.size()); }
};

Var mlp_inr_forward(MlpInrModel& model, Var coords);

/// N * d.
std::size_t repr_param_count(const RTokens& tokens);

}  // namespace anr::repr
