#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "anr/attention.hpp"
#include "anr/representation.hpp"

namespace anr::hyper {

struct HyperNetConfig {
  std::size_t enc_depth = 2;
  std::size_t dec_depth = 2;
  std::size_t heads = 4;
  std::size_t head_dim = 16;
  std::size_t ff_dim = 128;
  std::size_t patch_size = 4;
  std::size_t image_height = 16;
  std::size_t image_width = 16;
  std::size_t channels = 3;
  std::size_t rtokens = 16;    // L_r
  std::size_t token_dim = 32;  // d
  attention::HyperArch arch = attention::HyperArch::encoder_decoder;

  /// 6 heads x 64, feed-forward 3072, depth 6 + 6.
  static HyperNetConfig full_scale();

  [[nodiscard]] std::size_t width() const { return heads * head_dim; }
  [[nodiscard]] std::size_t patch_features() const { return patch_size * patch_size * channels; }
  /// L_d.
  [[nodiscard]] std::size_t data_tokens() const;
  void validate() const;
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;

  explicit LayerNormParams(std::size_t width = 1);
  void append_parameters(ParamList& out, const std::string& prefix);
};

Var layernorm_forward(LayerNormParams& ln, Var x);

struct FeedForward {
  nn::LinearLayer up, down;

  FeedForward() = default;
  FeedForward(std::size_t width, std::size_t ff_dim, Prng& rng);
  void append_parameters(ParamList& out, const std::string& prefix);
};

/// Pre-layernorm residual block: x + MHA(LN x); x + FF(LN x).
struct EncoderBlock {
  LayerNormParams ln1, ln2;
  attention::AttentionHeads attn;
  FeedForward ff;

  EncoderBlock(const HyperNetConfig& cfg, Prng& rng);
  void append_parameters(ParamList& out, const std::string& prefix);
};

/// Unmasked self-attention, cross-attention over encoder output, feed-forward.
struct DecoderBlock {
  LayerNormParams ln1, ln2, ln3;
  attention::AttentionHeads self_attn, cross_attn;
  FeedForward ff;

  DecoderBlock(const HyperNetConfig& cfg, Prng& rng);
  void append_parameters(ParamList& out, const std::string& prefix);
};

Var encoder_block_forward(EncoderBlock& block, Var x, attention::ScoreCounter* counter = nullptr);
Var decoder_block_forward(DecoderBlock& block, Var y, Var memory, attention::ScoreCounter* counter = nullptr);

/// Image [h x w x c] to flattened patches [L_d x (p*p*c)], patches in row-major order.
Tensor patchify(const Tensor& image, std::size_t patch_size);
/// Inverse of patchify.
Tensor unpatchify(const Tensor& patches, std::size_t height, std::size_t width, std::size_t channels,
                  std::size_t patch_size);

struct HyperNet {
  HyperNetConfig config;
  nn::LinearLayer patch_proj;
  Tensor pos_embed;  // [L_d x width]
  Tensor queries;    // [L_r x width]
  std::vector<EncoderBlock> encoder;
  std::vector<DecoderBlock> decoder;
  LayerNormParams final_ln;
  nn::LinearLayer head;  // width -> d

  HyperNet(const HyperNetConfig& cfg, Prng& rng);

  void append_parameters(ParamList& out, const std::string& prefix = "hyper");
  [[nodiscard]] ParamList parameters();
};

/// Patch projection plus learned positional embedding: [L_d x width].
Var tokenize(HyperNet& net, Var patches);
Var tokenize_image(HyperNet& net, Tape& tape, const Tensor& image);

/// R-Tokens [L_r x d] from pre-extracted patches.
Var hypernet_forward_patches(HyperNet& net, Var patches, attention::ScoreCounter* counter = nullptr);
Var hypernet_forward(HyperNet& net, Tape& tape, const Tensor& image, attention::ScoreCounter* counter = nullptr);

/// anr_forward(anr, hypernet_forward(image), coords).
Var end_to_end_forward(HyperNet& net, repr::AnrModel& anr, Tape& tape, const Tensor& image, const Tensor& coords,
                       attention::ScoreCounter* counter = nullptr);

}  // namespace anr::hyper
