#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "anr/nn.hpp"

namespace anr::attention {

inline constexpr double kDefaultThreshold = 0.0015;

struct LalParams {
  double m = kDefaultThreshold;  // threshold in [0, 1)
  std::size_t d_k = 1;

  void validate() const;
};

/// Tallies attention-map elements (query rows x key rows) once per attention call,
/// independent of the head count.
struct ScoreCounter {
  std::uint64_t elements = 0;
  std::uint64_t calls = 0;

  void add(std::size_t queries, std::size_t keys) {
    elements += static_cast<std::uint64_t>(queries) * keys;
    ++calls;
  }
};

/// Per row of `rows` (last axis): relu(x - m) renormalized to sum 1. A row whose
/// every entry is clipped is passed through unchanged. Throws std::domain_error
/// on negative or NaN entries.
Tensor localize(const Tensor& rows, double m);
Var localize(Var rows, double m);

/// localize(softmax(logits), m) along the last axis.
Tensor l_softmax(const Tensor& logits, double m);
Var l_softmax(Var logits, double m);

/// Intermediate nodes of one lal_forward call, for inspection after backward.
struct LalTrace {
  Var scores;       // Q K^T / sqrt(d_k)
  Var soft;         // softmax(scores)
  Var weights;      // localize(soft, m)
};

/// L-softmax_m(Q K^T / sqrt(d_k)) V.
Var lal_forward(Var q, Var k, Var v, double m, LalTrace* trace = nullptr, ScoreCounter* counter = nullptr);

/// Multi-head attention projections. Model width is heads * head_dim.
struct AttentionHeads {
  std::size_t heads = 1;
  std::size_t head_dim = 1;
  nn::LinearLayer wq, wk, wv, wo;

  AttentionHeads() = default;
  AttentionHeads(std::size_t width, std::size_t heads, std::size_t head_dim, Prng& rng);

  [[nodiscard]] std::size_t width() const { return heads * head_dim; }
  void append_parameters(ParamList& out, const std::string& prefix);
};

/// Standard (unthresholded) scaled dot-product attention per head, concatenated,
/// then the output projection.
Var mha_forward(AttentionHeads& heads, Var q_in, Var k_in, Var v_in, ScoreCounter* counter = nullptr);

enum class HyperArch { encoder_decoder, encoder_only };

/// Attention-map elements per hypernetwork forward pass:
///   encoder_decoder: depth_e * L_d^2 + depth_d * (L_r^2 + L_d * L_r)
///   encoder_only:    depth_e * (L_d + L_r)^2   (depth_d ignored)
std::uint64_t attention_map_cost(HyperArch arch, std::size_t depth_e, std::size_t depth_d, std::size_t l_d,
                                 std::size_t l_r);

}  // namespace anr::attention
