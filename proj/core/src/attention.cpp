#include "anr/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace anr::attention {
namespace {

struct RowLayout {
  std::size_t rows, cols;
};

RowLayout row_layout(const Tensor& t) {
  if (t.rank() == 0) return {1, 1};
  const std::size_t cols = t.shape.back();
  return {cols ? t.size() / cols : 0, cols};
}

// Fills `out` and returns per-row fallback flags.
std::vector<char> localize_rows(const Tensor& x, double m, std::vector<double>& out) {
  const auto [rows, cols] = row_layout(x);
  std::vector<char> fallback(rows, 0);
  out.assign(x.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data.data() + r * cols;
    double* o = out.data() + r * cols;
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (std::isnan(in[c]) || in[c] < 0.0) {
        throw std::domain_error("localize: entry " + std::to_string(in[c]) + " in row " + std::to_string(r) +
                                " is not a nonnegative weight");
      }
      o[c] = in[c] > m ? in[c] - m : 0.0;
      total += o[c];
    }
    if (total > 0.0) {
      for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
    } else {
      fallback[r] = 1;
      std::copy(in, in + cols, o);
    }
  }
  return fallback;
}

}  // namespace

void LalParams::validate() const {
  if (!(m >= 0.0 && m < 1.0)) throw std::invalid_argument("LalParams: threshold m must lie in [0, 1)");
  if (d_k < 1) throw std::invalid_argument("LalParams: d_k must be >= 1");
}

Tensor localize(const Tensor& rows, double m) {
  Tensor out(rows.shape);
  localize_rows(rows, m, out.data);
  return out;
}

Var localize(Var rows, double m) {
  const Tensor& x = rows.value();
  Tensor out(x.shape);
  std::vector<char> fallback = localize_rows(x, m, out.data);
  const auto [nrows, cols] = row_layout(x);

  Tape& tape = rows.tape();
  std::uint64_t pattern = 0;
  for (std::size_t i = 0; i < x.size(); ++i) pattern = pattern * 31 + (x.data[i] > m ? 1 : 0);
  for (char f : fallback) pattern = pattern * 31 + static_cast<std::uint64_t>(f);
  tape.mix_branch(pattern);

  const std::size_t ix = rows.id();
  const std::size_t self = tape.size();
  return tape.record(std::move(out), {rows},
                     [ix, self, m, nrows, cols, fallback = std::move(fallback)](Tape& t, std::span<const double> g) {
                       double* gx = t.grad_ptr(ix);
                       if (!gx) return;
                       const Tensor& in = t.value(ix);
                       const Tensor& y = t.value(self);
                       for (std::size_t r = 0; r < nrows; ++r) {
                         const std::size_t base = r * cols;
                         if (fallback[r]) {
                           for (std::size_t c = 0; c < cols; ++c) gx[base + c] += g[base + c];
                           continue;
                         }
                         double total = 0.0, dot = 0.0;
                         for (std::size_t c = 0; c < cols; ++c) {
                           const double v = in.data[base + c];
                           if (v > m) total += v - m;
                           dot += g[base + c] * y.data[base + c];
                         }
                         // Clipped entries receive no gradient at all.
                         for (std::size_t c = 0; c < cols; ++c) {
                           if (in.data[base + c] > m) gx[base + c] += (g[base + c] - dot) / total;
                         }
                       }
                     });
}

Tensor l_softmax(const Tensor& logits, double m) { return localize(nn::softmax(logits), m); }

Var l_softmax(Var logits, double m) {
  if (logits.value().rank() == 0) throw DimensionError("l_softmax needs at least one axis");
  return localize(nn::softmax(logits, logits.value().rank() - 1), m);
}

Var lal_forward(Var q, Var k, Var v, double m, LalTrace* trace, ScoreCounter* counter) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  if (qv.cols() != kv.cols()) throw DimensionError("lal_forward Q/K", qv.shape, kv.shape);
  if (kv.rows() != vv.rows()) throw DimensionError("lal_forward K/V", kv.shape, vv.shape);
  LalParams{m, kv.cols()}.validate();

  if (counter) counter->add(qv.rows(), kv.rows());
  Var scores = ops::scale(ops::matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(kv.cols())));
  Var soft = nn::softmax(scores, 1);
  Var weights = localize(soft, m);
  if (trace) *trace = {scores, soft, weights};
  return ops::matmul(weights, v);
}

AttentionHeads::AttentionHeads(std::size_t width, std::size_t heads_, std::size_t head_dim_, Prng& rng)
    : heads(heads_), head_dim(head_dim_) {
  if (heads == 0 || head_dim == 0) throw std::invalid_argument("AttentionHeads: heads and head_dim must be >= 1");
  if (heads * head_dim != width) {
    throw std::invalid_argument("AttentionHeads: heads * head_dim (" + std::to_string(heads * head_dim) +
                                ") must equal model width " + std::to_string(width));
  }
  for (auto* l : {&wq, &wk, &wv, &wo}) {
    *l = nn::LinearLayer(width, width);
    nn::default_init(*l, rng);
  }
}

void AttentionHeads::append_parameters(ParamList& out, const std::string& prefix) {
  wq.append_parameters(out, prefix + ".wq");
  wk.append_parameters(out, prefix + ".wk");
  wv.append_parameters(out, prefix + ".wv");
  wo.append_parameters(out, prefix + ".wo");
}

Var mha_forward(AttentionHeads& h, Var q_in, Var k_in, Var v_in, ScoreCounter* counter) {
  const std::size_t width = h.width();
  for (const Var* x : {&q_in, &k_in, &v_in}) {
    if (x->value().cols() != width) {
      throw DimensionError("mha_forward: input width must equal heads*head_dim", x->shape(), Shape{h.heads, h.head_dim});
    }
  }
  if (k_in.value().rows() != v_in.value().rows()) throw DimensionError("mha_forward K/V", k_in.shape(), v_in.shape());
  if (counter) counter->add(q_in.value().rows(), k_in.value().rows());

  Var q = nn::linear_forward(h.wq, q_in);
  Var k = nn::linear_forward(h.wk, k_in);
  Var v = nn::linear_forward(h.wv, v_in);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(h.head_dim));
  std::vector<Var> outs;
  outs.reserve(h.heads);
  for (std::size_t i = 0; i < h.heads; ++i) {
    const std::size_t b = i * h.head_dim, e = b + h.head_dim;
    Var scores = ops::scale(ops::matmul_nt(ops::slice_cols(q, b, e), ops::slice_cols(k, b, e)), inv_sqrt);
    outs.push_back(ops::matmul(nn::softmax(scores, 1), ops::slice_cols(v, b, e)));
  }
  Var merged = h.heads == 1 ? outs.front() : ops::concat_cols(outs);
  return nn::linear_forward(h.wo, merged);
}

std::uint64_t attention_map_cost(HyperArch arch, std::size_t depth_e, std::size_t depth_d, std::size_t l_d,
                                 std::size_t l_r) {
  const std::uint64_t d = l_d, r = l_r;
  if (arch == HyperArch::encoder_only) return depth_e * (d * d + r * r + 2 * d * r);
  return depth_e * d * d + depth_d * (r * r + d * r);
}

}  // namespace anr::attention
