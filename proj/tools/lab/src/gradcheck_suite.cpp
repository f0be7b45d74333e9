#include "anrlab/gradcheck_suite.hpp"

#include <cmath>

#include "anr/hypernet.hpp"
#include "anr/training.hpp"

namespace anrlab {

using namespace anr;
using spectral::GradcheckOptions;
using spectral::LossFn;

namespace {

Tensor random_tensor(Shape shape, Prng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

Tensor positive_tensor(Shape shape, Prng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(0.2, 1.5);
  return t;
}

/// sum(x * w) with w fixed, scaled so the loss stays O(1).
Var weighted_sum(Var x, Prng& rng) {
  Tensor w = random_tensor(x.shape(), rng, 1.0 / std::sqrt(static_cast<double>(x.value().size())));
  return ops::sum(ops::mul(x, x.tape().constant(std::move(w))));
}

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : rng_(seed) {}

  Prng& rng() { return rng_; }

  void check(const std::string& name, const ParamList& params, const std::function<Var(Tape&, Prng&)>& body,
             double tolerance = kGradcheckTolerance) {
    // The loss weights are redrawn from the same stream on every evaluation.
    const std::uint64_t loss_seed = rng_.next_u64();
    LossFn fn = [&body, loss_seed](Tape& t) {
      Prng r(loss_seed);
      return body(t, r);
    };
    GradcheckOptions opts;
    opts.tolerance = tolerance;
    opts.max_per_param = 24;
    out_.push_back({spectral::gradcheck(name, fn, params, opts), tolerance});
  }

  std::vector<SuiteEntry> take() { return std::move(out_); }

 private:
  Prng rng_;
  std::vector<SuiteEntry> out_;
};

void primitive_cases(Suite& s) {
  Prng& r = s.rng();
  Tensor a = random_tensor({3, 4}, r), b = random_tensor({4, 2}, r), c = random_tensor({3, 4}, r);
  Tensor bt = random_tensor({2, 4}, r), row = random_tensor({4}, r), one = random_tensor({1}, r);
  Tensor pos = positive_tensor({3, 4}, r), small = random_tensor({3, 4}, r, 0.5);
  Tensor d = random_tensor({2, 4}, r), e = random_tensor({3, 2}, r);

  s.check("matmul", {{"a", &a}, {"b", &b}},
          [&](Tape& t, Prng& g) { return weighted_sum(ops::matmul(t.leaf(a), t.leaf(b)), g); });
  s.check("matmul_nt", {{"a", &a}, {"bt", &bt}},
          [&](Tape& t, Prng& g) { return weighted_sum(ops::matmul_nt(t.leaf(a), t.leaf(bt)), g); });
  s.check("transpose", {{"a", &a}}, [&](Tape& t, Prng& g) { return weighted_sum(ops::transpose(t.leaf(a)), g); });
  s.check("add", {{"a", &a}, {"c", &c}},
          [&](Tape& t, Prng& g) { return weighted_sum(ops::add(t.leaf(a), t.leaf(c)), g); });
  s.check("sub", {{"a", &a}, {"c", &c}},
          [&](Tape& t, Prng& g) { return weighted_sum(ops::sub(t.leaf(a), t.leaf(c)), g); });
  s.check("mul", {{"a", &a}, {"c", &c}},
          [&](Tape& t, Prng& g) { return weighted_sum(ops::mul(t.leaf(a), t.leaf(c)), g); });
  s.check("mul_scalar_broadcast", {{"a", &a}, {"one", &one}},
          [&](Tape& t, Prng& g) { return weighted_sum(ops::mul(t.leaf(one), t.leaf(a)), g); });
  s.check("scale", {{"a", &a}}, [&](Tape& t, Prng& g) { return weighted_sum(ops::scale(t.leaf(a), -1.7), g); });
  s.check("shift", {{"a", &a}}, [&](Tape& t, Prng& g) { return weighted_sum(ops::shift(t.leaf(a), 0.3), g); });
  s.check("relu", {{"a", &a}}, [&](Tape& t, Prng& g) { return weighted_sum(ops::relu(t.leaf(a)), g); });
  s.check("sin", {{"a", &a}}, [&](Tape& t, Prng& g) { return weighted_sum(ops::sin(t.leaf(a)), g); });
  s.check("exp", {{"small", &small}}, [&](Tape& t, Prng& g) { return weighted_sum(ops::exp(t.leaf(small)), g); });
  s.check("square", {{"a", &a}}, [&](Tape& t, Prng& g) { return weighted_sum(ops::square(t.leaf(a)), g); });
  for (std::size_t axis : {0, 1}) {
    const std::string ax = std::to_string(axis);
    s.check("reduce_sum_axis" + ax, {{"a", &a}},
            [&, axis](Tape& t, Prng& g) { return weighted_sum(ops::reduce(ops::Reduce::sum, t.leaf(a), axis), g); });
    s.check("reduce_mean_axis" + ax, {{"a", &a}},
            [&, axis](Tape& t, Prng& g) { return weighted_sum(ops::reduce(ops::Reduce::mean, t.leaf(a), axis), g); });
    s.check("reduce_max_axis" + ax, {{"a", &a}},
            [&, axis](Tape& t, Prng& g) { return weighted_sum(ops::reduce(ops::Reduce::max, t.leaf(a), axis), g); });
  }
  s.check("sum", {{"a", &a}}, [&](Tape& t, Prng&) { return ops::scale(ops::sum(ops::square(t.leaf(a))), 0.1); });
  s.check("mean", {{"a", &a}}, [&](Tape& t, Prng&) { return ops::mean(ops::square(t.leaf(a))); });
  s.check("add_row", {{"a", &a}, {"row", &row}},
          [&](Tape& t, Prng& g) { return weighted_sum(ops::add_row(t.leaf(a), t.leaf(row)), g); });
  s.check("reshape", {{"a", &a}},
          [&](Tape& t, Prng& g) { return weighted_sum(ops::reshape(t.leaf(a), Shape{2, 6}), g); });
  s.check("slice_cols", {{"a", &a}},
          [&](Tape& t, Prng& g) { return weighted_sum(ops::slice_cols(t.leaf(a), 1, 3), g); });
  s.check("slice_rows", {{"a", &a}},
          [&](Tape& t, Prng& g) { return weighted_sum(ops::slice_rows(t.leaf(a), 1, 3), g); });
  s.check("concat_cols", {{"a", &a}, {"e", &e}}, [&](Tape& t, Prng& g) {
    const Var parts[] = {t.leaf(a), t.leaf(e)};
    return weighted_sum(ops::concat_cols(parts), g);
  });
  s.check("concat_rows", {{"a", &a}, {"d", &d}}, [&](Tape& t, Prng& g) {
    const Var parts[] = {t.leaf(a), t.leaf(d)};
    return weighted_sum(ops::concat_rows(parts), g);
  });
  s.check("softmax", {{"a", &a}}, [&](Tape& t, Prng& g) { return weighted_sum(nn::softmax(t.leaf(a), 1), g); });
  s.check("softmax_axis0", {{"a", &a}},
          [&](Tape& t, Prng& g) { return weighted_sum(nn::softmax(t.leaf(a), 0), g); });
  Tensor gain = positive_tensor({4}, r), bias = random_tensor({4}, r);
  s.check("layernorm", {{"a", &a}, {"gain", &gain}, {"bias", &bias}}, [&](Tape& t, Prng& g) {
    return weighted_sum(nn::layernorm(t.leaf(a), t.leaf(gain), t.leaf(bias)), g);
  });
  s.check("activation_sine", {{"a", &a}},
          [&](Tape& t, Prng& g) { return weighted_sum(nn::activate(t.leaf(a), nn::Activation::sine()), g); });
  s.check("activation_polynomial", {{"a", &a}}, [&](Tape& t, Prng& g) {
    return weighted_sum(nn::activate(t.leaf(a), nn::Activation::polynomial({0.1, 0.5, -0.3, 0.2})), g);
  });
  s.check("localize", {{"pos", &pos}},
          [&](Tape& t, Prng& g) { return weighted_sum(attention::localize(t.leaf(pos), 0.08), g); });
  s.check("l_softmax", {{"a", &a}},
          [&](Tape& t, Prng& g) { return weighted_sum(attention::l_softmax(t.leaf(a), 0.15), g); });
  s.check("mse", {{"a", &a}, {"c", &c}},
          [&](Tape& t, Prng&) { return train::mse(t.leaf(a), t.leaf(c)); });
}

void layer_cases(Suite& s) {
  Prng& r = s.rng();
  {
    nn::LinearLayer lin(4, 3);
    nn::default_init(lin, r);
    for (double& v : lin.bias.data) v = 0.1 * r.normal();
    Tensor x = random_tensor({5, 4}, r);
    s.check("linear", {{"weight", &lin.weight}, {"bias", &lin.bias}, {"x", &x}},
            [&](Tape& t, Prng& g) { return weighted_sum(nn::linear_forward(lin, t.leaf(x)), g); });
  }
  {
    Tensor q = random_tensor({5, 4}, r), k = random_tensor({6, 4}, r), v = random_tensor({6, 3}, r);
    s.check("lal", {{"q", &q}, {"k", &k}, {"v", &v}},
            [&](Tape& t, Prng& g) { return weighted_sum(attention::lal_forward(t.leaf(q), t.leaf(k), t.leaf(v), 0.1), g); });
  }
  {
    attention::AttentionHeads heads(8, 2, 4, r);
    Tensor x = random_tensor({5, 8}, r), mem = random_tensor({3, 8}, r);
    ParamList p{{"x", &x}, {"memory", &mem}};
    heads.append_parameters(p, "mha");
    s.check("multi_head_attention", p, [&](Tape& t, Prng& g) {
      return weighted_sum(attention::mha_forward(heads, t.leaf(x), t.leaf(mem), t.leaf(mem)), g);
    });
  }
  {
    repr::AnrConfig cfg;
    cfg.coord_dims = 2;
    cfg.pe_features = 8;
    cfg.pe_sigma = 1.0;
    cfg.tokens = 5;
    cfg.token_dim = 4;
    cfg.threshold = 0.05;
    cfg.converter.depth = 2;
    cfg.converter.width = 6;
    cfg.converter.output_dim = 3;
    repr::AnrInstance anr(cfg, r);
    Tensor coords = random_tensor({7, 2}, r, 0.5);
    Tensor target = random_tensor({7, 3}, r, 0.5);
    s.check("anr_loss", anr.parameters(), [&](Tape& t, Prng&) {
      return train::mse(anr.forward(t, coords), t.constant(target));
    });
  }
  hyper::HyperNetConfig hc;
  hc.enc_depth = 1;
  hc.dec_depth = 1;
  hc.heads = 2;
  hc.head_dim = 4;
  hc.ff_dim = 12;
  hc.patch_size = 2;
  hc.image_height = 4;
  hc.image_width = 4;
  hc.rtokens = 3;
  hc.token_dim = 4;
  {
    hyper::EncoderBlock block(hc, r);
    Tensor x = random_tensor({4, 8}, r);
    ParamList p{{"x", &x}};
    block.append_parameters(p, "enc");
    s.check("encoder_block", p,
            [&](Tape& t, Prng& g) { return weighted_sum(hyper::encoder_block_forward(block, t.leaf(x)), g); });
  }
  {
    hyper::DecoderBlock block(hc, r);
    Tensor y = random_tensor({3, 8}, r), mem = random_tensor({4, 8}, r);
    ParamList p{{"y", &y}, {"memory", &mem}};
    block.append_parameters(p, "dec");
    s.check("decoder_block", p, [&](Tape& t, Prng& g) {
      return weighted_sum(hyper::decoder_block_forward(block, t.leaf(y), t.leaf(mem)), g);
    });
  }
  {
    hyper::HyperNet net(hc, r);
    repr::AnrConfig ac;
    ac.pe_features = 8;
    ac.pe_sigma = 1.0;
    ac.tokens = hc.rtokens;
    ac.token_dim = hc.token_dim;
    ac.threshold = 0.05;
    ac.converter.depth = 1;
    ac.converter.width = 6;
    repr::AnrModel anr(ac, r);
    Tensor image(Shape{4, 4, 3});
    for (double& v : image.data) v = r.uniform();
    const Tensor coords = sampling::make_grid(sampling::GridSpec::image(4, 4));
    ParamList p = net.parameters();
    anr.append_parameters(p);
    const Tensor imgs[] = {image};
    const Tensor crds[] = {coords};
    s.check("hypernet_anr_pipeline", p,
            [&](Tape& t, Prng&) { return train::hypernet_batch_loss(net, anr, t, imgs, crds); },
            kPipelineTolerance);
  }
}

}  // namespace

std::vector<SuiteEntry> run_gradcheck_suite(std::uint64_t seed) {
  Suite s(seed);
  primitive_cases(s);
  layer_cases(s);
  return s.take();
}

}  // namespace anrlab
