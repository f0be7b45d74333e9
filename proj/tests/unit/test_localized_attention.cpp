#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "anr/attention.hpp"
#include "anr/ops.hpp"
#include "support/oracles.hpp"

using namespace anr;
using attention::HyperArch;

namespace {

Tensor random_tensor(Shape shape, Prng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

}  // namespace

TEST_CASE("localize examples") {
  const Tensor a = attention::localize(Tensor::matrix({{0.5, 0.3, 0.2}}), 0.25);
  CHECK(a.data[0] == doctest::Approx(0.25 / 0.30).epsilon(1e-15));
  CHECK(a.data[1] == doctest::Approx(0.05 / 0.30).epsilon(1e-12));
  CHECK(a.data[2] == 0.0);

  const Tensor row = Tensor::matrix({{0.1, 0.6, 0.3}});
  CHECK(attention::localize(row, 0.0).data == row.data);

  const Tensor fallback = Tensor::matrix({{0.4, 0.35, 0.25}});
  CHECK(attention::localize(fallback, 0.5).data == fallback.data);
}

TEST_CASE("localize rejects negative entries") {
  CHECK_THROWS_AS(attention::localize(Tensor::matrix({{0.5, -0.1, 0.6}}), 0.1), std::domain_error);
}

TEST_CASE("l_softmax examples") {
  Prng rng(1);
  const Tensor x = random_tensor({5, 6}, rng, 3.0);
  const Tensor ls = attention::l_softmax(x, 0.0);
  const auto ref = oracle::softmax_rows(x.data, 5, 6);
  for (std::size_t i = 0; i < ls.size(); ++i) CHECK(std::abs(ls.data[i] - ref[i]) < 1e-12);

  for (double v : attention::l_softmax(Tensor::matrix({{0, 0, 0}}), 0.1).data) CHECK(v == doctest::Approx(1.0 / 3.0));

  // Side weights e^-10 / (1 + 2 e^-10) ~ 4.54e-5 fall below m.
  const Tensor peak = attention::l_softmax(Tensor::matrix({{10, 0, 0}}), 0.0015);
  CHECK(peak.data == std::vector<double>{1.0, 0.0, 0.0});

  CHECK_THROWS_AS(attention::l_softmax(Tensor::matrix({{0, NAN}}), 0.1), std::domain_error);
}

TEST_CASE("l_softmax support, normalization and shift invariance") {
  Prng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(20);
    Tensor x = random_tensor({1, n}, rng, 4.0);
    const double m = rng.uniform(0.0, 0.3);
    const Tensor y = attention::l_softmax(x, m);
    const auto p = oracle::softmax_rows(x.data, 1, n);
    const bool any_above = std::any_of(p.begin(), p.end(), [&](double v) { return v > m; });
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(y.data[i] >= 0.0);
      sum += y.data[i];
      if (any_above) CHECK((y.data[i] > 0.0) == (p[i] > m));
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);

    Tensor shifted = x;
    for (double& v : shifted.data) v += 17.25;
    const Tensor ys = attention::l_softmax(shifted, m);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(ys.data[i] - y.data[i]) < 1e-12);
  }
}

TEST_CASE("lal with a single key returns that value row") {
  Prng rng(3);
  Tape t;
  Var q = t.constant(random_tensor({4, 3}, rng));
  Var k = t.constant(random_tensor({1, 3}, rng));
  const Tensor vv = random_tensor({1, 2}, rng);
  const Tensor out = attention::lal_forward(q, k, t.constant(vv), 0.0015).value();
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 2; ++c) CHECK(out(r, c) == doctest::Approx(vv.data[c]).epsilon(1e-15));
}

TEST_CASE("lal at m = 0 equals the reference attention on 100 instances") {
  Prng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t nq = 1 + rng.below(6), nk = 1 + rng.below(8), dk = 1 + rng.below(5), dv = 1 + rng.below(4);
    const Tensor q = random_tensor({nq, dk}, rng), k = random_tensor({nk, dk}, rng), v = random_tensor({nk, dv}, rng);
    Tape t;
    const Tensor out = attention::lal_forward(t.constant(q), t.constant(k), t.constant(v), 0.0).value();
    const auto ref = oracle::attention(q.data, k.data, v.data, nq, nk, dk, dv);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out.data[i] - ref[i]) < 1e-12);
  }
}

TEST_CASE("lal is invariant to jointly permuting keys and values") {
  Prng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor q = random_tensor({5, 4}, rng), k = random_tensor({7, 4}, rng, 2.0), v = random_tensor({7, 3}, rng);
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Tensor kp(k.shape), vp(v.shape);
    for (std::size_t i = 0; i < 7; ++i) {
      for (std::size_t c = 0; c < 4; ++c) kp(i, c) = k(perm[i], c);
      for (std::size_t c = 0; c < 3; ++c) vp(i, c) = v(perm[i], c);
    }
    Tape t;
    const Tensor a = attention::lal_forward(t.constant(q), t.constant(k), t.constant(v), 0.05).value();
    const Tensor b = attention::lal_forward(t.constant(q), t.constant(kp), t.constant(vp), 0.05).value();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) < 1e-12);
  }
}

TEST_CASE("gradients stop at clipped attention weights") {
  Prng rng(6);
  int instances = 0;
  for (int trial = 0; trial < 400 && instances < 30; ++trial) {
    Tensor q = random_tensor({4, 3}, rng, 2.0), k = random_tensor({6, 3}, rng, 2.0), v = random_tensor({6, 2}, rng);
    const double m = 0.05;
    Tape t;
    attention::LalTrace trace;
    Var out = attention::lal_forward(t.leaf(q), t.leaf(k), t.leaf(v), m, &trace);
    const Tensor soft = trace.soft.value();
    const Tensor w = trace.weights.value();
    // Need a key clipped in every query row, and no fallback rows.
    std::vector<std::size_t> clipped;
    for (std::size_t j = 0; j < 6; ++j) {
      bool all = true;
      for (std::size_t r = 0; r < 4; ++r) all = all && w(r, j) == 0.0;
      if (all) clipped.push_back(j);
    }
    bool fallback = false;
    for (std::size_t r = 0; r < 4; ++r) {
      bool any = false;
      for (std::size_t j = 0; j < 6; ++j) any = any || soft(r, j) > m;
      fallback = fallback || !any;
    }
    if (clipped.empty() || fallback) continue;
    ++instances;
    Tensor wsum = random_tensor(out.shape(), rng);
    t.backward(ops::sum(ops::mul(out, t.constant(wsum))));
    const auto g_soft = t.grad(trace.soft);
    for (std::size_t j : clipped) {
      for (std::size_t c = 0; c < 2; ++c) CHECK((*v.grad)[j * 2 + c] == 0.0);
      for (std::size_t r = 0; r < 4; ++r) CHECK(g_soft[r * 6 + j] == 0.0);
    }
    // Every clipped (row, key) entry, not only fully clipped keys, gets no gradient.
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t j = 0; j < 6; ++j)
        if (w(r, j) == 0.0) CHECK(g_soft[r * 6 + j] == 0.0);

    // K rows of clipped keys still receive gradient through the softmax
    // normalization; it must match finite differences.
    auto loss = [&] {
      Tape u;
      Var o = attention::lal_forward(u.constant(q), u.constant(k), u.constant(v), m);
      return ops::sum(ops::mul(o, u.constant(wsum))).value().item();
    };
    const auto nk = oracle::numeric_grad(loss, k);
    CHECK(oracle::max_rel_error(*k.grad, nk) < 1e-5);
  }
  CHECK(instances >= 10);
}

TEST_CASE("multi-head attention reductions") {
  Prng rng(7);
  attention::AttentionHeads one(3, 1, 3, rng);
  for (auto* l : {&one.wq, &one.wk, &one.wv, &one.wo}) {
    l->weight = Tensor(Shape{3, 3});
    for (std::size_t i = 0; i < 3; ++i) l->weight(i, i) = 1.0;
    l->bias = Tensor(Shape{3});
  }
  const Tensor x = random_tensor({4, 3}, rng), mem = random_tensor({5, 3}, rng);
  Tape t;
  const Tensor a = attention::mha_forward(one, t.constant(x), t.constant(mem), t.constant(mem)).value();
  const Tensor b = attention::lal_forward(t.constant(x), t.constant(mem), t.constant(mem), 0.0).value();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.data[i] - b.data[i]) < 1e-12);

  // Identical keys: uniform weights, so every output row is the mean value row.
  Tensor same(Shape{5, 3});
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 3; ++c) same(r, c) = mem(0, c);
  const Tensor vals = random_tensor({5, 3}, rng);
  const Tensor u = attention::mha_forward(one, t.constant(x), t.constant(same), t.constant(vals)).value();
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < 5; ++r) mean += vals(r, c) / 5.0;
    for (std::size_t r = 0; r < 4; ++r) CHECK(u(r, c) == doctest::Approx(mean).epsilon(1e-12));
  }

  CHECK_THROWS_AS(attention::AttentionHeads(10, 3, 3, rng), std::invalid_argument);
}

TEST_CASE("score counter tallies once per attention call") {
  Prng rng(8);
  attention::AttentionHeads h(8, 4, 2, rng);
  attention::ScoreCounter counter;
  Tape t;
  attention::mha_forward(h, t.constant(random_tensor({3, 8}, rng)), t.constant(random_tensor({5, 8}, rng)),
                         t.constant(random_tensor({5, 8}, rng)), &counter);
  CHECK(counter.elements == 15);
  CHECK(counter.calls == 1);
}

TEST_CASE("attention map cost formulas") {
  CHECK(attention::attention_map_cost(HyperArch::encoder_decoder, 6, 6, 64, 16) == 32256);
  CHECK(attention::attention_map_cost(HyperArch::encoder_only, 6, 6, 64, 16) == 38400);
  for (std::size_t l : {1u, 7u, 32u})
    CHECK(attention::attention_map_cost(HyperArch::encoder_only, 4, 4, l, l) -
              attention::attention_map_cost(HyperArch::encoder_decoder, 4, 4, l, l) ==
          4 * l * l);
}

TEST_CASE("lal parameter validation") {
  CHECK_THROWS_AS((attention::LalParams{1.0, 4}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((attention::LalParams{-0.1, 4}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((attention::LalParams{0.1, 0}.validate()), std::invalid_argument);
  CHECK_NOTHROW((attention::LalParams{0.0015, 4}.validate()));
}
