#include <doctest.h>

#include <cmath>

#include "anr/ops.hpp"
#include "anr/prng.hpp"
#include "support/oracles.hpp"

using namespace anr;

namespace {

Tensor random_tensor(Shape shape, Prng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = scale * rng.normal();
  return t;
}

/// Runs a forward+backward of `loss` on a fresh tape and returns the gradient of `x`.
std::vector<double> analytic_grad(Tensor& x, const std::function<Var(Tape&)>& loss) {
  x.clear_grad();
  Tape t;
  t.backward(loss(t));
  return x.grad ? *x.grad : std::vector<double>(x.size(), 0.0);
}

double value_of(const std::function<Var(Tape&)>& loss) {
  Tape t;
  return loss(t).value().item();
}

}  // namespace

TEST_CASE("tensor shape invariants") {
  Tensor t(Shape{2, 3}, 1.5);
  CHECK(t.size() == element_count(t.shape));
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  auto& g = t.ensure_grad();
  CHECK(g.size() == t.size());
}

TEST_CASE("matmul examples") {
  Tape t;
  Var eye = t.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  Var col = t.constant(Tensor::matrix({{3}, {4}}));
  CHECK(ops::matmul(eye, col).value().data == std::vector<double>{3, 4});
  Var row = t.constant(Tensor::matrix({{1, 2}}));
  CHECK(ops::matmul(row, col).value().item() == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape t;
  Var a = t.constant(Tensor(Shape{2, 3}));
  Var b = t.constant(Tensor(Shape{2, 3}));
  try {
    ops::matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("matmul") != std::string::npos);
  }
}

TEST_CASE("gradient of sum(A B) w.r.t. A is ones * B^T") {
  Prng rng(3);
  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  auto loss = [&](Tape& t) { return ops::sum(ops::matmul(t.leaf(a), t.constant(b))); };
  const auto g = analytic_grad(a, loss);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 4; ++k) CHECK(g[i * 4 + k] == doctest::Approx(b(k, 0) + b(k, 1)).epsilon(1e-14));
  const auto n = oracle::numeric_grad([&] { return value_of(loss); }, a);
  CHECK(oracle::max_rel_error(g, n) < 1e-6);
}

TEST_CASE("elementwise examples") {
  Tape t;
  Tensor x = Tensor::vector({-1, 0, 2});
  Var r = ops::relu(t.leaf(x));
  CHECK(r.value().data == std::vector<double>{0, 0, 2});
  t.backward(ops::sum(r));
  CHECK(*x.grad == std::vector<double>{0, 0, 1});  // relu'(0) = 0

  Tensor z = Tensor::scalar(0.0);
  const auto gs = analytic_grad(z, [&](Tape& tt) { return ops::sin(tt.leaf(z)); });
  CHECK(gs[0] == 1.0);

  Tensor e = Tensor::scalar(0.3);
  auto exp_loss = [&](Tape& tt) { return ops::exp(tt.leaf(e)); };
  const auto ge = analytic_grad(e, exp_loss);
  const auto ne = oracle::numeric_grad([&] { return value_of(exp_loss); }, e);
  CHECK(std::abs(ge[0] - ne[0]) / std::abs(ne[0]) < 1e-6);
  CHECK(ge[0] == doctest::Approx(std::exp(0.3)).epsilon(1e-15));
}

TEST_CASE("elementwise shape mismatch and scalar broadcast") {
  Tape t;
  Var a = t.constant(Tensor(Shape{2, 2}, 1.0));
  Var b = t.constant(Tensor(Shape{3}, 1.0));
  CHECK_THROWS_AS(ops::add(a, b), DimensionError);
  Var s = t.constant(Tensor::scalar(2.0));
  CHECK(ops::mul(a, s).value().data == std::vector<double>(4, 2.0));
  CHECK(ops::add(s, a).value().data == std::vector<double>(4, 3.0));
}

TEST_CASE("reduce examples") {
  Tape t;
  CHECK(ops::sum(t.constant(Tensor::vector({1, 2, 3}))).value().item() == 6.0);
  CHECK(ops::mean(t.constant(Tensor(Shape{3, 5}, 2.25))).value().item() == 2.25);
  CHECK_THROWS_AS(ops::reduce(ops::Reduce::sum, t.constant(Tensor(Shape{2, 2})), 2), std::out_of_range);

  Tensor x = Tensor::vector({2, 2, 1});
  const auto g = analytic_grad(x, [&](Tape& tt) { return ops::reduce(ops::Reduce::max, tt.leaf(x), 0); });
  CHECK(g == std::vector<double>{1, 0, 0});
}

TEST_CASE("backward examples") {
  Tensor x = Tensor::scalar(3.0);
  CHECK(analytic_grad(x, [&](Tape& t) { return ops::square(t.leaf(x)); })[0] == 6.0);

  // Two paths to the same leaf: x*x + 2x has gradient 2x + 2.
  const auto g2 = analytic_grad(x, [&](Tape& t) {
    Var v = t.leaf(x);
    return ops::add(ops::mul(v, v), ops::scale(v, 2.0));
  });
  CHECK(g2[0] == 8.0);

  Prng rng(5);
  Tensor w = random_tensor({4, 3}, rng), in = random_tensor({3, 6}, rng);
  auto loss = [&](Tape& t) { return ops::sum(ops::relu(ops::matmul(t.leaf(w), t.constant(in)))); };
  const auto gw = analytic_grad(w, loss);
  const auto nw = oracle::numeric_grad([&] { return value_of(loss); }, w);
  CHECK(oracle::max_rel_error(gw, nw) < 1e-5);
}

TEST_CASE("backward errors") {
  Tensor x(Shape{2}, 1.0);
  {
    Tape t;
    CHECK_THROWS_AS(t.backward(t.leaf(x)), GradientError);  // not scalar
  }
  {
    Tape t;
    CHECK_THROWS_AS(t.backward(ops::sum(t.constant(x))), GradientError);  // detached
  }
  {
    Tape t;
    Var l = ops::sum(t.leaf(x));
    t.backward(l);
    CHECK_THROWS_AS(t.backward(l), GradientError);  // consumed
  }
}

TEST_CASE("detached tensors never receive gradient") {
  Tensor c(Shape{2}, 1.0), p(Shape{2}, 2.0);
  Tape t;
  Var l = ops::sum(ops::mul(t.constant(c), t.leaf(p)));
  t.backward(l);
  CHECK_FALSE(c.grad.has_value());
  CHECK(*p.grad == std::vector<double>{1, 1});
}

TEST_CASE("frozen leaves are recorded as constants") {
  Tensor a(Shape{2}, 1.0), b(Shape{2}, 3.0);
  Tape t;
  t.freeze(a);
  Var l = ops::sum(ops::mul(t.leaf(a), t.leaf(b)));
  t.backward(l);
  CHECK_FALSE(a.grad.has_value());
  CHECK(*b.grad == std::vector<double>{1, 1});
  Tape u;
  u.leaf(a);
  CHECK_THROWS_AS(u.freeze(a), GradientError);
}

TEST_CASE("every primitive matches finite differences at 10 random points") {
  Prng rng(11);
  using Unary = std::function<Var(Var)>;
  const std::vector<std::pair<const char*, Unary>> unary = {
      {"relu", [](Var v) { return ops::relu(v); }},
      {"sin", [](Var v) { return ops::sin(v); }},
      {"exp", [](Var v) { return ops::exp(v); }},
      {"square", [](Var v) { return ops::square(v); }},
      {"scale", [](Var v) { return ops::scale(v, -2.5); }},
      {"shift", [](Var v) { return ops::shift(v, 0.7); }},
      {"transpose", [](Var v) { return ops::transpose(v); }},
      {"reduce_max", [](Var v) { return ops::reduce(ops::Reduce::max, v, 1); }},
      {"reduce_mean", [](Var v) { return ops::reduce(ops::Reduce::mean, v, 0); }},
  };
  for (const auto& [name, f] : unary) {
    CAPTURE(name);
    for (int point = 0; point < 10; ++point) {
      Tensor x = random_tensor({2, 3}, rng);
      if (std::string(name) == "relu")
        for (double& v : x.data)
          if (std::abs(v) < 1e-4) v = 0.5;
      Tensor w = random_tensor({2, 3}, rng);
      auto loss = [&](Tape& t) {
        Var y = f(t.leaf(x));
        Tensor ww(y.shape(), std::vector<double>(w.data.begin(), w.data.begin() + static_cast<long>(y.value().size())));
        return ops::sum(ops::mul(y, t.constant(ww)));
      };
      const auto g = analytic_grad(x, loss);
      const auto n = oracle::numeric_grad([&] { return value_of(loss); }, x);
      CHECK(oracle::max_rel_error(g, n) < 1e-5);
    }
  }
  for (int point = 0; point < 10; ++point) {
    Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng), m = random_tensor({3, 2}, rng);
    const std::vector<std::pair<const char*, std::function<Var(Tape&)>>> binary = {
        {"add", [&](Tape& t) { return ops::sum(ops::square(ops::add(t.leaf(a), t.leaf(b)))); }},
        {"sub", [&](Tape& t) { return ops::sum(ops::square(ops::sub(t.leaf(a), t.leaf(b)))); }},
        {"mul", [&](Tape& t) { return ops::sum(ops::mul(t.leaf(a), t.leaf(b))); }},
        {"matmul", [&](Tape& t) { return ops::sum(ops::square(ops::matmul(t.leaf(a), t.leaf(m)))); }},
    };
    for (const auto& [name, loss] : binary) {
      CAPTURE(name);
      const auto g = analytic_grad(a, loss);
      const auto n = oracle::numeric_grad([&] { return value_of(loss); }, a);
      CHECK(oracle::max_rel_error(g, n) < 1e-5);
    }
  }
}

TEST_CASE("backward is linear in the loss") {
  Prng rng(2);
  Tensor x = random_tensor({3, 3}, rng);
  auto l1 = [&](Tape& t) { return ops::sum(ops::sin(t.leaf(x))); };
  auto l2 = [&](Tape& t) { return ops::sum(ops::square(t.leaf(x))); };
  const auto g1 = analytic_grad(x, l1);
  const auto g2 = analytic_grad(x, l2);
  const auto g12 = analytic_grad(x, [&](Tape& t) { return ops::add(l1(t), l2(t)); });
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(g12[i] - (g1[i] + g2[i])) < 1e-12);
}

TEST_CASE("identical forward and backward is bit-identical") {
  auto run = [] {
    Prng rng(99);
    Tensor w = random_tensor({4, 4}, rng), x = random_tensor({4, 2}, rng);
    Tape t;
    t.backward(ops::sum(ops::exp(ops::scale(ops::relu(ops::matmul(t.leaf(w), t.leaf(x))), 0.1))));
    return *w.grad;
  };
  CHECK(run() == run());
}

TEST_CASE("shape ops") {
  Tape t;
  Var a = t.constant(Tensor::matrix({{1, 2, 3}, {4, 5, 6}}));
  CHECK(ops::slice_cols(a, 1, 3).value().data == std::vector<double>{2, 3, 5, 6});
  CHECK(ops::slice_rows(a, 1, 2).value().data == std::vector<double>{4, 5, 6});
  CHECK(ops::transpose(a).value().data == std::vector<double>{1, 4, 2, 5, 3, 6});
  CHECK(ops::reshape(a, Shape{3, 2}).value().shape == Shape{3, 2});
  CHECK_THROWS_AS(ops::reshape(a, Shape{4, 2}), DimensionError);
  const Var parts[] = {a, a};
  CHECK(ops::concat_rows(parts).value().shape == Shape{4, 3});
  CHECK(ops::concat_cols(parts).value().data == std::vector<double>{1, 2, 3, 1, 2, 3, 4, 5, 6, 4, 5, 6});
  Var bias = t.constant(Tensor::vector({10, 20, 30}));
  CHECK(ops::add_row(a, bias).value().data == std::vector<double>{11, 22, 33, 14, 25, 36});
}
