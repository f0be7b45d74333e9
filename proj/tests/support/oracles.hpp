#pragma once

// Independent reference computations used as test oracles. Nothing here calls
// into the differentiation or attention code under test.

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "anr/tape.hpp"

namespace oracle {

/// Central differences of f with respect to every element of t.
inline std::vector<double> numeric_grad(const std::function<double()>& f, anr::Tensor& t, double h = 1e-6) {
  std::vector<double> g(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double orig = t.data[i];
    t.data[i] = orig + h;
    const double up = f();
    t.data[i] = orig - h;
    const double down = f();
    t.data[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_rel_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-4) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

/// Row-wise softmax of a plain row-major matrix.
inline std::vector<double> softmax_rows(const std::vector<double>& x, std::size_t rows, std::size_t cols) {
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -INFINITY;
    for (std::size_t c = 0; c < cols; ++c) mx = std::max(mx, x[r * cols + c]);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += std::exp(x[r * cols + c] - mx);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = std::exp(x[r * cols + c] - mx) / z;
  }
  return out;
}

/// softmax(Q K^T / sqrt(dk)) V with plain loops.
inline std::vector<double> attention(const std::vector<double>& q, const std::vector<double>& k,
                                     const std::vector<double>& v, std::size_t nq, std::size_t nk, std::size_t dk,
                                     std::size_t dv) {
  std::vector<double> s(nq * nk);
  for (std::size_t i = 0; i < nq; ++i)
    for (std::size_t j = 0; j < nk; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < dk; ++t) acc += q[i * dk + t] * k[j * dk + t];
      s[i * nk + j] = acc / std::sqrt(static_cast<double>(dk));
    }
  const auto a = softmax_rows(s, nq, nk);
  std::vector<double> out(nq * dv, 0.0);
  for (std::size_t i = 0; i < nq; ++i)
    for (std::size_t j = 0; j < nk; ++j)
      for (std::size_t t = 0; t < dv; ++t) out[i * dv + t] += a[i * nk + j] * v[j * dv + t];
  return out;
}

/// O(n^2) forward DFT, X_k = sum_t x_t exp(-2 pi i k t / n), with long-double twiddles.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    long double re = 0.0L, im = 0.0L;
    for (std::size_t t = 0; t < n; ++t) {
      const long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>(k * t) / n;
      re += x[t] * std::cos(ang);
      im += x[t] * std::sin(ang);
    }
    out[k] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

}  // namespace oracle
