#include "anr/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace anr::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Tensor& t) {
  return ConstMap(t.data.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

ConstMap view(std::span<const double> g, std::size_t r, std::size_t c) {
  return ConstMap(g.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

MutMap view(double* g, std::size_t r, std::size_t c) {
  return MutMap(g, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

void require_matrix(const char* op, const Tensor& t) {
  if (t.rank() > 2) throw DimensionError(std::string(op) + ": expected rank <= 2, got " + to_string(t.shape));
}

template <class F, class DF>
Var unary(Var a, F f, DF df) {
  const Tensor& x = a.value();
  Tensor out(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = f(x.data[i]);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, df](Tape& t, std::span<const double> g) {
    double* ga = t.grad_ptr(ia);
    if (!ga) return;
    const Tensor& x = t.value(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x.data[i]);
  });
}

enum class Bin { add, sub, mul };

Var binary(const char* name, Bin kind, Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const bool same = x.shape == y.shape;
  const bool a_scalar = !same && x.size() == 1;
  const bool b_scalar = !same && y.size() == 1;
  if (!same && !a_scalar && !b_scalar) throw DimensionError(name, x.shape, y.shape);

  const Tensor& big = a_scalar ? y : x;
  Tensor out(big.shape);
  const std::size_t n = out.size();
  auto at = [](const Tensor& t, std::size_t i) { return t.size() == 1 ? t.data[0] : t.data[i]; };
  for (std::size_t i = 0; i < n; ++i) {
    const double u = at(x, i), v = at(y, i);
    out.data[i] = kind == Bin::add ? u + v : kind == Bin::sub ? u - v : u * v;
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, kind](Tape& t, std::span<const double> g) {
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(ib);
    auto at = [](const Tensor& tt, std::size_t i) { return tt.size() == 1 ? tt.data[0] : tt.data[i]; };
    // Fetch both buffers before writing: a and b may be the same node.
    double* ga = t.grad_ptr(ia);
    double* gb = t.grad_ptr(ib);
    const bool a_bcast = x.size() == 1 && g.size() != 1;
    const bool b_bcast = y.size() == 1 && g.size() != 1;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double da, db;
      switch (kind) {
        case Bin::add: da = g[i]; db = g[i]; break;
        case Bin::sub: da = g[i]; db = -g[i]; break;
        default: da = g[i] * at(y, i); db = g[i] * at(x, i); break;
      }
      if (ga) ga[a_bcast ? 0 : i] += da;
      if (gb) gb[b_bcast ? 0 : i] += db;
    }
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_matrix("matmul", x);
  require_matrix("matmul", y);
  if (x.cols() != y.rows()) throw DimensionError("matmul", x.shape, y.shape);
  const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
  Tensor out(Shape{m, n});
  view(out.data.data(), m, n).noalias() = view(x) * view(y);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, m, k, n](Tape& t, std::span<const double> g) {
    auto dc = view(g, m, n);
    double* ga = t.grad_ptr(ia);
    double* gb = t.grad_ptr(ib);
    if (ga) view(ga, m, k).noalias() += dc * view(t.value(ib)).transpose();
    if (gb) view(gb, k, n).noalias() += view(t.value(ia)).transpose() * dc;
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_matrix("matmul_nt", x);
  require_matrix("matmul_nt", y);
  if (x.cols() != y.cols()) throw DimensionError("matmul_nt", x.shape, y.shape);
  const std::size_t m = x.rows(), k = x.cols(), n = y.rows();
  Tensor out(Shape{m, n});
  view(out.data.data(), m, n).noalias() = view(x) * view(y).transpose();
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, m, k, n](Tape& t, std::span<const double> g) {
    auto dc = view(g, m, n);
    double* ga = t.grad_ptr(ia);
    double* gb = t.grad_ptr(ib);
    if (ga) view(ga, m, k).noalias() += dc * view(t.value(ib));
    if (gb) view(gb, n, k).noalias() += dc.transpose() * view(t.value(ia));
  });
}

Var transpose(Var a) {
  const Tensor& x = a.value();
  require_matrix("transpose", x);
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out(Shape{n, m});
  view(out.data.data(), n, m) = view(x).transpose();
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, m, n](Tape& t, std::span<const double> g) {
    if (double* ga = t.grad_ptr(ia)) view(ga, m, n) += view(g, n, m).transpose();
  });
}

Var add(Var a, Var b) { return binary("add", Bin::add, a, b); }
Var sub(Var a, Var b) { return binary("sub", Bin::sub, a, b); }
Var mul(Var a, Var b) { return binary("mul", Bin::mul, a, b); }

Var scale(Var a, double factor) {
  return unary(a, [factor](double v) { return v * factor; }, [factor](double) { return factor; });
}

Var shift(Var a, double offset) {
  return unary(a, [offset](double v) { return v + offset; }, [](double) { return 1.0; });
}

Var relu(Var a) {
  const Tensor& x = a.value();
  std::uint64_t pattern = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    pattern = pattern * 31 + (x.data[i] > 0.0 ? 1 : 0);
  }
  a.tape().mix_branch(pattern);
  return unary(a, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sin(Var a) {
  return unary(a, [](double v) { return std::sin(v); }, [](double v) { return std::cos(v); });
}

Var exp(Var a) {
  return unary(a, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Var square(Var a) {
  return unary(a, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var reduce(Reduce op, Var a, std::size_t axis) {
  const Tensor& x = a.value();
  if (axis >= x.rank()) {
    throw std::out_of_range("reduce: axis " + std::to_string(axis) + " out of range for shape " + to_string(x.shape));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.shape[i];
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.shape[i];
  const std::size_t len = x.shape[axis];
  if (len == 0) throw DimensionError("reduce over empty axis of shape " + to_string(x.shape));

  Shape out_shape = x.shape;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape);
  std::vector<std::size_t> argmax;
  if (op == Reduce::max) argmax.resize(outer * inner);

  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double acc = op == Reduce::max ? x.data[base] : 0.0;
      std::size_t best = 0;
      for (std::size_t j = 0; j < len; ++j) {
        const double v = x.data[base + j * inner];
        if (op == Reduce::max) {
          if (v > acc) {
            acc = v;
            best = j;
          }
        } else {
          acc += v;
        }
      }
      if (op == Reduce::mean) acc /= static_cast<double>(len);
      out.data[o * inner + in] = acc;
      if (op == Reduce::max) {
        argmax[o * inner + in] = best;
        a.tape().mix_branch(best);
      }
    }
  }

  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, op, outer, inner, len, argmax = std::move(argmax)](Tape& t, std::span<const double> g) {
                           double* ga = t.grad_ptr(ia);
                           if (!ga) return;
                           const double w = op == Reduce::mean ? 1.0 / static_cast<double>(len) : 1.0;
                           for (std::size_t o = 0; o < outer; ++o) {
                             for (std::size_t in = 0; in < inner; ++in) {
                               const std::size_t base = o * len * inner + in;
                               const double up = g[o * inner + in];
                               if (op == Reduce::max) {
                                 ga[base + argmax[o * inner + in] * inner] += up;
                               } else {
                                 for (std::size_t j = 0; j < len; ++j) ga[base + j * inner] += up * w;
                               }
                             }
                           }
                         });
}

Var sum(Var a) {
  const Tensor& x = a.value();
  double acc = 0.0;
  for (double v : x.data) acc += v;
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(acc), {a}, [ia](Tape& t, std::span<const double> g) {
    double* ga = t.grad_ptr(ia);
    if (!ga) return;
    const std::size_t n = t.value(ia).size();
    for (std::size_t i = 0; i < n; ++i) ga[i] += g[0];
  });
}

Var mean(Var a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var add_row(Var x, Var bias) {
  const Tensor& v = x.value();
  const Tensor& b = bias.value();
  require_matrix("add_row", v);
  if (b.size() != v.cols()) throw DimensionError("add_row", v.shape, b.shape);
  const std::size_t m = v.rows(), n = v.cols();
  Tensor out(v.shape, v.data);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out.data[r * n + c] += b.data[c];
  const std::size_t ix = x.id(), ib = bias.id();
  return x.tape().record(std::move(out), {x, bias}, [ix, ib, m, n](Tape& t, std::span<const double> g) {
    double* gx = t.grad_ptr(ix);
    double* gb = t.grad_ptr(ib);
    if (gx)
      for (std::size_t i = 0; i < m * n; ++i) gx[i] += g[i];
    if (gb)
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
  });
}

Var reshape(Var a, Shape shape) {
  const Tensor& x = a.value();
  if (element_count(shape) != x.size()) throw DimensionError("reshape", x.shape, shape);
  const std::size_t ia = a.id();
  return a.tape().record(Tensor(std::move(shape), x.data), {a}, [ia](Tape& t, std::span<const double> g) {
    if (double* ga = t.grad_ptr(ia))
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  require_matrix("slice_cols", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (begin > end || end > n) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                         to_string(x.shape));
  }
  const std::size_t w = end - begin;
  Tensor out(Shape{m, w});
  for (std::size_t r = 0; r < m; ++r)
    std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(r * n + begin), w,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * w));
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, m, n, w, begin](Tape& t, std::span<const double> g) {
    if (double* ga = t.grad_ptr(ia))
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < w; ++c) ga[r * n + begin + c] += g[r * w + c];
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& x = a.value();
  require_matrix("slice_rows", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (begin > end || end > m) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                         to_string(x.shape));
  }
  Tensor out(Shape{end - begin, n},
             std::vector<double>(x.data.begin() + static_cast<std::ptrdiff_t>(begin * n),
                                 x.data.begin() + static_cast<std::ptrdiff_t>(end * n)));
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, n, begin](Tape& t, std::span<const double> g) {
    if (double* ga = t.grad_ptr(ia))
      for (std::size_t i = 0; i < g.size(); ++i) ga[begin * n + i] += g[i];
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  const std::size_t m = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix("concat_cols", p.value());
    if (p.value().rows() != m) throw DimensionError("concat_cols", parts[0].shape(), p.shape());
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Tensor out(Shape{m, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& x = parts[k].value();
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < widths[k]; ++c) out.data[r * total + off + c] = x.data[r * widths[k] + c];
    off += widths[k];
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return parts[0].tape().record(std::move(out), parts,
                                [ids, widths, m, total](Tape& t, std::span<const double> g) {
                                  std::size_t off = 0;
                                  for (std::size_t k = 0; k < ids.size(); ++k) {
                                    if (double* gp = t.grad_ptr(ids[k]))
                                      for (std::size_t r = 0; r < m; ++r)
                                        for (std::size_t c = 0; c < widths[k]; ++c)
                                          gp[r * widths[k] + c] += g[r * total + off + c];
                                    off += widths[k];
                                  }
                                });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows of nothing");
  const std::size_t n = parts[0].value().cols();
  std::size_t total = 0;
  std::vector<double> values;
  std::vector<std::size_t> sizes;
  for (const Var& p : parts) {
    require_matrix("concat_rows", p.value());
    if (p.value().cols() != n) throw DimensionError("concat_rows", parts[0].shape(), p.shape());
    total += p.value().rows();
    sizes.push_back(p.value().size());
    values.insert(values.end(), p.value().data.begin(), p.value().data.end());
  }
  std::vector<std::size_t> ids;
  for (const Var& p : parts) ids.push_back(p.id());
  return parts[0].tape().record(Tensor(Shape{total, n}, std::move(values)), parts,
                                [ids, sizes](Tape& t, std::span<const double> g) {
                                  std::size_t off = 0;
                                  for (std::size_t k = 0; k < ids.size(); ++k) {
                                    if (double* gp = t.grad_ptr(ids[k]))
                                      for (std::size_t i = 0; i < sizes[k]; ++i) gp[i] += g[off + i];
                                    off += sizes[k];
                                  }
                                });
}

}  // namespace anr::ops
