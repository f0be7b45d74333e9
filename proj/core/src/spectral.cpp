#include "anr/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace anr::spectral {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_pow2(std::size_t n) { return n && (n & (n - 1)) == 0; }

void fft_in_place(std::vector<Complex>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const Complex w = std::polar(1.0, ang * static_cast<double>(k));
        const Complex u = a[i + k];
        const Complex v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

std::vector<Complex> transform(std::span<const Complex> x, bool inverse) {
  const std::size_t n = x.size();
  std::vector<Complex> out(x.begin(), x.end());
  if (n <= 1) return out;
  if (is_pow2(n)) {
    fft_in_place(out, inverse);
  } else {
    const double sign = inverse ? 1.0 : -1.0;
    for (std::size_t k = 0; k < n; ++k) {
      Complex acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        // Reduce k*t mod n first so the twiddle angle stays small and exact.
        const double ang = sign * kTwoPi * static_cast<double>((k * t) % n) / static_cast<double>(n);
        acc += x[t] * std::polar(1.0, ang);
      }
      out[k] = acc;
    }
  }
  return out;
}

}  // namespace

WaveSet WaveSet::random_line(Prng& rng, std::size_t count, std::size_t max_bin, double domain_length) {
  if (count > max_bin) throw std::invalid_argument("WaveSet::random_line: more components than available bins");
  std::vector<std::size_t> pool(max_bin);
  for (std::size_t i = 0; i < max_bin; ++i) pool[i] = i + 1;
  for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + rng.below(max_bin - i)]);
  std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  WaveSet set;
  for (std::size_t i = 0; i < count; ++i) {
    const double amp = rng.uniform(0.5, 1.0) / static_cast<double>(count);
    const double phase = rng.uniform(0.0, kTwoPi);
    set.components.push_back({{kTwoPi * static_cast<double>(pool[i]) / domain_length}, amp, phase});
  }
  return set;
}

WaveSet WaveSet::tone(std::size_t k, double amplitude, double phase, double domain_length) {
  return {{{{kTwoPi * static_cast<double>(k) / domain_length}, amplitude, phase}}};
}

WaveSet WaveSet::concat(const WaveSet& other) const {
  WaveSet out = *this;
  out.components.insert(out.components.end(), other.components.begin(), other.components.end());
  return out;
}

std::vector<std::size_t> WaveSet::bins(double domain_length) const {
  std::vector<std::size_t> out;
  for (const auto& c : components) {
    if (c.omega.size() != 1) throw std::invalid_argument("WaveSet::bins: only defined for 1D components");
    out.push_back(static_cast<std::size_t>(std::llround(std::abs(c.omega[0]) * domain_length / kTwoPi)));
  }
  return out;
}

Tensor synth_wave(const WaveSet& set, const Tensor& coords) {
  const std::size_t q = coords.rows(), dims = coords.cols();
  Tensor out(Shape{q, 1});
  for (const auto& comp : set.components) {
    if (comp.omega.size() != dims) throw DimensionError("synth_wave", Shape{comp.omega.size()}, coords.shape);
  }
  for (std::size_t i = 0; i < q; ++i) {
    double acc = 0.0;
    for (const auto& comp : set.components) {
      double arg = comp.phase;
      for (std::size_t d = 0; d < dims; ++d) arg += comp.omega[d] * coords(i, d);
      acc += comp.amplitude * std::sin(arg);
    }
    out.data[i] = acc;
  }
  return out;
}

std::vector<Complex> dft(std::span<const Complex> x) { return transform(x, false); }

std::vector<Complex> dft(std::span<const double> x) {
  std::vector<Complex> c(x.begin(), x.end());
  return transform(c, false);
}

std::vector<Complex> idft(std::span<const Complex> X) {
  auto out = transform(X, true);
  const double inv = X.empty() ? 0.0 : 1.0 / static_cast<double>(X.size());
  for (auto& v : out) v *= inv;
  return out;
}

std::vector<double> bin_energy(std::span<const Complex> X) {
  const std::size_t n = X.size();
  std::vector<double> e(n / 2 + 1, 0.0);
  if (n == 0) return e;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t folded = std::min(k, n - k);
    e[folded] += std::norm(X[k]) / static_cast<double>(n);
  }
  return e;
}

SpectrumReport spectrum_report(std::span<const double> samples, std::span<const std::size_t> target_bins) {
  SpectrumReport r;
  r.samples = samples.size();
  const auto X = dft(samples);
  r.energy = bin_energy(X);
  r.max_target_bin = target_bins.empty() ? 0 : *std::max_element(target_bins.begin(), target_bins.end());
  for (std::size_t k = 0; k < r.energy.size(); ++k) {
    r.total += r.energy[k];
    if (k > r.max_target_bin) r.out_of_band += r.energy[k];
  }
  std::vector<std::size_t> uniq(target_bins.begin(), target_bins.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  for (std::size_t k : uniq)
    if (k < r.energy.size()) r.in_band += r.energy[k];
  r.ratio = r.total > 0.0 ? r.out_of_band / r.total : 0.0;
  return r;
}

SpectrumReport aliased_energy(repr::CoordinateModel& model, std::size_t trained_n, std::size_t upsample,
                              const WaveSet& target, double lo, double hi) {
  if (upsample < 2) throw std::invalid_argument("aliased_energy: upsample factor must be >= 2");
  const auto grid = sampling::GridSpec::line(trained_n * upsample, lo, hi);
  const Tensor values = model.evaluate(sampling::make_grid(grid));
  if (values.cols() != 1) throw DimensionError("aliased_energy expects a scalar-output model, got " + to_string(values.shape));
  const auto bins = target.bins(hi - lo);
  return spectrum_report(values.data, bins);
}

ContinuityReport continuity_metric(const Tensor& values, const sampling::GridSpec& grid) {
  if (values.rows() != grid.count()) throw DimensionError("continuity_metric", values.shape, Shape{grid.count()});
  const std::size_t dims = grid.dims(), s = values.cols();
  std::vector<std::size_t> stride(dims, 1);
  for (std::size_t d = dims; d-- > 1;) stride[d - 1] = stride[d] * grid.axes[d].extent;

  ContinuityReport r;
  std::vector<std::size_t> idx(dims, 0);
  for (std::size_t row = 0; row < grid.count(); ++row) {
    for (std::size_t d = 0; d < dims; ++d) {
      if (idx[d] + 1 >= grid.axes[d].extent) continue;
      const std::size_t next = row + stride[d];
      for (std::size_t c = 0; c < s; ++c) {
        const double jump = std::abs(values.data[next * s + c] - values.data[row * s + c]);
        r.max_jump = std::max(r.max_jump, jump);
        r.total_variation += jump;
      }
    }
    for (std::size_t d = dims; d-- > 0;) {
      if (++idx[d] < grid.axes[d].extent) break;
      idx[d] = 0;
    }
  }
  return r;
}

ContinuityReport continuity_metric(repr::CoordinateModel& model, const sampling::GridSpec& grid,
                                   std::size_t upsample) {
  const auto dense = grid.dense(upsample);
  return continuity_metric(model.evaluate(sampling::make_grid(dense)), dense);
}

GradcheckReport gradcheck(const std::string& name, const LossFn& loss, const ParamList& params,
                          const GradcheckOptions& options) {
  GradcheckReport report;
  report.name = name;
  for (const auto& p : params) p.tensor->clear_grad();

  std::uint64_t base_signature;
  {
    Tape tape;
    Var l = loss(tape);
    base_signature = tape.branch_signature();
    tape.backward(l);
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) {
    analytic.push_back(p.tensor->grad ? *p.tensor->grad : std::vector<double>(p.tensor->size(), 0.0));
    p.tensor->clear_grad();
  }

  auto evaluate = [&](std::uint64_t& signature) {
    Tape tape;
    const double v = loss(tape).value().item();
    signature = tape.branch_signature();
    return v;
  };

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& t = *params[pi].tensor;
    const std::size_t n = t.size();
    const std::size_t stride =
        options.max_per_param && n > options.max_per_param ? (n + options.max_per_param - 1) / options.max_per_param : 1;
    for (std::size_t i = 0; i < n; i += stride) {
      const double orig = t.data[i];
      std::uint64_t sig_plus, sig_minus;
      t.data[i] = orig + options.step;
      const double f_plus = evaluate(sig_plus);
      t.data[i] = orig - options.step;
      const double f_minus = evaluate(sig_minus);
      t.data[i] = orig;
      if (sig_plus != base_signature || sig_minus != base_signature) {
        ++report.excluded;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * options.step);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (!(rel < options.tolerance)) {
        std::ostringstream os;
        os << params[pi].name << "[" << i << "]: analytic " << a << " numeric " << numeric << " rel.err " << rel;
        report.failures.push_back(os.str());
      }
    }
  }
  return report;
}

}  // namespace anr::spectral
