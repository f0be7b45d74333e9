#include "anr/sampling.hpp"

#include <algorithm>
#include <stdexcept>

namespace anr::sampling {

GridSpec GridSpec::line(std::size_t n, double lo, double hi) { return {{{n, lo, hi}}, Placement::left}; }

GridSpec GridSpec::image(std::size_t h, std::size_t w) {
  return {{{h, 0.0, 1.0}, {w, 0.0, 1.0}}, Placement::center};
}

std::size_t GridSpec::count() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.extent;
  return n;
}

GridSpec GridSpec::dense(std::size_t factor) const {
  GridSpec out = *this;
  for (auto& a : out.axes) a.extent *= factor;
  return out;
}

Tensor make_grid(const GridSpec& spec) {
  if (spec.axes.empty()) throw std::invalid_argument("make_grid: no axes");
  for (const auto& a : spec.axes) {
    if (a.extent == 0) throw std::invalid_argument("make_grid: zero extent");
    if (!(a.hi > a.lo)) throw std::invalid_argument("make_grid: empty domain");
  }
  const std::size_t dims = spec.axes.size();
  const std::size_t count = spec.count();
  const double offset = spec.placement == Placement::center ? 0.5 : 0.0;
  Tensor out(Shape{count, dims});
  std::vector<std::size_t> idx(dims, 0);
  for (std::size_t row = 0; row < count; ++row) {
    for (std::size_t d = 0; d < dims; ++d) {
      const auto& a = spec.axes[d];
      out.data[row * dims + d] = a.lo + (static_cast<double>(idx[d]) + offset) * a.spacing();
    }
    for (std::size_t d = dims; d-- > 0;) {
      if (++idx[d] < spec.axes[d].extent) break;
      idx[d] = 0;
    }
  }
  return out;
}

SamplerConstants default_constants(std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw std::invalid_argument("default_constants: extents must be positive");
  const double mx = static_cast<double>(std::max(h, w));
  return {3.0 / (20.0 * mx), 1.0 / (2.0 * mx), 1.0};
}

std::string to_string(SamplerMode mode) { return mode == SamplerMode::fixed ? "fixed" : "variational"; }

std::string to_string(ClampTarget target) {
  switch (target) {
    case ClampTarget::alpha_v: return "alpha-v";
    case ClampTarget::v: return "v";
    default: return "none";
  }
}

SamplerMode parse_sampler_mode(const std::string& s) {
  if (s == "fixed") return SamplerMode::fixed;
  if (s == "variational") return SamplerMode::variational;
  throw std::invalid_argument("unknown sampler mode '" + s + "' (expected fixed|variational)");
}

ClampTarget parse_clamp_target(const std::string& s) {
  if (s == "alpha-v") return ClampTarget::alpha_v;
  if (s == "v") return ClampTarget::v;
  if (s == "none") return ClampTarget::none;
  throw std::invalid_argument("unknown clamp target '" + s + "' (expected v|alpha-v|none)");
}

VariationalSampler VariationalSampler::for_image(std::size_t h, std::size_t w, ClampTarget clamp) {
  const auto c = default_constants(h, w);
  return {SamplerMode::variational, c.alpha, c.sigma, c.v_dev, clamp};
}

VariationalSampler VariationalSampler::for_line(std::size_t n) {
  return {SamplerMode::variational, line_shift_scale(n), 1.0, 1.0, ClampTarget::none};
}

void VariationalSampler::validate() const {
  if (!(v_dev > 0.0)) throw std::invalid_argument("VariationalSampler: v_dev must be > 0");
  if (!(alpha >= 0.0)) throw std::invalid_argument("VariationalSampler: alpha must be >= 0");
  if (!(sigma >= 0.0)) throw std::invalid_argument("VariationalSampler: sigma must be >= 0");
}

Tensor sample_variational(const VariationalSampler& s, const Tensor& grid, Prng& rng) {
  s.validate();
  Tensor out(grid.shape, grid.data);
  if (s.mode == SamplerMode::fixed) return out;
  for (double& c : out.data) {
    double v = s.sigma * rng.normal();
    if (s.clamp == ClampTarget::v) v = std::clamp(v, -s.v_dev, s.v_dev);
    double shift = s.alpha * v;
    if (s.clamp == ClampTarget::alpha_v) shift = std::clamp(shift, -s.v_dev, s.v_dev);
    c += shift;
  }
  return out;
}

double line_shift_scale(std::size_t n) {
  if (n == 0) throw std::invalid_argument("line_shift_scale: n must be >= 1");
  return 1.0 / (5.0 * static_cast<double>(n));
}

std::vector<double> sample_1d_shift(std::size_t n, Prng& rng) {
  const double s = line_shift_scale(n);
  std::vector<double> shifts(n);
  for (double& v : shifts) v = s * rng.normal();
  return shifts;
}

}  // namespace anr::sampling
