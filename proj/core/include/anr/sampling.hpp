#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "anr/prng.hpp"
#include "anr/tensor.hpp"

namespace anr::sampling {

struct AxisSpec {
  std::size_t extent = 1;
  double lo = 0.0;
  double hi = 1.0;

  [[nodiscard]] double spacing() const { return (hi - lo) / static_cast<double>(extent); }
};

enum class Placement {
  left,    // x_i = lo + i * spacing
  center,  // x_i = lo + (i + 1/2) * spacing  (pixel centers)
};

struct GridSpec {
  std::vector<AxisSpec> axes;
  Placement placement = Placement::center;

  /// n samples on [lo, hi) at spacing (hi - lo) / n, starting at lo.
  static GridSpec line(std::size_t n, double lo = -1.0, double hi = 1.0);
  /// Pixel centers of an h x w image on [0, 1]^2.
  static GridSpec image(std::size_t h, std::size_t w);

  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] std::size_t dims() const { return axes.size(); }
  /// Same domain with every extent multiplied by `factor`.
  [[nodiscard]] GridSpec dense(std::size_t factor) const;
};

/// Coordinates as [count x dims], row-major over the axes (first axis slowest).
Tensor make_grid(const GridSpec& spec);

struct SamplerConstants {
  double alpha;
  double v_dev;
  double sigma;
};

/// v_dev = 1 / (2 max(h, w)), alpha = 3 / (20 max(h, w)), sigma = 1.
SamplerConstants default_constants(std::size_t h, std::size_t w);

enum class SamplerMode { fixed, variational };

/// What the +-v_dev clamp applies to.
enum class ClampTarget {
  alpha_v,  // total shift alpha * V
  v,        // the raw Gaussian draw V, before scaling
  none,
};

std::string to_string(SamplerMode mode);
std::string to_string(ClampTarget target);
SamplerMode parse_sampler_mode(const std::string& s);
ClampTarget parse_clamp_target(const std::string& s);

struct VariationalSampler {
  SamplerMode mode = SamplerMode::fixed;
  double alpha = 0.0;
  double sigma = 1.0;
  double v_dev = 1.0;
  ClampTarget clamp = ClampTarget::alpha_v;

  static VariationalSampler fixed() { return {}; }
  static VariationalSampler for_image(std::size_t h, std::size_t w, ClampTarget clamp = ClampTarget::alpha_v);
  /// Unclamped Gaussian shifts of scale 1 / (5n) for an n-point line.
  static VariationalSampler for_line(std::size_t n);

  void validate() const;
};

/// c_var = c + shift per coordinate component; fixed mode returns the grid unchanged.
Tensor sample_variational(const VariationalSampler& sampler, const Tensor& grid, Prng& rng);

/// s = 1 / (5n).
double line_shift_scale(std::size_t n);
/// n shifts s * N(0, 1), unclamped.
std::vector<double> sample_1d_shift(std::size_t n, Prng& rng);

}  // namespace anr::sampling
