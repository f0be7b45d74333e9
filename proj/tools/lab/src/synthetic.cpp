#include "anrlab/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "anr/prng.hpp"

namespace anrlab {

ImageBuffer synthetic_image(std::size_t height, std::size_t width, std::uint64_t seed, std::size_t channels) {
  anr::Prng r(seed);
  ImageBuffer img(width, height, channels);
  std::vector<double> base(channels), gy(channels), gx(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    base[c] = r.uniform(0.2, 0.6);
    gy[c] = r.uniform(-0.3, 0.3);
    gx[c] = r.uniform(-0.3, 0.3);
  }
  struct Disc {
    double cy, cx, radius;
    std::vector<double> color;
  };
  std::vector<Disc> discs;
  for (int i = 0; i < 5; ++i) {
    Disc d{r.uniform(0.0, 1.0), r.uniform(0.0, 1.0), r.uniform(0.08, 0.3), {}};
    for (std::size_t c = 0; c < channels; ++c) d.color.push_back(r.uniform(0.0, 1.0));
    discs.push_back(std::move(d));
  }
  const double freq = r.uniform(4.0, 8.0);
  const double angle = r.uniform(0.0, std::numbers::pi);

  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double cy = (static_cast<double>(y) + 0.5) / static_cast<double>(height);
      const double cx = (static_cast<double>(x) + 0.5) / static_cast<double>(width);
      for (std::size_t c = 0; c < channels; ++c) {
        double v = base[c] + gy[c] * (cy - 0.5) + gx[c] * (cx - 0.5);
        for (const auto& d : discs)
          if ((cy - d.cy) * (cy - d.cy) + (cx - d.cx) * (cx - d.cx) < d.radius * d.radius) v = d.color[c];
        if (cx > 0.6 && cy < 0.4)
          v = 0.5 + 0.4 * std::sin(2.0 * std::numbers::pi * freq * (std::cos(angle) * cx + std::sin(angle) * cy));
        img.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

std::vector<ImageBuffer> synthetic_dataset(std::size_t count, std::size_t size, std::uint64_t seed) {
  anr::Prng root(seed);
  std::vector<ImageBuffer> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synthetic_image(size, size, root.split(i).next_u64()));
  return out;
}

}  // namespace anrlab
