#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "anrlab/image_io.hpp"

namespace anrlab {

/// Deterministic test card: a smooth color ramp, a few flat discs and a
/// striped patch in the upper right quadrant.
ImageBuffer synthetic_image(std::size_t height, std::size_t width, std::uint64_t seed, std::size_t channels = 3);

/// `count` images drawn from consecutive sub-streams of `seed`.
std::vector<ImageBuffer> synthetic_dataset(std::size_t count, std::size_t size, std::uint64_t seed);

}  // namespace anrlab
