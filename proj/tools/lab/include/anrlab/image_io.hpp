#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "anr/tensor.hpp"

namespace anrlab {

/// Row-major image with interleaved channels, values in [0, 1].
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 1 or 3
  std::vector<double> values;

  ImageBuffer() = default;
  ImageBuffer(std::size_t w, std::size_t h, std::size_t c);

  double& at(std::size_t y, std::size_t x, std::size_t c) { return values[(y * width + x) * channels + c]; }
  [[nodiscard]] double at(std::size_t y, std::size_t x, std::size_t c) const {
    return values[(y * width + x) * channels + c];
  }

  /// [h x w x c] tensor sharing the same layout.
  [[nodiscard]] anr::Tensor to_tensor() const;
  /// Clamps to [0, 1]. Accepts [h x w x c] or [(h w) x c] with explicit extents.
  static ImageBuffer from_tensor(const anr::Tensor& t);
  static ImageBuffer from_rows(const anr::Tensor& rows, std::size_t height, std::size_t width);
};

class ImageParseError : public std::runtime_error {
 public:
  ImageParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at byte " + std::to_string(offset)), offset(offset) {}
  std::size_t offset;
};

/// Binary PGM (P5) or PPM (P6) with maxval 255 or 65535.
ImageBuffer decode_pnm(const std::vector<unsigned char>& bytes);
ImageBuffer load_image(const std::filesystem::path& path);

/// P5 for one channel, P6 for three. maxval 255 or 65535.
std::vector<unsigned char> encode_pnm(const ImageBuffer& image, unsigned maxval = 255);
void save_image(const std::filesystem::path& path, const ImageBuffer& image, unsigned maxval = 255);

}  // namespace anrlab
