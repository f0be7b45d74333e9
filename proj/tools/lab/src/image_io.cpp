#include "anrlab/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace anrlab {

ImageBuffer::ImageBuffer(std::size_t w, std::size_t h, std::size_t c)
    : width(w), height(h), channels(c), values(w * h * c, 0.0) {}

anr::Tensor ImageBuffer::to_tensor() const { return anr::Tensor(anr::Shape{height, width, channels}, values); }

ImageBuffer ImageBuffer::from_tensor(const anr::Tensor& t) {
  if (t.rank() != 3) throw anr::DimensionError("ImageBuffer expects [h x w x c], got " + anr::to_string(t.shape));
  ImageBuffer img(t.shape[1], t.shape[0], t.shape[2]);
  for (std::size_t i = 0; i < t.size(); ++i) img.values[i] = std::clamp(t.data[i], 0.0, 1.0);
  return img;
}

ImageBuffer ImageBuffer::from_rows(const anr::Tensor& rows, std::size_t height, std::size_t width) {
  if (rows.rank() != 2 || rows.rows() != height * width) {
    throw anr::DimensionError("ImageBuffer::from_rows", rows.shape, anr::Shape{height * width, rows.cols()});
  }
  return from_tensor(anr::Tensor(anr::Shape{height, width, rows.cols()}, rows.data));
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<unsigned char>& b) : bytes_(b) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  unsigned long number(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    unsigned long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000'000ul) throw ImageParseError(std::string("header field ") + field + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ImageParseError(std::string("expected ") + field + " in header", start);
    return v;
  }

  std::size_t pos_ = 0;

 private:
  const std::vector<unsigned char>& bytes_;
};

}  // namespace

ImageBuffer decode_pnm(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw ImageParseError("not a binary PGM/PPM (expected P5 or P6 magic)", 0);
  }
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader r(bytes);
  r.pos_ = 2;
  const auto width = r.number("width");
  const auto height = r.number("height");
  const std::size_t maxval_at = r.pos_;
  const auto maxval = r.number("maxval");
  if (width == 0 || height == 0) throw ImageParseError("zero image extent", maxval_at);
  if (maxval != 255 && maxval != 65535) {
    throw ImageParseError("unsupported maxval " + std::to_string(maxval) + " (expected 255 or 65535)", maxval_at);
  }
  if (r.pos_ >= bytes.size() || !std::isspace(bytes[r.pos_])) {
    throw ImageParseError("missing whitespace after maxval", r.pos_);
  }
  const std::size_t data_start = r.pos_ + 1;
  const std::size_t bps = maxval == 255 ? 1 : 2;
  const std::size_t need = width * height * channels * bps;
  if (bytes.size() - data_start < need) {
    throw ImageParseError("truncated payload: need " + std::to_string(need) + " bytes, have " +
                              std::to_string(bytes.size() - data_start),
                          bytes.size());
  }
  ImageBuffer img(width, height, channels);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    const std::size_t at = data_start + i * bps;
    const unsigned v = bps == 1 ? bytes[at] : (static_cast<unsigned>(bytes[at]) << 8) | bytes[at + 1];
    img.values[i] = std::clamp(static_cast<double>(v) * scale, 0.0, 1.0);
  }
  return img;
}

ImageBuffer load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pnm(bytes);
}

std::vector<unsigned char> encode_pnm(const ImageBuffer& image, unsigned maxval) {
  if (image.channels != 1 && image.channels != 3) {
    throw std::invalid_argument("encode_pnm: channels must be 1 or 3, got " + std::to_string(image.channels));
  }
  if (maxval != 255 && maxval != 65535) throw std::invalid_argument("encode_pnm: maxval must be 255 or 65535");
  const std::string header = std::string(image.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(image.width) +
                             " " + std::to_string(image.height) + "\n" + std::to_string(maxval) + "\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  for (double v : image.values) {
    const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
    if (maxval == 65535) out.push_back(static_cast<unsigned char>(q >> 8));
    out.push_back(static_cast<unsigned char>(q & 0xff));
  }
  return out;
}

void save_image(const std::filesystem::path& path, const ImageBuffer& image, unsigned maxval) {
  const auto bytes = encode_pnm(image, maxval);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace anrlab
