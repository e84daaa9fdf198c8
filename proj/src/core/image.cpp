#include "image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "error.hpp"

namespace harmonica {
namespace {

class PgmReader {
 public:
  PgmReader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

  std::size_t header_int(const char* what) {
    skip_space_and_comments();
    std::size_t start = pos_;
    while (pos_ < data_.size() && std::isdigit(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (start == pos_) fail(ErrorCode::Parse, name_ + ": expected " + what + " in PGM header");
    return std::stoul(data_.substr(start, pos_ - start));
  }

  std::string magic() {
    if (data_.size() < 2) fail(ErrorCode::Parse, name_ + ": file too short for a PGM header");
    pos_ = 2;
    return data_.substr(0, 2);
  }

  // Exactly one whitespace byte separates maxval from the raster in P5.
  void skip_single_space() {
    if (pos_ >= data_.size() || !std::isspace(static_cast<unsigned char>(data_[pos_])))
      fail(ErrorCode::Parse, name_ + ": malformed PGM header");
    ++pos_;
  }

  std::span<const char> rest() const { return {data_.data() + pos_, data_.size() - pos_}; }

 private:
  void skip_space_and_comments() {
    while (pos_ < data_.size()) {
      if (std::isspace(static_cast<unsigned char>(data_[pos_]))) {
        ++pos_;
      } else if (data_[pos_] == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open image " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  PgmReader reader(std::move(data), path.string());

  const std::string magic = reader.magic();
  if (magic != "P2" && magic != "P5")
    fail(ErrorCode::Parse, path.string() + ": unsupported image format (only P2/P5 PGM)");
  GrayImage img;
  img.width = reader.header_int("width");
  img.height = reader.header_int("height");
  const std::size_t maxval = reader.header_int("maxval");
  if (img.width == 0 || img.height == 0) fail(ErrorCode::Parse, path.string() + ": zero image dimension");
  if (maxval == 0 || maxval > 255)
    fail(ErrorCode::Parse, path.string() + ": maxval " + std::to_string(maxval) + " unsupported (1..255)");

  const std::size_t count = img.width * img.height;
  img.pixels.reserve(count);
  const double scale = 255.0 / static_cast<double>(maxval);
  auto push = [&](std::size_t v) {
    if (v > maxval) fail(ErrorCode::Parse, path.string() + ": pixel value exceeds maxval");
    img.pixels.push_back(maxval == 255 ? static_cast<double>(v) : std::round(static_cast<double>(v) * scale));
  };
  if (magic == "P5") {
    reader.skip_single_space();
    auto raster = reader.rest();
    if (raster.size() < count) fail(ErrorCode::Parse, path.string() + ": truncated raster");
    for (std::size_t i = 0; i < count; ++i) push(static_cast<unsigned char>(raster[i]));
  } else {
    for (std::size_t i = 0; i < count; ++i) push(reader.header_int("pixel value"));
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const double> pixels) {
  if (width == 0 || height == 0) fail(ErrorCode::InvalidArgument, "zero image dimension");
  if (pixels.size() != width * height)
    fail(ErrorCode::InvalidDimension, "pixel count does not match image size");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write image " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  std::string raster(pixels.size(), '\0');
  for (std::size_t i = 0; i < pixels.size(); ++i)
    raster[i] = static_cast<char>(static_cast<unsigned char>(std::clamp(std::round(pixels[i]), 0.0, 255.0)));
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) fail(ErrorCode::Io, "failed writing image " + path.string());
}

Vector rescale_bilinear(const GrayImage& image, std::size_t target_w, std::size_t target_h) {
  if (target_w == 0 || target_h == 0) fail(ErrorCode::InvalidArgument, "zero target image dimension");
  const std::size_t w = image.width;
  const std::size_t h = image.height;
  // Output pixel i samples source coordinate i * (w - 1) / (tw - 1); a single
  // output column samples the source centre.
  auto source = [](std::size_t i, std::size_t target, std::size_t src) {
    if (target == 1) return 0.5 * static_cast<double>(src - 1);
    return static_cast<double>(i) * static_cast<double>(src - 1) / static_cast<double>(target - 1);
  };
  Vector out;
  out.reserve(target_w * target_h);
  for (std::size_t ty = 0; ty < target_h; ++ty) {
    const double sy = source(ty, target_h, h);
    const auto y0 = std::min(static_cast<std::size_t>(std::floor(sy)), h - 1);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t tx = 0; tx < target_w; ++tx) {
      const double sx = source(tx, target_w, w);
      const auto x0 = std::min(static_cast<std::size_t>(std::floor(sx)), w - 1);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - static_cast<double>(x0);
      const auto px = [&](std::size_t x, std::size_t y) { return image.pixels[y * w + x]; };
      const double top = px(x0, y0) * (1.0 - fx) + px(x1, y0) * fx;
      const double bottom = px(x0, y1) * (1.0 - fx) + px(x1, y1) * fx;
      out.push_back(std::clamp(std::round(top * (1.0 - fy) + bottom * fy), 0.0, 255.0));
    }
  }
  return out;
}

Vector load_grayscale_image(const std::filesystem::path& path, std::size_t target_w,
                            std::size_t target_h) {
  return rescale_bilinear(read_pgm(path), target_w, target_h);
}

}  // namespace harmonica
