#pragma once

#include <cstddef>
#include <filesystem>
#include <span>

#include "geometry.hpp"

namespace harmonica {

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  Vector pixels;  // row-major, values in [0, 255]
};

/// Reads a P2 (ASCII) or P5 (binary) PGM with maxval <= 255. Pixel values are
/// rescaled to 0..255 when maxval < 255.
GrayImage read_pgm(const std::filesystem::path& path);

/// Writes a binary P5 PGM; values are rounded and clamped to 0..255.
void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const double> pixels);

/// Bilinear rescale (corner-aligned sample grid), then round to integers.
Vector rescale_bilinear(const GrayImage& image, std::size_t target_w, std::size_t target_h);

/// read_pgm + rescale_bilinear: a row-major vector of target_w * target_h
/// integer-valued pixels.
Vector load_grayscale_image(const std::filesystem::path& path, std::size_t target_w,
                            std::size_t target_h);

}  // namespace harmonica
