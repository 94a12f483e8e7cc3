#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mqaf/errors.hpp"

namespace mqaf {

// 8-bit RGB raster, row-major, channels interleaved. save/load round-trips
// byte for byte.
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  static constexpr std::size_t channels = 3;
  std::vector<std::uint8_t> pixels;  // width*height*3

  std::size_t pixel_count() const { return width * height; }
  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
    return pixels[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
  bool operator==(const ImageBuffer&) const = default;
};

ImageBuffer make_image(std::size_t width, std::size_t height,
                       std::uint8_t fill = 0);

// Binary PPM (P6), 8-bit, maxval 255. Parse errors carry the byte offset.
ImageBuffer load_image(const std::string& path);
void save_image(const ImageBuffer& img, const std::string& path);

ImageBuffer decode_ppm(const std::vector<std::uint8_t>& bytes,
                       const std::string& origin);
std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img);

// Crop helpers used by the feature pipeline (center crop for scoring,
// random offsets supplied by the trainer).
ImageBuffer crop(const ImageBuffer& img, std::size_t x0, std::size_t y0,
                 std::size_t w, std::size_t h);
ImageBuffer center_crop(const ImageBuffer& img, std::size_t w, std::size_t h);

// Peak signal-to-noise ratio in dB over all channels; identical images give
// +infinity.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace mqaf
