#include "mqaf/image.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace mqaf {

ImageBuffer make_image(std::size_t width, std::size_t height,
                       std::uint8_t fill) {
  ImageBuffer img;
  img.width = width;
  img.height = height;
  img.pixels.assign(width * height * ImageBuffer::channels, fill);
  return img;
}

namespace {

// Incremental P6 header scanner tracking the byte offset for error
// reporting. Whitespace-separated tokens, '#' comments to end of line.
struct PpmScanner {
  const std::vector<std::uint8_t>& bytes;
  const std::string& origin;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(origin + ": " + what + " at byte offset " +
                     std::to_string(pos));
  }

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      const char c = static_cast<char>(bytes[pos]);
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* field) {
    skip_space_and_comments();
    if (pos >= bytes.size()) fail(std::string("missing ") + field);
    if (!std::isdigit(bytes[pos]))
      fail(std::string("malformed ") + field + " (expected digits)");
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1000000000) fail(std::string(field) + " out of range");
      ++pos;
    }
    return v;
  }
};

}  // namespace

ImageBuffer decode_ppm(const std::vector<std::uint8_t>& bytes,
                       const std::string& origin) {
  PpmScanner sc{bytes, origin};
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    sc.fail("not a binary PPM (expected magic 'P6')");
  sc.pos = 2;
  const std::size_t width = sc.read_uint("width");
  const std::size_t height = sc.read_uint("height");
  const std::size_t maxval = sc.read_uint("maxval");
  if (maxval != 255)
    sc.fail("unsupported maxval " + std::to_string(maxval) +
            " (only 255 is supported)");
  // Exactly one whitespace byte separates the header from the payload.
  if (sc.pos >= bytes.size() || !std::isspace(bytes[sc.pos]))
    sc.fail("missing whitespace after maxval");
  ++sc.pos;
  if (width == 0 || height == 0) sc.fail("zero image dimension");

  const std::size_t expected = width * height * ImageBuffer::channels;
  const std::size_t available = bytes.size() - sc.pos;
  if (available < expected) {
    sc.pos = bytes.size();
    throw ParseError(origin + ": truncated pixel payload, expected " +
                     std::to_string(expected) + " bytes but found " +
                     std::to_string(available) + " at byte offset " +
                     std::to_string(bytes.size()));
  }
  if (available > expected)
    throw ParseError(origin + ": " + std::to_string(available - expected) +
                     " trailing bytes after pixel payload");

  ImageBuffer img;
  img.width = width;
  img.height = height;
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(sc.pos),
                    bytes.end());
  return img;
}

std::vector<std::uint8_t> encode_ppm(const ImageBuffer& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " +
                             std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out;
  out.reserve(header.size() + img.pixels.size());
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

ImageBuffer load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_ppm(bytes, path);
}

void save_image(const ImageBuffer& img, const std::string& path) {
  if (img.pixels.size() != img.width * img.height * ImageBuffer::channels)
    throw Error("save_image: pixel buffer size does not match dimensions");
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open image file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to image file: " + path);
}

ImageBuffer crop(const ImageBuffer& img, std::size_t x0, std::size_t y0,
                 std::size_t w, std::size_t h) {
  if (x0 + w > img.width || y0 + h > img.height)
    throw Error("crop: region " + std::to_string(w) + "x" + std::to_string(h) +
                "+" + std::to_string(x0) + "+" + std::to_string(y0) +
                " exceeds image " + std::to_string(img.width) + "x" +
                std::to_string(img.height));
  ImageBuffer out = make_image(w, h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < ImageBuffer::channels; ++c)
        out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
  return out;
}

ImageBuffer center_crop(const ImageBuffer& img, std::size_t w, std::size_t h) {
  return crop(img, (img.width - w) / 2, (img.height - h) / 2, w, h);
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  if (a.width != b.width || a.height != b.height)
    throw Error("psnr: image sizes differ");
  double se = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = se / static_cast<double>(a.pixels.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace mqaf
