#include "mqaf/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "mqaf/rng.hpp"

namespace mqaf {

std::string distortion_name(DistortionType t) {
  switch (t) {
    case DistortionType::kGaussianNoise: return "gaussian-noise";
    case DistortionType::kGaussianBlur: return "gaussian-blur";
    case DistortionType::kBlockAveraging: return "block-averaging";
    case DistortionType::kContrastScaling: return "contrast-scaling";
    case DistortionType::kSaltPepper: return "salt-pepper";
  }
  throw Error("distortion_name: unreachable");
}

DistortionType distortion_from_name(const std::string& name) {
  for (DistortionType t : kAllDistortions)
    if (distortion_name(t) == name) return t;
  throw ConfigError("unknown distortion type: " + name);
}

namespace {

std::uint8_t clamp_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

void check_severity(int severity) {
  if (severity < 1 || severity > 5)
    throw ConfigError("distortion severity must be in 1..5, got " +
                      std::to_string(severity));
}

ImageBuffer gaussian_noise(const ImageBuffer& img, int severity,
                           std::uint64_t seed) {
  static constexpr double kSigma[5] = {5.0, 10.0, 20.0, 35.0, 50.0};
  const double sigma = kSigma[severity - 1];
  Rng rng(seed);
  ImageBuffer out = img;
  for (auto& p : out.pixels)
    p = clamp_u8(static_cast<double>(p) + sigma * rng.normal());
  return out;
}

ImageBuffer gaussian_blur(const ImageBuffer& img, int severity) {
  static constexpr double kStd[5] = {0.5, 1.0, 2.0, 3.0, 5.0};
  const double sd = kStd[severity - 1];
  const long radius = static_cast<long>(std::ceil(3.0 * sd));
  std::vector<double> kernel(2 * radius + 1);
  double ksum = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (sd * sd));
    ksum += kernel[i + radius];
  }
  for (auto& k : kernel) k /= ksum;

  const long w = static_cast<long>(img.width);
  const long h = static_cast<long>(img.height);
  // Separable pass with clamp-to-edge borders (a constant image must stay
  // fixed, which zero padding would break).
  auto clampx = [w](long x) { return std::clamp(x, 0L, w - 1); };
  auto clampy = [h](long y) { return std::clamp(y, 0L, h - 1); };
  std::vector<double> tmp(img.pixels.size());
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (std::size_t c = 0; c < ImageBuffer::channels; ++c) {
        double acc = 0.0;
        for (long i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * img.at(clampx(x + i), y, c);
        tmp[(y * w + x) * 3 + c] = acc;
      }
  ImageBuffer out = img;
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (std::size_t c = 0; c < ImageBuffer::channels; ++c) {
        double acc = 0.0;
        for (long i = -radius; i <= radius; ++i)
          acc += kernel[i + radius] * tmp[(clampy(y + i) * w + x) * 3 + c];
        out.at(x, y, c) = clamp_u8(acc);
      }
  return out;
}

ImageBuffer block_averaging(const ImageBuffer& img, int severity) {
  static constexpr std::size_t kBlock[5] = {2, 4, 8, 12, 16};
  const std::size_t b = kBlock[severity - 1];
  ImageBuffer out = img;
  for (std::size_t y0 = 0; y0 < img.height; y0 += b)
    for (std::size_t x0 = 0; x0 < img.width; x0 += b) {
      const std::size_t y1 = std::min(y0 + b, img.height);
      const std::size_t x1 = std::min(x0 + b, img.width);
      for (std::size_t c = 0; c < ImageBuffer::channels; ++c) {
        double acc = 0.0;
        for (std::size_t y = y0; y < y1; ++y)
          for (std::size_t x = x0; x < x1; ++x) acc += img.at(x, y, c);
        const std::uint8_t m =
            clamp_u8(acc / static_cast<double>((y1 - y0) * (x1 - x0)));
        for (std::size_t y = y0; y < y1; ++y)
          for (std::size_t x = x0; x < x1; ++x) out.at(x, y, c) = m;
      }
    }
  return out;
}

ImageBuffer contrast_scaling(const ImageBuffer& img, int severity) {
  static constexpr double kFactor[5] = {0.8, 0.6, 0.45, 0.3, 0.2};
  const double f = kFactor[severity - 1];
  ImageBuffer out = img;
  for (auto& p : out.pixels)
    p = clamp_u8(128.0 + f * (static_cast<double>(p) - 128.0));
  return out;
}

ImageBuffer salt_pepper(const ImageBuffer& img, int severity,
                        std::uint64_t seed) {
  static constexpr double kProb[5] = {0.005, 0.01, 0.02, 0.05, 0.10};
  const double p = kProb[severity - 1];
  Rng rng(seed);
  ImageBuffer out = img;
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    if (rng.uniform() < p) {
      const std::uint8_t v = rng.uniform() < 0.5 ? 0 : 255;
      out.pixels[i * 3 + 0] = v;
      out.pixels[i * 3 + 1] = v;
      out.pixels[i * 3 + 2] = v;
    }
  }
  return out;
}

}  // namespace

ImageBuffer apply_distortion(const ImageBuffer& img, DistortionType type,
                             int severity, std::uint64_t seed) {
  check_severity(severity);
  switch (type) {
    case DistortionType::kGaussianNoise:
      return gaussian_noise(img, severity, seed);
    case DistortionType::kGaussianBlur:
      return gaussian_blur(img, severity);
    case DistortionType::kBlockAveraging:
      return block_averaging(img, severity);
    case DistortionType::kContrastScaling:
      return contrast_scaling(img, severity);
    case DistortionType::kSaltPepper:
      return salt_pepper(img, severity, seed);
  }
  throw Error("apply_distortion: unreachable");
}

}  // namespace mqaf
