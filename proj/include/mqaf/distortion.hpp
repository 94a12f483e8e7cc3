#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "mqaf/image.hpp"

namespace mqaf {

enum class DistortionType {
  kGaussianNoise,
  kGaussianBlur,
  kBlockAveraging,
  kContrastScaling,
  kSaltPepper,
};

inline constexpr std::array<DistortionType, 5> kAllDistortions = {
    DistortionType::kGaussianNoise,   DistortionType::kGaussianBlur,
    DistortionType::kBlockAveraging,  DistortionType::kContrastScaling,
    DistortionType::kSaltPepper,
};

std::string distortion_name(DistortionType t);
DistortionType distortion_from_name(const std::string& name);

// Severity runs 1 (mild) .. 5 (severe); the parameterization per level:
//   gaussian-noise    sigma   {5, 10, 20, 35, 50} / 255
//   gaussian-blur     std px  {0.5, 1, 2, 3, 5}, kernel truncated at 3*std
//   block-averaging   block   {2, 4, 8, 12, 16}
//   contrast-scaling  factor  {0.8, 0.6, 0.45, 0.3, 0.2} about mid-gray 128
//   salt-pepper       p flip  {0.5, 1, 2, 5, 10} %
ImageBuffer apply_distortion(const ImageBuffer& img, DistortionType type,
                             int severity, std::uint64_t seed);

}  // namespace mqaf
