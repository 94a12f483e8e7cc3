#pragma once

#include <optional>

#include "mqaf/checkpoint.hpp"
#include "mqaf/fusion.hpp"
#include "mqaf/image.hpp"

namespace mqaf {

// Differentiable outputs for one already-cropped (distorted, reference?)
// pair. FR and NR share the same memory_match path, so a dual-mode run of
// one image yields bitwise-identical s_dist.
struct CropScore {
  Tensor q;
  Tensor s_dist;                 // undefined when the memory branch is off
  std::optional<Tensor> s_ref;
  std::optional<Tensor> s_cos;
  std::optional<Tensor> s_norm;
  std::optional<Tensor> alpha;   // FR with memory only
  bool degenerate = false;
};

CropScore score_crops(const ModelState& model, const ImageBuffer& dist_crop,
                      const ImageBuffer* ref_crop, ScoreMode mode);

// Plain-number view for reports. FR clamps q to [0,1]; NR returns s_dist
// unchanged so the two stay bitwise equal.
QualityResult to_quality_result(const CropScore& score, ScoreMode mode,
                                bool memory_enabled);

// Deterministic center-crop scoring of a full-size image (NR when ref is
// null).
QualityResult score_image(const ModelState& model, const ImageBuffer& dist,
                          const ImageBuffer* ref);

}  // namespace mqaf
