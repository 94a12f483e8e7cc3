#include "mqaf/scoring.hpp"

#include <algorithm>

#include "mqaf/ops.hpp"

namespace mqaf {

CropScore score_crops(const ModelState& model, const ImageBuffer& dist_crop,
                      const ImageBuffer* ref_crop, ScoreMode mode) {
  const bool memory_on = model.config.memory.enabled;
  CropScore out;

  if (mode == ScoreMode::kNoReference) {
    if (!memory_on)
      throw Error(
          "score: memory branch disabled, no no-reference score is defined");
    const Features f_dist =
        extract(dist_crop, model.extractor, model.config.extractor);
    out.s_dist = memory_match(f_dist.map, model.bank);
    out.q = quality_score(std::nullopt, out.s_dist, std::nullopt,
                          ScoreMode::kNoReference);
    return out;
  }

  if (ref_crop == nullptr)
    throw Error("score: full-reference mode requires a reference image");
  const Features f_ref =
      extract(*ref_crop, model.extractor, model.config.extractor);
  const Features f_dist =
      extract(dist_crop, model.extractor, model.config.extractor);
  const ReferenceMatch rm = reference_match(f_ref.vector, f_dist.vector);
  out.s_ref = rm.s_ref;
  out.s_cos = rm.s_cos;
  out.s_norm = rm.s_norm;
  out.degenerate = rm.degenerate;

  if (!memory_on) {
    out.q = *out.s_ref;  // reference branch only
    return out;
  }
  out.s_dist = memory_match(f_dist.map, model.bank);
  out.alpha = adaptive_weight(f_ref.vector, f_dist.vector, model.awn);
  out.q = quality_score(out.s_ref, out.s_dist, out.alpha,
                        ScoreMode::kFullReference,
                        model.config.fusion.detach_alpha_in_q);
  return out;
}

QualityResult to_quality_result(const CropScore& score, ScoreMode mode,
                                bool memory_enabled) {
  QualityResult r;
  r.mode = mode;
  r.q_raw = score.q.item();
  r.degenerate = score.degenerate;
  if (mode == ScoreMode::kNoReference) {
    r.s_dist = score.s_dist.item();
    r.q = r.q_raw;  // q equals s_dist exactly in NR mode
    return r;
  }
  r.s_ref = score.s_ref->item();
  if (memory_enabled) {
    r.s_dist = score.s_dist.item();
    r.alpha = score.alpha->item();
  }
  r.q = std::clamp(r.q_raw, 0.0, 1.0);
  return r;
}

QualityResult score_image(const ModelState& model, const ImageBuffer& dist,
                          const ImageBuffer* ref) {
  const std::size_t s = model.config.extractor.input_size;
  if (dist.width < s || dist.height < s)
    throw Error("score: image " + std::to_string(dist.width) + "x" +
                std::to_string(dist.height) + " smaller than extractor input " +
                std::to_string(s));
  const ImageBuffer dist_crop = center_crop(dist, s, s);
  const ScoreMode mode =
      ref ? ScoreMode::kFullReference : ScoreMode::kNoReference;
  if (!ref) {
    const CropScore cs = score_crops(model, dist_crop, nullptr, mode);
    return to_quality_result(cs, mode, model.config.memory.enabled);
  }
  if (ref->width != dist.width || ref->height != dist.height)
    throw Error("score: reference and distorted image sizes differ");
  const ImageBuffer ref_crop = center_crop(*ref, s, s);
  const CropScore cs = score_crops(model, dist_crop, &ref_crop, mode);
  return to_quality_result(cs, mode, model.config.memory.enabled);
}

}  // namespace mqaf
