#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mqaf/matching.hpp"
#include "mqaf/tensor.hpp"

namespace mqaf {

enum class ScoreMode { kFullReference, kNoReference };

// Two affine layers with ReLU between and a sigmoid output, producing the
// fusion weight alpha in (0,1) from the concatenated (detached) distorted
// and reference feature vectors.
struct AwnParams {
  Tensor w1;  // [hidden, 2D]
  Tensor b1;  // [hidden]
  Tensor w2;  // [1, hidden]
  Tensor b2;  // [1]

  std::size_t input_dim() const { return w1.shape()[1]; }
  std::size_t hidden_dim() const { return w1.shape()[0]; }
  std::vector<Tensor> parameters() const { return {w1, b1, w2, b2}; }
};

// First layer gets a scaled-uniform init; the output layer starts at zero
// so alpha begins exactly at 0.5.
AwnParams init_awn(std::size_t feature_dim, std::size_t hidden,
                   std::uint64_t seed);

// alpha = sigmoid(W2 relu(W1 concat(f_dist, f_ref) + b1) + b2). Inputs are
// detached internally: gradients reach only the AWN parameters.
Tensor adaptive_weight(const Tensor& f_ref, const Tensor& f_dist,
                       const AwnParams& awn);

// Error-based supervision target for alpha; a plain constant (no gradient
// flows into the scores). With `inverted`, the numerator uses the
// reference-score error instead.
double alpha_target(double s_ref, double s_dist, double q_true,
                    bool inverted = false);

struct QualityResult {
  double q = 0.0;  // clamped to [0,1]
  double q_raw = 0.0;
  ScoreMode mode = ScoreMode::kNoReference;
  double s_dist = 0.0;
  std::optional<double> s_ref;  // FR only
  std::optional<double> alpha;  // FR only
  bool degenerate = false;
};

// Differentiable fused score: FR blends s_ref and s_dist by alpha, NR is
// s_dist unchanged. Throws if FR inputs are missing.
Tensor quality_score(const std::optional<Tensor>& s_ref, const Tensor& s_dist,
                     const std::optional<Tensor>& alpha, ScoreMode mode,
                     bool detach_alpha = false);

struct LossBreakdown {
  Tensor total;
  double l_pre = 0.0;
  double l_memory = 0.0;
  double l_alpha = 0.0;
  double l_total = 0.0;
  double lambda = 0.0;
};

// One scored training sample: the fused prediction plus, for FR samples,
// the alpha produced by the AWN and its precomputed target.
struct SamplePrediction {
  Tensor q;
  double q_true = 0.0;
  std::optional<Tensor> alpha;
  std::optional<double> alpha_target;
};

// l_pre + lambda * l_memory + l_alpha over a batch. l_pre is the MSE of the
// fused predictions; l_alpha averages (alpha - alpha_target)^2 over FR
// samples (0 for an NR batch); l_memory is the decorrelation penalty.
LossBreakdown total_loss(const std::vector<SamplePrediction>& batch,
                         const MemoryBank& bank, double lambda,
                         double decorrelation_eps = 1e-8,
                         CovarianceAxis axis = CovarianceAxis::kUnits,
                         bool memory_enabled = true);

}  // namespace mqaf
