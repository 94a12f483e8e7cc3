#pragma once

#include <cstdint>
#include <vector>

#include "mqaf/image.hpp"
#include "mqaf/tensor.hpp"

namespace mqaf {

// Small convolutional feature pipeline: `blocks` repetitions of
// conv3x3 (pad 1) -> ReLU -> avg-pool 2x2, then per-location channel-vector
// L2 normalization and global average pooling. The last channel width is
// the feature dimension D.
struct ExtractorConfig {
  std::size_t input_size = 64;
  std::size_t blocks = 3;
  std::vector<std::size_t> channels = {16, 32, 64};
  // Ablation switch: pool the raw map and normalize the pooled vector
  // instead of normalizing per location before pooling.
  bool pool_then_normalize = false;

  std::size_t feature_dim() const { return channels.back(); }
  std::size_t map_size() const { return input_size >> blocks; }
  void validate() const;
};

struct ExtractorParams {
  std::vector<Tensor> kernels;  // per block: [C_out, C_in, 3, 3]
  std::vector<Tensor> biases;   // per block: [C_out]

  std::vector<Tensor> parameters() const;
};

struct Features {
  Tensor map;     // [D, H', W'] (normalized unless pool_then_normalize)
  Tensor vector;  // [D]
};

// Kaiming-style scaled uniform initialization, deterministic under seed.
ExtractorParams init_extractor(const ExtractorConfig& config,
                               std::uint64_t seed);

// Maps pixels to [0,1], runs the blocks, normalizes and pools. Pure in
// (img, params); differentiable w.r.t. params.
Features extract(const ImageBuffer& img, const ExtractorParams& params,
                 const ExtractorConfig& config);

// Tensorize an image as [3, H, W] in [0,1] (no gradient).
Tensor image_to_tensor(const ImageBuffer& img);

}  // namespace mqaf
