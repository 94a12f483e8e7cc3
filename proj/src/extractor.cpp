#include "mqaf/extractor.hpp"

#include <cmath>

#include "mqaf/ops.hpp"
#include "mqaf/rng.hpp"

namespace mqaf {

void ExtractorConfig::validate() const {
  if (blocks == 0) throw ConfigError("extractor: blocks must be >= 1");
  if (channels.size() != blocks)
    throw ConfigError("extractor: expected " + std::to_string(blocks) +
                      " channel widths, got " +
                      std::to_string(channels.size()));
  if (feature_dim() < 2)
    throw ConfigError("extractor: feature dimension must be >= 2, got " +
                      std::to_string(feature_dim()));
  if (input_size == 0 || input_size % (std::size_t{1} << blocks) != 0)
    throw ConfigError("extractor: input size " + std::to_string(input_size) +
                      " not divisible by 2^" + std::to_string(blocks));
}

std::vector<Tensor> ExtractorParams::parameters() const {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < kernels.size(); ++i) {
    out.push_back(kernels[i]);
    out.push_back(biases[i]);
  }
  return out;
}

ExtractorParams init_extractor(const ExtractorConfig& config,
                               std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ExtractorParams params;
  std::size_t c_in = ImageBuffer::channels;
  for (std::size_t b = 0; b < config.blocks; ++b) {
    const std::size_t c_out = config.channels[b];
    const std::size_t fan_in = c_in * 3 * 3;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> w(c_out * c_in * 3 * 3);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    // Center each filter so it ignores a uniform input field: with raw
    // uniform filters every location's ReLU response is dominated by a
    // shared mean-activity component and all feature directions collapse
    // together, leaving the matching scores nothing to compare.
    for (std::size_t k = 0; k < c_out; ++k) {
      double m = 0.0;
      for (std::size_t i = 0; i < fan_in; ++i) m += w[k * fan_in + i];
      m /= static_cast<double>(fan_in);
      for (std::size_t i = 0; i < fan_in; ++i) w[k * fan_in + i] -= m;
    }
    params.kernels.emplace_back(Shape{c_out, c_in, 3, 3}, std::move(w), true);
    params.biases.push_back(Tensor::zeros({c_out}, true));
    c_in = c_out;
  }
  return params;
}

Tensor image_to_tensor(const ImageBuffer& img) {
  const std::size_t H = img.height, W = img.width;
  std::vector<double> v(3 * H * W);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        v[(c * H + y) * W + x] = img.at(x, y, c) / 255.0;
  return Tensor(Shape{3, H, W}, std::move(v));
}

Features extract(const ImageBuffer& img, const ExtractorParams& params,
                 const ExtractorConfig& config) {
  config.validate();
  if (img.width != config.input_size || img.height != config.input_size)
    throw ShapeError("extract: image is " + std::to_string(img.width) + "x" +
                     std::to_string(img.height) + ", extractor expects " +
                     std::to_string(config.input_size) + "x" +
                     std::to_string(config.input_size));
  Tensor x = image_to_tensor(img);
  for (std::size_t b = 0; b < config.blocks; ++b) {
    x = conv2d(x, params.kernels[b], 1);
    x = add_channel_bias(x, params.biases[b]);
    x = relu(x);
    x = avg_pool(x, 2);
  }
  Features f;
  if (config.pool_then_normalize) {
    f.map = x;
    f.vector = l2_normalize(global_avg_pool(x));
  } else {
    f.map = channel_l2_normalize(x);
    f.vector = global_avg_pool(f.map);
  }
  return f;
}

}  // namespace mqaf
