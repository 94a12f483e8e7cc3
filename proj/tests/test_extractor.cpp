#include <doctest.h>

#include <cmath>

#include "mqaf/corpus.hpp"
#include "mqaf/extractor.hpp"
#include "mqaf/ops.hpp"
#include "mqaf/selftest.hpp"

using namespace mqaf;

namespace {

ExtractorConfig toy_config() {
  ExtractorConfig config;
  config.input_size = 16;
  config.blocks = 2;
  config.channels = {4, 8};
  return config;
}

}  // namespace

TEST_CASE("default config produces a 64x8x8 map and a 64-vector") {
  ExtractorConfig config;  // defaults: 64 px, 3 blocks, 16/32/64
  const ExtractorParams params = init_extractor(config, 1);
  const ImageBuffer img = synth_reference(64, 2);
  const Features f = extract(img, params, config);
  CHECK(f.map.shape() == Shape{64, 8, 8});
  CHECK(f.vector.shape() == Shape{64});
}

TEST_CASE("four blocks on 64 px leave a 4x4 map") {
  ExtractorConfig config;
  config.blocks = 4;
  config.channels = {8, 16, 32, 64};
  const ExtractorParams params = init_extractor(config, 1);
  const Features f = extract(synth_reference(64, 3), params, config);
  CHECK(f.map.shape() == Shape{64, 4, 4});
}

TEST_CASE("same seed gives identical parameters") {
  const ExtractorParams a = init_extractor(toy_config(), 42);
  const ExtractorParams b = init_extractor(toy_config(), 42);
  REQUIRE(a.kernels.size() == b.kernels.size());
  for (std::size_t i = 0; i < a.kernels.size(); ++i)
    CHECK(a.kernels[i].values() == b.kernels[i].values());
}

TEST_CASE("invalid configs are rejected") {
  ExtractorConfig config = toy_config();
  config.input_size = 18;  // not divisible by 2^blocks
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = toy_config();
  config.channels = {4, 1};  // D < 2
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config = toy_config();
  CHECK_THROWS_AS(extract(make_image(12, 12), init_extractor(toy_config(), 1),
                          config),
                  ShapeError);
}

TEST_CASE("constant-zero images share one bias-determined feature vector") {
  const ExtractorConfig config = toy_config();
  const ExtractorParams params = init_extractor(config, 7);
  const Features a = extract(make_image(16, 16, 0), params, config);
  const Features b = extract(make_image(16, 16, 0), params, config);
  CHECK(a.vector.values() == b.vector.values());
  // Biases start at zero, so the zero image maps to the zero vector.
  for (double v : a.vector.values()) CHECK(v == 0.0);
}

TEST_CASE("extract is deterministic") {
  const ExtractorConfig config = toy_config();
  const ExtractorParams params = init_extractor(config, 8);
  const ImageBuffer img = synth_reference(16, 9);
  const Features a = extract(img, params, config);
  const Features b = extract(img, params, config);
  CHECK(a.map.values() == b.map.values());
  CHECK(a.vector.values() == b.vector.values());
}

TEST_CASE("pooled vector equals the global average pool of the map") {
  const ExtractorConfig config = toy_config();
  const ExtractorParams params = init_extractor(config, 10);
  const Features f = extract(synth_reference(16, 11), params, config);
  const Tensor repooled = global_avg_pool(f.map);
  CHECK(f.vector.values() == repooled.values());
}

TEST_CASE("map locations have unit norm unless zero") {
  const ExtractorConfig config = toy_config();
  const ExtractorParams params = init_extractor(config, 12);
  const Features f = extract(synth_reference(16, 13), params, config);
  const auto& m = f.map.values();
  const std::size_t C = f.map.shape()[0];
  const std::size_t hw = f.map.shape()[1] * f.map.shape()[2];
  for (std::size_t loc = 0; loc < hw; ++loc) {
    double nsq = 0.0;
    for (std::size_t c = 0; c < C; ++c) nsq += m[c * hw + loc] * m[c * hw + loc];
    const double n = std::sqrt(nsq);
    if (n != 0.0) CHECK(n == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("pool_then_normalize flag yields a unit pooled vector") {
  ExtractorConfig config = toy_config();
  config.pool_then_normalize = true;
  const ExtractorParams params = init_extractor(config, 14);
  const Features f = extract(synth_reference(16, 15), params, config);
  double nsq = 0.0;
  for (double v : f.vector.values()) nsq += v * v;
  CHECK(std::sqrt(nsq) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("feature-vector gradient w.r.t. a kernel matches finite differences") {
  const ExtractorConfig config = toy_config();
  const ExtractorParams params = init_extractor(config, 16);
  const ImageBuffer img = synth_reference(16, 17);
  const Tensor kernel0 = params.kernels[0];
  const double err = selftest::max_rel_grad_error(
      [&](const std::vector<Tensor>& in) {
        ExtractorParams probe = params;
        probe.kernels[0] = in[0];
        return sum(extract(img, probe, config).vector);
      },
      {kernel0}, 1e-5);
  CHECK(err < 1e-4);
}
