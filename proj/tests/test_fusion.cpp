#include <doctest.h>

#include <cmath>

#include "mqaf/extractor.hpp"
#include "mqaf/fusion.hpp"
#include "mqaf/ops.hpp"
#include "mqaf/rng.hpp"

using namespace mqaf;

TEST_CASE("zero-initialized output layer yields alpha exactly one half") {
  const AwnParams awn = init_awn(4, 8, 1);
  Tensor f_ref({4}, {0.3, -0.2, 0.9, 0.1});
  Tensor f_dist({4}, {0.1, 0.4, -0.5, 0.2});
  CHECK(adaptive_weight(f_ref, f_dist, awn).item() == 0.5);
}

TEST_CASE("alpha stays strictly inside (0,1) for random inputs") {
  AwnParams awn = init_awn(4, 8, 2);
  // Give the output layer nonzero weights so the sigmoid is exercised.
  Rng rng(3);
  for (auto& v : awn.w2.mutable_values()) v = rng.uniform(-2.0, 2.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> a(4), b(4);
    for (auto& x : a) x = rng.uniform(-5.0, 5.0);
    for (auto& x : b) x = rng.uniform(-5.0, 5.0);
    const double alpha =
        adaptive_weight(Tensor({4}, a), Tensor({4}, b), awn).item();
    CHECK(alpha > 0.0);
    CHECK(alpha < 1.0);
  }
}

TEST_CASE("alpha gradient never reaches the extractor") {
  ExtractorConfig config;
  config.input_size = 16;
  config.blocks = 2;
  config.channels = {4, 8};
  const ExtractorParams params = init_extractor(config, 4);
  AwnParams awn = init_awn(8, 8, 5);
  Rng rng(6);
  for (auto& v : awn.w2.mutable_values()) v = rng.uniform(-1.0, 1.0);

  ImageBuffer img = make_image(16, 16, 100);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  const Features f_ref = extract(img, params, config);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  const Features f_dist = extract(img, params, config);

  adaptive_weight(f_ref.vector, f_dist.vector, awn).backward();
  for (const auto& t : params.parameters()) CHECK_FALSE(t.has_grad());
  bool awn_touched = false;
  for (const auto& t : awn.parameters()) awn_touched |= t.has_grad();
  CHECK(awn_touched);
}

TEST_CASE("alpha target follows the printed formula") {
  // Equal errors: one half exactly.
  CHECK(alpha_target(0.7, 0.3, 0.5) == 0.5);
  // Perfect memory score keeps the numerator at e^0.
  const double at = alpha_target(0.9, 0.5, 0.5);
  CHECK(at == doctest::Approx(1.0 / (1.0 + std::exp(0.4))).epsilon(1e-15));
  CHECK(at < 0.5);
  CHECK(at == doctest::Approx(0.4013).epsilon(1e-3));
  // Inverted reading flips the preference.
  CHECK(alpha_target(0.9, 0.5, 0.5, true) ==
        doctest::Approx(1.0 - at).epsilon(1e-12));
}

TEST_CASE("quality score blends and degenerates correctly") {
  const Tensor s_ref = Tensor::scalar(0.8);
  const Tensor s_dist = Tensor::scalar(0.4);
  // alpha = 0 reduces to the NR score bitwise.
  CHECK(quality_score(s_ref, s_dist, Tensor::scalar(0.0),
                      ScoreMode::kFullReference)
            .item() == s_dist.item());
  CHECK(quality_score(s_ref, s_dist, Tensor::scalar(1.0),
                      ScoreMode::kFullReference)
            .item() == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(quality_score(s_ref, s_dist, Tensor::scalar(0.25),
                      ScoreMode::kFullReference)
            .item() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(quality_score(std::nullopt, s_dist, std::nullopt,
                      ScoreMode::kNoReference)
            .item() == s_dist.item());
}

TEST_CASE("quality score rejects inconsistent mode arguments") {
  const Tensor s = Tensor::scalar(0.5);
  CHECK_THROWS_AS(quality_score(std::nullopt, s, std::nullopt,
                                ScoreMode::kFullReference),
                  Error);
  CHECK_THROWS_AS(
      quality_score(s, s, std::nullopt, ScoreMode::kFullReference), Error);
  CHECK_THROWS_AS(quality_score(s, s, s, ScoreMode::kNoReference), Error);
}

TEST_CASE("quality score is monotone in s_dist for alpha below one") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const double alpha = rng.uniform(0.0, 0.99);
    const double s_ref = rng.uniform(0.0, 1.0);
    const double lo = rng.uniform(0.0, 0.5);
    const double hi = lo + rng.uniform(0.01, 0.5);
    const double q_lo = quality_score(Tensor::scalar(s_ref),
                                      Tensor::scalar(lo),
                                      Tensor::scalar(alpha),
                                      ScoreMode::kFullReference)
                            .item();
    const double q_hi = quality_score(Tensor::scalar(s_ref),
                                      Tensor::scalar(hi),
                                      Tensor::scalar(alpha),
                                      ScoreMode::kFullReference)
                            .item();
    CHECK(q_hi > q_lo);
  }
}

namespace {

MemoryBank diagonal_bank() {
  // Centered rows orthogonal to each other: memory loss sits at its
  // diagonal-only value.
  const double r3 = std::sqrt(3.0);
  return MemoryBank{
      Tensor({2, 3}, {1.0, 0.0, -1.0, 1.0 / r3, -2.0 / r3, 1.0 / r3}, true)};
}

}  // namespace

TEST_CASE("total loss on a perfect batch reduces to the memory term") {
  const MemoryBank bank = diagonal_bank();
  std::vector<SamplePrediction> batch;
  SamplePrediction sp;
  sp.q = Tensor::scalar(0.7);
  sp.q_true = 0.7;
  sp.alpha = Tensor::scalar(0.5);
  sp.alpha_target = 0.5;
  batch.push_back(sp);
  const double lambda = 0.3;
  const LossBreakdown lb = total_loss(batch, bank, lambda);
  CHECK(lb.l_pre == 0.0);
  CHECK(lb.l_alpha == 0.0);
  CHECK(lb.l_total == doctest::Approx(lambda * lb.l_memory).epsilon(1e-12));
}

TEST_CASE("NR batches contribute no alpha loss") {
  const MemoryBank bank = diagonal_bank();
  std::vector<SamplePrediction> batch(3);
  for (auto& sp : batch) {
    sp.q = Tensor::scalar(0.4);
    sp.q_true = 0.6;
  }
  const LossBreakdown lb = total_loss(batch, bank, 0.1);
  CHECK(lb.l_alpha == 0.0);
  CHECK(lb.l_pre == doctest::Approx(0.04).epsilon(1e-12));
}

TEST_CASE("single FR sample arithmetic with lambda zero") {
  const MemoryBank bank = diagonal_bank();
  std::vector<SamplePrediction> batch(1);
  batch[0].q = Tensor::scalar(0.6);
  batch[0].q_true = 0.5;
  batch[0].alpha = Tensor::scalar(0.4);
  batch[0].alpha_target = 0.6;
  const LossBreakdown lb = total_loss(batch, bank, 0.0);
  CHECK(lb.l_total == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(lb.l_pre == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(lb.l_alpha == doctest::Approx(0.04).epsilon(1e-12));
}

TEST_CASE("loss breakdown satisfies its own invariant") {
  Rng rng(9);
  const MemoryBank bank = diagonal_bank();
  std::vector<SamplePrediction> batch(4);
  for (auto& sp : batch) {
    sp.q = Tensor::scalar(rng.uniform(0.0, 1.0));
    sp.q_true = rng.uniform(0.0, 1.0);
    sp.alpha = Tensor::scalar(rng.uniform(0.1, 0.9));
    sp.alpha_target = rng.uniform(0.1, 0.9);
  }
  const LossBreakdown lb = total_loss(batch, bank, 0.25);
  CHECK(lb.l_total ==
        doctest::Approx(lb.l_pre + 0.25 * lb.l_memory + lb.l_alpha)
            .epsilon(1e-12));
}

TEST_CASE("empty batches are rejected") {
  const MemoryBank bank = diagonal_bank();
  CHECK_THROWS_AS(total_loss({}, bank, 0.1), Error);
}
