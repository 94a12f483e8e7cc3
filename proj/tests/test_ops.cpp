#include <doctest.h>

#include <algorithm>

#include "mqaf/ops.hpp"
#include "mqaf/rng.hpp"
#include "mqaf/selftest.hpp"

using namespace mqaf;

TEST_CASE("matmul against the 2x2 identity") {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor out = matmul(a, eye);
  CHECK(out.values() == std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("global average pool of a 2x2 single-channel map") {
  Tensor map({1, 2, 2}, {1, 2, 3, 4});
  const Tensor pooled = global_avg_pool(map);
  REQUIRE(pooled.shape() == Shape{1});
  CHECK(pooled.values()[0] == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("l2_normalize of the 3-4-5 triangle") {
  Tensor v({2}, {3, 4});
  const Tensor out = l2_normalize(v);
  CHECK(out.values()[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(out.values()[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("l2_normalize leaves the zero vector as zero") {
  Tensor v({3}, {0, 0, 0});
  const Tensor out = l2_normalize(v);
  CHECK(out.values() == std::vector<double>{0, 0, 0});
}

TEST_CASE("shape mismatches name the operation and both shapes") {
  Tensor a({2}, {1, 2});
  Tensor b({3}, {1, 2, 3});
  try {
    add(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("[2]") != std::string::npos);
    CHECK(msg.find("[3]") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(conv2d(Tensor({2, 3, 3}, std::vector<double>(18, 0.0)),
                         Tensor({1, 3, 1, 1}, {1, 1, 1}), 0),
                  ShapeError);
}

TEST_CASE("cross-correlation with 1x1 kernels equals per-location matmul") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t C = 3, H = 5, W = 5, K = 4;
    std::vector<double> in(C * H * W), ker(K * C);
    for (auto& v : in) v = rng.uniform(-1, 1);
    for (auto& v : ker) v = rng.uniform(-1, 1);
    const Tensor out = conv2d(Tensor({C, H, W}, in), Tensor({K, C, 1, 1}, ker), 0);
    // Brute-force loop oracle.
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          double want = 0.0;
          for (std::size_t c = 0; c < C; ++c)
            want += ker[k * C + c] * in[(c * H + y) * W + x];
          CHECK(out.values()[(k * H + y) * W + x] ==
                doctest::Approx(want).epsilon(1e-12));
        }
  }
}

TEST_CASE("forward determinism: identical inputs give identical bits") {
  Rng rng(7);
  std::vector<double> in(3 * 6 * 6), ker(4 * 3 * 3 * 3);
  for (auto& v : in) v = rng.uniform(-1, 1);
  for (auto& v : ker) v = rng.uniform(-1, 1);
  const Tensor a = conv2d(Tensor({3, 6, 6}, in), Tensor({4, 3, 3, 3}, ker), 1);
  const Tensor b = conv2d(Tensor({3, 6, 6}, in), Tensor({4, 3, 3, 3}, ker), 1);
  CHECK(a.values() == b.values());
}

TEST_CASE("primitive catalog names every required operation") {
  const auto& catalog = primitive_forward_set();
  for (const char* required :
       {"add", "sub", "mul", "matmul", "conv2d", "relu", "avg_pool",
        "global_avg_pool", "l2_norm", "sum", "mean", "sqrt_smooth",
        "abs_smooth", "exp", "sigmoid", "concat", "l2_normalize",
        "row_covariance", "frobenius_norm", "detach"}) {
    CAPTURE(required);
    CHECK(std::find(catalog.begin(), catalog.end(), required) != catalog.end());
  }
}

TEST_CASE("abs_smooth approximates |x| away from zero") {
  Tensor x({2}, {-2.0, 3.0});
  const Tensor out = abs_smooth(x);
  CHECK(out.values()[0] == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(out.values()[1] == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("gradient suite spot check") {
  // The full 100-trial suite runs in the acceptance binary; a reduced pass
  // here keeps unit feedback fast.
  const auto checks = selftest::gradient_suite(4242, 25);
  for (const auto& c : checks) {
    CAPTURE(c.name);
    CAPTURE(c.detail);
    CHECK(c.passed);
  }
}
