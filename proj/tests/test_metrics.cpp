#include <doctest.h>

#include <cmath>

#include "mqaf/errors.hpp"
#include "mqaf/metrics.hpp"
#include "mqaf/rng.hpp"

using namespace mqaf;

namespace {

std::vector<double> random_list(Rng& rng, std::size_t n, double lo = -5.0,
                                double hi = 5.0) {
  std::vector<double> out(n);
  for (auto& v : out) v = rng.uniform(lo, hi);
  return out;
}

}  // namespace

TEST_CASE("plcc is exactly one for positive affine relations") {
  Rng rng(1);
  const auto x = random_list(rng, 20);
  std::vector<double> y;
  for (double v : x) y.push_back(2.0 * v + 3.0);
  CHECK(plcc(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> neg;
  for (double v : x) neg.push_back(-v);
  CHECK(plcc(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("plcc is invariant under positive affine transforms") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_list(rng, 15);
    const auto y = random_list(rng, 15);
    const double a = rng.uniform(0.1, 4.0), b = rng.uniform(-3.0, 3.0);
    std::vector<double> xt;
    for (double v : x) xt.push_back(a * v + b);
    CHECK(std::abs(plcc(x, y) - plcc(xt, y)) < 1e-12);
  }
}

TEST_CASE("srcc is one for any strictly monotone transform") {
  Rng rng(3);
  const auto x = random_list(rng, 25, 0.1, 3.0);
  for (auto f : {+[](double v) { return std::exp(v); },
                 +[](double v) { return v * v * v; },
                 +[](double v) { return 5.0 * v + 1.0; }}) {
    std::vector<double> y;
    for (double v : x) y.push_back(f(v));
    CHECK(srcc(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("hand-computed rank difference example") {
  // d^2 = 4 + 1 + 1, srcc = 1 - 6*6/(3*8) = -0.5
  CHECK(srcc({1, 2, 3}, {3, 1, 2}) == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("tie handling matches Pearson over average ranks") {
  const std::vector<double> x = {1, 1, 2};
  const std::vector<double> y = {1, 2, 3};
  const auto rx = average_ranks(x);
  CHECK(rx == std::vector<double>{1.5, 1.5, 3.0});
  CHECK(std::abs(srcc(x, y) - plcc(rx, average_ranks(y))) < 1e-12);

  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> a(20), b(20);
    for (auto& v : a) v = static_cast<double>(rng.below(5));
    for (auto& v : b) v = rng.uniform(-1.0, 1.0);
    CHECK(std::abs(srcc(a, b) - plcc(average_ranks(a), average_ranks(b))) <
          1e-12);
  }
}

TEST_CASE("closed form agrees with rank-Pearson on tie-free data") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_list(rng, 30);
    const auto y = random_list(rng, 30);
    CHECK(std::abs(srcc(x, y) - plcc(average_ranks(x), average_ranks(y))) <
          1e-12);
  }
}

TEST_CASE("degenerate inputs raise errors instead of NaN") {
  CHECK_THROWS_AS(plcc({1, 1, 1}, {1, 2, 3}), Error);
  CHECK_THROWS_AS(srcc({2, 2, 2}, {1, 2, 3}), Error);
  CHECK_THROWS_AS(plcc({1}, {2}), Error);
  CHECK_THROWS_AS(plcc({1, 2}, {1, 2, 3}), Error);
}
