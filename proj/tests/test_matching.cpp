#include <doctest.h>

#include <cmath>

#include "mqaf/matching.hpp"
#include "mqaf/ops.hpp"
#include "mqaf/rng.hpp"

using namespace mqaf;

TEST_CASE("reference match of identical nonzero vectors is one") {
  Tensor f({3}, {1.0, 2.0, 2.0});
  const ReferenceMatch rm = reference_match(f, f);
  CHECK(rm.s_cos.item() == doctest::Approx(1.0).epsilon(1e-12));
  // The smoothed |.| (eps 1e-12) turns an exact zero into 1e-6, so s_norm
  // reaches 1 only to within ~1e-6/||f||.
  CHECK(rm.s_norm.item() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rm.s_ref.item() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_FALSE(rm.degenerate);
}

TEST_CASE("doubling the distorted vector halves s_norm") {
  Tensor a({2}, {3.0, 4.0});
  Tensor b({2}, {6.0, 8.0});
  const ReferenceMatch rm = reference_match(a, b);
  CHECK(rm.s_cos.item() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rm.s_norm.item() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(rm.s_ref.item() == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("orthogonal equal-norm vectors give cos 0, norm 1") {
  Tensor a({2}, {1.0, 0.0});
  Tensor b({2}, {0.0, 1.0});
  const ReferenceMatch rm = reference_match(a, b);
  CHECK(rm.s_cos.item() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rm.s_norm.item() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(rm.s_ref.item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("zero vectors fall back to flagged zeros without throwing") {
  Tensor z({2}, {0.0, 0.0});
  Tensor f({2}, {1.0, 1.0});
  const ReferenceMatch rm = reference_match(z, f);
  CHECK(rm.degenerate);
  CHECK(rm.s_cos.item() == 0.0);
  CHECK(rm.s_norm.item() == 0.0);
  CHECK(rm.s_ref.item() == 0.0);
}

TEST_CASE("s_norm is symmetric and scale covariant") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> v(4);
    for (auto& x : v) x = rng.uniform(0.2, 1.5);
    const double c = rng.uniform(0.1, 3.0);
    Tensor f({4}, v);
    std::vector<double> scaled = v;
    for (auto& x : scaled) x *= c;
    Tensor fc({4}, scaled);
    const double got = reference_match(f, fc).s_norm.item();
    const double want = 1.0 - std::abs(1.0 - c) / std::max(1.0, c);
    CHECK(got == doctest::Approx(want).epsilon(1e-5));
    const double sym = reference_match(fc, f).s_norm.item();
    CHECK(got == doctest::Approx(sym).epsilon(1e-12));
  }
}

TEST_CASE("score ranges hold on random inputs") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(6), b(6);
    for (auto& x : a) x = rng.uniform(-2.0, 2.0);
    for (auto& x : b) x = rng.uniform(-2.0, 2.0);
    const ReferenceMatch rm = reference_match(Tensor({6}, a), Tensor({6}, b));
    CHECK(rm.s_cos.item() >= -1.0 - 1e-12);
    CHECK(rm.s_cos.item() <= 1.0 + 1e-12);
    CHECK(rm.s_norm.item() >= 0.0 - 1e-9);
    CHECK(rm.s_norm.item() <= 1.0 + 1e-12);
  }
}

TEST_CASE("memory match of a bank-aligned single location is one") {
  Tensor map({3, 1, 1}, {0.6, 0.0, 0.8});
  MemoryBank bank{Tensor({1, 3}, {0.6, 0.0, 0.8}, true)};
  CHECK(memory_match(map, bank).item() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("memory match of locations orthogonal to every unit is zero") {
  Tensor map({2, 1, 2}, {1.0, 1.0, 0.0, 0.0});  // all locations point at e0
  MemoryBank bank{Tensor({2, 2}, {0.0, 1.0, 0.0, -1.0}, true)};
  CHECK(memory_match(map, bank).item() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("memory match stays within [0,1] on random inputs") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> m(4 * 3 * 3), b(3 * 4);
    for (auto& x : m) x = rng.uniform(-1.5, 1.5);
    for (auto& x : b) x = rng.uniform(-1.5, 1.5);
    const double s =
        memory_match(Tensor({4, 3, 3}, m), MemoryBank{Tensor({3, 4}, b, true)})
            .item();
    CHECK(s >= 0.0);
    CHECK(s <= 1.0 + 1e-12);
  }
}

TEST_CASE("memory match rejects mismatched dimensions") {
  Tensor map({4, 2, 2}, std::vector<double>(16, 0.5));
  MemoryBank bank{Tensor({2, 3}, std::vector<double>(6, 0.5), true)};
  CHECK_THROWS_AS(memory_match(map, bank), ShapeError);
}

TEST_CASE("decorrelation loss closed forms for K=2") {
  const double eps = 1e-8;
  // Zero-mean rows (1,0,-1) and (1,-2,1)/sqrt(3) are orthogonal with equal
  // squared norm 2, so C = [[v,0],[0,v]] with v = 2/(D-1) = 1. Diagonal
  // case: loss = sqrt(2)*v - 2*sqrt(v^2+eps) ~ (sqrt(2)-2)v < 0.
  const double r3 = std::sqrt(3.0);
  MemoryBank diag{
      Tensor({2, 3}, {1.0, 0.0, -1.0, 1.0 / r3, -2.0 / r3, 1.0 / r3}, true)};
  const double v = 1.0;
  const double want_diag = std::sqrt(2.0) * v - 2.0 * std::sqrt(v * v + eps);
  CHECK(decorrelation_loss(diag, eps).item() ==
        doctest::Approx(want_diag).epsilon(1e-12));
  CHECK(want_diag < 0.0);

  // Two identical rows: C = [[v,v],[v,v]], loss = 2v - 2*sqrt(v^2+eps) ~ 0,
  // strictly greater than the diagonal case.
  MemoryBank same{Tensor({2, 3}, {1.0, 0.0, -1.0, 1.0, 0.0, -1.0}, true)};
  const double want_same = 2.0 * v - 2.0 * std::sqrt(v * v + eps);
  CHECK(decorrelation_loss(same, eps).item() ==
        doctest::Approx(want_same).epsilon(1e-12));
  CHECK(std::abs(decorrelation_loss(same, eps).item()) < 1e-6);
  CHECK(decorrelation_loss(same, eps).item() >
        decorrelation_loss(diag, eps).item());
}

TEST_CASE("decorrelation loss requires at least two units") {
  MemoryBank one{Tensor({1, 4}, {1, 2, 3, 4}, true)};
  CHECK_THROWS_AS(decorrelation_loss(one), ShapeError);
}

TEST_CASE("covariance axis switch changes the matrix that is penalized") {
  Rng rng(6);
  std::vector<double> v(4 * 6);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  MemoryBank bank{Tensor({4, 6}, v, true)};
  const double on_units =
      decorrelation_loss(bank, 1e-8, CovarianceAxis::kUnits).item();
  const double on_dims =
      decorrelation_loss(bank, 1e-8, CovarianceAxis::kDims).item();
  CHECK(std::isfinite(on_units));
  CHECK(std::isfinite(on_dims));
  CHECK(on_units != on_dims);
}

TEST_CASE("zeroing off-diagonal covariance never increases the loss") {
  // Property on the loss as a function of C: with the diagonal fixed,
  // ||C||_F grows with off-diagonal magnitude while the diagonal sum stays
  // put.
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t k = 3;
    std::vector<double> c(k * k);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        const double x = rng.uniform(-1.0, 1.0);
        c[i * k + j] = x;
        c[j * k + i] = x;
      }
    auto loss_of = [&](bool keep_offdiag) {
      double frob = 0.0, diag = 0.0;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          const double x = (i == j || keep_offdiag) ? c[i * k + j] : 0.0;
          frob += x * x;
          if (i == j) diag += std::sqrt(x * x + 1e-8);
        }
      return std::sqrt(frob) - diag;
    };
    CHECK(loss_of(false) <= loss_of(true) + 1e-12);
  }
}

TEST_CASE("bank cosine diagnostics") {
  MemoryBank bank{Tensor({2, 2}, {1.0, 0.0, 1.0, 0.0}, true)};
  const auto cos = bank_row_cosines(bank);
  CHECK(cos[0 * 2 + 1] == doctest::Approx(1.0));
  CHECK(mean_offdiag_abs_cosine(bank) == doctest::Approx(1.0));
}
