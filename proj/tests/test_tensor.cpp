#include <doctest.h>

#include "mqaf/ops.hpp"
#include "mqaf/tensor.hpp"

using namespace mqaf;

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(t.item(), ShapeError);
  CHECK(Tensor::scalar(3.5).item() == 3.5);
}

TEST_CASE("d/dx of x*x at 3 is 6") {
  Tensor x = Tensor::scalar(3.0, true);
  mul(x, x).backward();
  CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("gradient of L2 norm of [3,4] is the unit vector") {
  Tensor x({2}, {3.0, 4.0}, true);
  l2_norm(x).backward();
  CHECK(x.grad()[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(x.grad()[1] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("backward visits shared nodes once") {
  // y = x*x; loss = y + y. If y's adjoint ran twice the gradient would be
  // doubled: d/dx (2x^2) = 4x = 12 at x = 3.
  Tensor x = Tensor::scalar(3.0, true);
  Tensor y = mul(x, x);
  add(y, y).backward();
  CHECK(x.grad()[0] == doctest::Approx(12.0).epsilon(1e-12));
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(mul(x, x).backward(), ShapeError);
}

TEST_CASE("gradients accumulate until zero_grad") {
  Tensor x = Tensor::scalar(2.0, true);
  mul(x, x).backward();
  mul(x, x).backward();
  CHECK(x.grad()[0] == doctest::Approx(8.0));
  x.zero_grad();
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("detach blocks upstream flow and shares values") {
  Tensor x = Tensor::scalar(3.0, true);
  Tensor w = Tensor::scalar(5.0, true);
  mul(detach(x), w).backward();
  CHECK_FALSE(x.has_grad());
  REQUIRE(w.has_grad());
  CHECK(w.grad()[0] == 3.0);

  Tensor d = detach(x);
  x.mutable_values()[0] = 7.0;
  CHECK(d.values()[0] == 7.0);  // shared storage
}

TEST_CASE("constant loss backward is a no-op") {
  Tensor x = Tensor::scalar(1.0, false);
  Tensor loss = mul(x, x);
  loss.backward();  // nothing requires grad; must not throw
  CHECK_FALSE(x.has_grad());
}
