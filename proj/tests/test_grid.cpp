#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "maskedge/filters.hpp"
#include "maskedge/gradcheck.hpp"
#include "maskedge/grid.hpp"
#include "maskedge/rng.hpp"
#include "support/oracle.hpp"
#include "support/testutil.hpp"

using namespace maskedge;

namespace {

std::vector<Kernel> bank_kernels() {
  return {sobel_x(),      sobel_y(),      prewitt_x(),  prewitt_y(),
          kayyali_se(),   kayyali_ne(),   roberts_main(), roberts_anti(),
          laplace8(),     laplace4()};
}

Grid2D vertical_step_mask() {
  Grid2D g(28, 28);
  for (int r = 0; r < 28; ++r) {
    for (int c = 14; c < 28; ++c) g(r, c) = 1.0;
  }
  return g;
}

}  // namespace

TEST_CASE("Grid2D construction and invariants") {
  Grid2D g(3, 4, 1.5);
  CHECK(g.height() == 3);
  CHECK(g.width() == 4);
  CHECK(g.size() == 12);
  CHECK(g.sum() == doctest::Approx(18.0));
  CHECK(g.all_finite());

  CHECK_THROWS_AS(Grid2D(0, 4), std::invalid_argument);
  CHECK_THROWS_AS(Grid2D::from_values(2, 2, {1.0, 2.0, 3.0}), std::invalid_argument);

  const Grid2D h = Grid2D::from_values(2, 2, {1, 2, 3, 4});
  CHECK(h(1, 0) == 3.0);
  CHECK(h == Grid2D::from_values(2, 2, {1, 2, 3, 4}));
}

TEST_CASE("GridStack enforces matching channel shapes") {
  GridStack stack({Grid2D(4, 4), Grid2D(4, 4)});
  CHECK(stack.channels() == 2);
  CHECK(stack.elements() == 32);
  CHECK_THROWS_AS(GridStack({Grid2D(4, 4), Grid2D(3, 4)}), std::invalid_argument);
  CHECK_THROWS_AS(stack.append(Grid2D(5, 4)), std::invalid_argument);
}

TEST_CASE("conv2d zero input maps to zero") {
  const Grid2D zeros(28, 28, 0.0);
  const Grid2D out = conv2d(zeros, sobel_x(), PaddingMode::kZero);
  CHECK(out.height() == 28);
  CHECK(out.width() == 28);
  CHECK(testutil::all_equal(out, 0.0));
}

TEST_CASE("conv2d constant input under valid padding vanishes for Sobel") {
  const Grid2D ones(28, 28, 1.0);
  const Grid2D out = conv2d(ones, sobel_x(), PaddingMode::kValid);
  CHECK(out.height() == 26);
  CHECK(out.width() == 26);
  CHECK(testutil::all_equal(out, 0.0));
}

TEST_CASE("conv2d vertical step mask against oracle") {
  const Grid2D mask = vertical_step_mask();
  const Grid2D out = conv2d(mask, sobel_x(), PaddingMode::kZero);
  // Interior rows respond with -4 at the two step columns (cross-correlation
  // of S_x with a rising step), zero elsewhere in the interior.
  for (int r = 1; r < 27; ++r) {
    for (int c = 1; c < 27; ++c) {
      const double expected = (c == 13 || c == 14) ? -4.0 : 0.0;
      CHECK(out(r, c) == expected);
    }
  }
  const Grid2D ref = oracle::naive_conv2d(mask, sobel_x().weights, PaddingMode::kZero);
  CHECK(out == ref);
}

TEST_CASE("conv2d rejects oversized and even kernels") {
  const Grid2D small(2, 2, 1.0);
  CHECK_THROWS_AS(conv2d(small, sobel_x(), PaddingMode::kValid), std::invalid_argument);
  const Grid2D evenk(2, 2, 1.0);
  CHECK_THROWS_AS(conv2d(Grid2D(5, 5), evenk, PaddingMode::kZero), std::invalid_argument);
}

TEST_CASE("conv2d matches the naive oracle on randomized cases") {
  Rng rng(101);
  const auto kernels = bank_kernels();
  int cases = 0;
  for (int n = 0; n < 120; ++n) {
    const int h = 3 + rng.uniform_int(14);
    const int w = 3 + rng.uniform_int(14);
    const Grid2D input = testutil::uniform_grid(rng, h, w, -2.0, 2.0);
    const Kernel& k = kernels[rng.uniform_int(static_cast<int>(kernels.size()))];
    const PaddingMode mode =
        rng.uniform() < 0.5 ? PaddingMode::kZero : PaddingMode::kValid;
    const Grid2D got = conv2d(input, k, mode);
    const Grid2D expected = oracle::naive_conv2d(input, k.weights, mode);
    REQUIRE(got.same_shape(expected));
    CHECK(testutil::max_abs_diff(got, expected) <= 1e-12);
    ++cases;
  }
  CHECK(cases >= 100);
}

TEST_CASE("conv2d is linear") {
  Rng rng(7);
  for (int n = 0; n < 20; ++n) {
    const Grid2D x = testutil::uniform_grid(rng, 9, 11, -1.0, 1.0);
    const Grid2D y = testutil::uniform_grid(rng, 9, 11, -1.0, 1.0);
    const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
    const Kernel k = laplace8();
    const Grid2D lhs = conv2d(add(scale(x, a), scale(y, b)), k, PaddingMode::kZero);
    const Grid2D rhs = add(scale(conv2d(x, k, PaddingMode::kZero), a),
                           scale(conv2d(y, k, PaddingMode::kZero), b));
    CHECK(testutil::max_abs_diff(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("conv2d_input_grad is the adjoint of conv2d") {
  Rng rng(13);
  const auto kernels = bank_kernels();
  for (int n = 0; n < 40; ++n) {
    const int h = 4 + rng.uniform_int(10);
    const int w = 4 + rng.uniform_int(10);
    const Kernel& k = kernels[rng.uniform_int(static_cast<int>(kernels.size()))];
    const PaddingMode mode =
        rng.uniform() < 0.5 ? PaddingMode::kZero : PaddingMode::kValid;
    const Grid2D v = testutil::uniform_grid(rng, h, w, -1.0, 1.0);
    const Grid2D conv_v = conv2d(v, k, mode);
    const Grid2D u =
        testutil::uniform_grid(rng, conv_v.height(), conv_v.width(), -1.0, 1.0);
    const double lhs = dot(conv_v, u);
    const double rhs = dot(v, conv2d_input_grad(u, k, mode, h, w));
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }
}

TEST_CASE("conv2d_input_grad on zero upstream is zero") {
  const Grid2D zeros(10, 10, 0.0);
  const Grid2D g = conv2d_input_grad(zeros, sobel_y(), PaddingMode::kZero, 10, 10);
  CHECK(testutil::all_equal(g, 0.0));
}

TEST_CASE("conv2d_input_grad matches finite differences for every bank kernel") {
  Rng rng(29);
  const Grid2D x = testutil::uniform_grid(rng, 10, 10, -1.0, 1.0);
  for (const Kernel& k : bank_kernels()) {
    // Scalar probe: f(x) = <conv(x), U> for a fixed random U.
    const Grid2D u = testutil::uniform_grid(rng, 10, 10, -1.0, 1.0);
    const auto f = [&](const Grid2D& g) {
      return dot(conv2d(g, k, PaddingMode::kZero), u);
    };
    const Grid2D analytic = conv2d_input_grad(u, k, PaddingMode::kZero, 10, 10);
    const auto stats = gradcheck::check_grid_gradient(f, x, analytic, 1e-6);
    CHECK(stats.failed == 0);
    CHECK(stats.checked == 100);
  }
}

TEST_CASE("conv2d_input_grad of a valid 3x3/3x3 scalar output is the kernel") {
  const Kernel k = sobel_x();
  const Grid2D upstream(1, 1, 1.0);
  const Grid2D g = conv2d_input_grad(upstream, k, PaddingMode::kValid, 3, 3);
  CHECK(g == k.weights);
}

TEST_CASE("conv2d_input_grad validates upstream dimensions") {
  CHECK_THROWS_AS(
      conv2d_input_grad(Grid2D(5, 5), sobel_x(), PaddingMode::kValid, 5, 5),
      std::invalid_argument);
}

TEST_CASE("zero-sum kernels kill constant grids in the valid region") {
  const Grid2D constant(12, 12, 0.7313);
  for (const FilterSetName name : sweep_filter_sets()) {
    for (const Kernel& k : get_filter_set(name).kernels) {
      CHECK(k.coefficient_sum() == 0.0);
      const Grid2D out = conv2d(constant, k, PaddingMode::kValid);
      CHECK(testutil::max_abs_diff(out, Grid2D(10, 10, 0.0)) <= 1e-12);
    }
  }
}

TEST_CASE("elementwise operations") {
  Rng rng(37);
  const Grid2D a = testutil::uniform_grid(rng, 5, 5, -1.0, 1.0);

  CHECK(testutil::all_equal(sub(a, a), 0.0));

  const Grid2D x(4, 4, 0.3), y(4, 4, 0.7);
  const Grid2D d = abs(sub(x, y));
  for (double v : d.values()) CHECK(v == doctest::Approx(0.4).epsilon(1e-15));

  // pow spot-check against scalar arithmetic on a few cells.
  const Grid2D cubed = pow(d, 3.0);
  for (const int i : {0, 3, 7, 11, 15}) {
    CHECK(cubed[i] == doctest::Approx(d[i] * d[i] * d[i]).epsilon(1e-15));
  }

  CHECK(mul(x, y)(0, 0) == doctest::Approx(0.21));
  CHECK(scale(x, 2.0)(0, 0) == doctest::Approx(0.6));
  CHECK(exp(Grid2D(2, 2, 0.0)) == Grid2D(2, 2, 1.0));

  CHECK_THROWS_AS(add(Grid2D(2, 2), Grid2D(3, 2)), std::invalid_argument);
  CHECK_THROWS_AS(pow(Grid2D(2, 2, -1.0), 0.5), std::invalid_argument);
  CHECK_NOTHROW(pow(Grid2D(2, 2, -1.0), 3.0));

  // Enum-dispatch form mirrors the named helpers and rejects arity misuse.
  CHECK(elementwise(ElementwiseOp::kAdd, x, y) == add(x, y));
  CHECK(elementwise(ElementwiseOp::kScale, x, 2.0) == scale(x, 2.0));
  CHECK(elementwise(ElementwiseOp::kAbs, a) == abs(a));
  CHECK_THROWS_AS(elementwise(ElementwiseOp::kAbs, x, y), std::invalid_argument);
  CHECK_THROWS_AS(elementwise(ElementwiseOp::kAdd, x), std::invalid_argument);
}

TEST_CASE("operations keep values finite") {
  Rng rng(41);
  const Grid2D a = testutil::uniform_grid(rng, 8, 8, -3.0, 3.0);
  CHECK(conv2d(a, laplace8(), PaddingMode::kZero).all_finite());
  CHECK(pow(abs(a), 4.0).all_finite());
  CHECK(exp(scale(a, 0.1)).all_finite());
}
