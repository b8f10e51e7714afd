#include <stdexcept>

#include "doctest.h"
#include "maskedge/filters.hpp"
#include "support/testutil.hpp"

using namespace maskedge;

namespace {

Grid2D transpose(const Grid2D& g) {
  Grid2D t(g.width(), g.height());
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) t(c, r) = g(r, c);
  }
  return t;
}

Grid2D rotate90(const Grid2D& g) {
  Grid2D r(g.width(), g.height());
  for (int i = 0; i < g.height(); ++i) {
    for (int j = 0; j < g.width(); ++j) r(j, g.height() - 1 - i) = g(i, j);
  }
  return r;
}

}  // namespace

TEST_CASE("Sobel kernels carry the exact coefficients") {
  const FilterSet sobel = get_filter_set("Sobel");
  REQUIRE(sobel.channels() == 2);
  CHECK(sobel.kernels[0].weights ==
        Grid2D::from_values(3, 3, {1, 0, -1, 2, 0, -2, 1, 0, -1}));
  CHECK(sobel.kernels[1].weights ==
        Grid2D::from_values(3, 3, {1, 2, 1, 0, 0, 0, -1, -2, -1}));
}

TEST_CASE("Laplace set is the single 8-neighbor kernel") {
  const FilterSet laplace = get_filter_set(FilterSetName::kLaplace);
  REQUIRE(laplace.channels() == 1);
  CHECK(laplace.kernels[0].weights ==
        Grid2D::from_values(3, 3, {1, 1, 1, 1, -8, 1, 1, 1, 1}));
}

TEST_CASE("Laplace4 is available but outside the default sweep") {
  const FilterSet l4 = get_filter_set(FilterSetName::kLaplace4);
  REQUIRE(l4.channels() == 1);
  CHECK(l4.kernels[0].weights ==
        Grid2D::from_values(3, 3, {0, 1, 0, 1, -4, 1, 0, 1, 0}));
  for (const FilterSetName name : sweep_filter_sets()) {
    CHECK(name != FilterSetName::kLaplace4);
  }
  CHECK(sweep_filter_sets().size() == 6);
}

TEST_CASE("SobelAndLaplace stacks Sobel channels before Laplace") {
  const FilterSet sl = get_filter_set(FilterSetName::kSobelAndLaplace);
  REQUIRE(sl.channels() == 3);
  CHECK(sl.kernels[0].weights == sobel_x().weights);
  CHECK(sl.kernels[1].weights == sobel_y().weights);
  CHECK(sl.kernels[2].weights == laplace8().weights);
}

TEST_CASE("bank channel counts match the ablation table") {
  CHECK(get_filter_set(FilterSetName::kSobel).channels() == 2);
  CHECK(get_filter_set(FilterSetName::kPrewitt).channels() == 2);
  CHECK(get_filter_set(FilterSetName::kKayyali).channels() == 2);
  CHECK(get_filter_set(FilterSetName::kRoberts).channels() == 2);
  CHECK(get_filter_set(FilterSetName::kLaplace).channels() == 1);
  CHECK(get_filter_set(FilterSetName::kSobelAndLaplace).channels() == 3);
}

TEST_CASE("every edge kernel sums to zero exactly") {
  for (const FilterSetName name : sweep_filter_sets()) {
    for (const Kernel& k : get_filter_set(name).kernels) {
      CHECK(k.coefficient_sum() == 0.0);
    }
  }
  CHECK(laplace4().coefficient_sum() == 0.0);
}

TEST_CASE("gradient pairs are mutual transposes") {
  CHECK(sobel_y().weights == transpose(sobel_x().weights));
  CHECK(prewitt_y().weights == transpose(prewitt_x().weights));
}

TEST_CASE("Laplace kernel is symmetric under 90 degree rotation") {
  CHECK(rotate90(laplace8().weights) == laplace8().weights);
  CHECK(rotate90(laplace4().weights) == laplace4().weights);
}

TEST_CASE("Roberts pair embeds the 2x2 operators top-left") {
  CHECK(roberts_main().weights ==
        Grid2D::from_values(3, 3, {1, 0, 0, 0, -1, 0, 0, 0, 0}));
  CHECK(roberts_anti().weights ==
        Grid2D::from_values(3, 3, {0, 1, 0, -1, 0, 0, 0, 0, 0}));
}

TEST_CASE("gaussian kernel normalizes to one") {
  const Kernel g = gaussian_kernel_3x3();
  CHECK(g.coefficient_sum() == 1.0);
  CHECK(g.weights(1, 1) == 0.25);
  CHECK(g.weights(0, 0) == 1.0 / 16.0);
  CHECK(g.weights(0, 1) == 2.0 / 16.0);

  // A constant grid passes through untouched in the valid region.
  for (const double c : {1.0, 0.5}) {
    const Grid2D constant(8, 8, c);
    const Grid2D smoothed = conv2d(constant, g, PaddingMode::kValid);
    CHECK(testutil::all_equal(smoothed, c));
  }
}

TEST_CASE("filter names round-trip and unknown names are rejected") {
  for (const FilterSetName name : sweep_filter_sets()) {
    CHECK(parse_filter_set_name(to_string(name)) == name);
  }
  CHECK_THROWS_AS(get_filter_set("Scharr"), std::invalid_argument);
}
