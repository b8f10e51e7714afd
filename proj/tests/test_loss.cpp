#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "maskedge/gradcheck.hpp"
#include "maskedge/loss.hpp"
#include "maskedge/rng.hpp"
#include "support/oracle.hpp"
#include "support/testutil.hpp"

using namespace maskedge;

namespace {

Grid2D centered_square_mask(int size, int square) {
  Grid2D g(size, size, 0.0);
  const int start = (size - square) / 2;
  for (int r = start; r < start + square; ++r) {
    for (int c = start; c < start + square; ++c) g(r, c) = 1.0;
  }
  return g;
}

// For p = 1 the edge loss is non-differentiable where a response diff is
// zero. A perturbation of pred pixel i only reaches response pixels within
// the kernel footprint (radius 1, plus 1 when the prediction is smoothed),
// so skip pixels whose footprint contains a near-zero response diff.
std::function<bool(int)> p1_kink_skip(const Grid2D& pred, const Grid2D& gt,
                                      const LossConfig& config) {
  const Grid2D pred_in = config.smooth_pred ? smooth_mask(pred) : pred;
  const Grid2D gt_in = config.smooth_gt ? smooth_mask(gt) : gt;
  const FilterSet set = get_filter_set(config.filter_set);
  const GridStack ry = filter_responses(pred_in, set, config.include_magnitude);
  const GridStack rt = filter_responses(gt_in, set, config.include_magnitude);

  const int h = pred.height(), w = pred.width();
  Grid2D min_abs(h, w, 1e300);
  for (int d = 0; d < ry.channels(); ++d) {
    for (int i = 0; i < h * w; ++i) {
      const double diff = std::abs(ry.channel(d)[i] - rt.channel(d)[i]);
      if (diff < min_abs[i]) min_abs[i] = diff;
    }
  }
  const int radius = config.smooth_pred ? 2 : 1;
  return [min_abs, h, w, radius](int index) {
    const int r = index / w, c = index % w;
    for (int dr = -radius; dr <= radius; ++dr) {
      for (int dc = -radius; dc <= radius; ++dc) {
        const int rr = r + dr, cc = c + dc;
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        if (min_abs(rr, cc) < 1e-3) return true;
      }
    }
    return false;
  };
}

}  // namespace

TEST_CASE("lp_loss on identical stacks is zero with zero gradient") {
  Rng rng(3);
  const Grid2D a = testutil::uniform_grid(rng, 7, 9, -2.0, 2.0);
  const GridStack y({a, scale(a, -1.0)});
  for (const int p : {1, 2, 3, 4}) {
    const LpLossResult res = lp_loss(y, y, p);
    CHECK(res.value == 0.0);
    for (int d = 0; d < 2; ++d) {
      CHECK(testutil::all_equal(res.grad_wrt_y.channel(d), 0.0));
    }
  }
}

TEST_CASE("lp_loss closed form on constant grids") {
  const GridStack y({Grid2D(28, 28, 1.0)});
  const GridStack t({Grid2D(28, 28, 0.5)});
  const LpLossResult res = lp_loss(y, t, 2);
  CHECK(res.value == doctest::Approx(0.25).epsilon(1e-15));
  const double expected_grad = 2.0 * 0.5 / 784.0;  // ~0.0012755
  for (double g : res.grad_wrt_y.channel(0).values()) {
    CHECK(g == doctest::Approx(expected_grad).epsilon(1e-13));
  }
}

TEST_CASE("lp_loss value matches the naive oracle") {
  Rng rng(11);
  for (const int p : {1, 2, 3, 4}) {
    std::vector<Grid2D> ys, ts;
    for (int d = 0; d < 3; ++d) {
      ys.push_back(testutil::uniform_grid(rng, 6, 8, -2.0, 2.0));
      ts.push_back(testutil::uniform_grid(rng, 6, 8, -2.0, 2.0));
    }
    const double expected = oracle::naive_lp_value(ys, ts, p);
    CHECK(lp_loss(GridStack(ys), GridStack(ts), p).value ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("lp_loss gradient matches finite differences") {
  Rng rng(17);
  for (const int p : {1, 2, 3, 4}) {
    const auto stats = gradcheck::check_lp_loss(rng, 8, p, 1e-6);
    INFO(stats.label, " max rel err ", stats.max_rel_err);
    CHECK(stats.failed == 0);
    CHECK(stats.checked > 0);
  }
}

TEST_CASE("lp_loss steepness is monotone in p when all diffs exceed one") {
  Rng rng(23);
  Grid2D y(6, 6), t(6, 6, 0.0);
  for (int i = 0; i < y.size(); ++i) {
    const double magnitude = rng.uniform(1.1, 3.0);
    y[i] = rng.uniform() < 0.5 ? -magnitude : magnitude;
  }
  const GridStack ys({y}), ts({t});
  const double v2 = lp_loss(ys, ts, 2).value;
  const double v3 = lp_loss(ys, ts, 3).value;
  const double v4 = lp_loss(ys, ts, 4).value;
  CHECK(v4 >= v3);
  CHECK(v3 >= v2);
}

TEST_CASE("lp_loss rejects mismatched stacks") {
  const GridStack a({Grid2D(4, 4)});
  const GridStack b({Grid2D(4, 5)});
  CHECK_THROWS_AS(lp_loss(a, b, 2), std::invalid_argument);
  CHECK_THROWS_AS(lp_loss(a, a, 0), std::invalid_argument);
}

TEST_CASE("mask_bce_loss closed form at 0.5") {
  Rng rng(31);
  const Grid2D pred(9, 9, 0.5);
  const Grid2D gt = testutil::binary_grid(rng, 9, 9);
  CHECK(mask_bce_loss(pred, gt).value ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("mask_bce_loss near-identity floor") {
  Rng rng(37);
  const Grid2D gt = testutil::binary_grid(rng, 12, 12);
  Grid2D pred = gt;
  for (double& v : pred.values()) v = v == 1.0 ? 1.0 - 1e-7 : 1e-7;
  const double value = mask_bce_loss(pred, gt).value;
  CHECK(value >= 0.0);
  CHECK(value <= 2e-7 * std::abs(std::log(1e-7)));
}

TEST_CASE("mask_bce_loss matches oracle and finite differences") {
  Rng rng(41);
  const Grid2D pred = testutil::uniform_grid(rng, 8, 8, 0.05, 0.95);
  const Grid2D gt = testutil::binary_grid(rng, 8, 8);
  CHECK(mask_bce_loss(pred, gt).value ==
        doctest::Approx(oracle::naive_bce_value(pred, gt)).epsilon(1e-12));

  const auto stats = gradcheck::check_mask_bce(rng, 10, 1e-6);
  CHECK(stats.failed == 0);
}

TEST_CASE("mask_bce_loss validates inputs") {
  CHECK_THROWS_AS(mask_bce_loss(Grid2D(3, 3, 0.5), Grid2D(4, 3, 1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(mask_bce_loss(Grid2D(3, 3, 1.5), Grid2D(3, 3, 1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(mask_bce_loss(Grid2D(3, 3, 0.5), Grid2D(3, 3, 0.25)),
                  std::invalid_argument);
}

TEST_CASE("edge loss vanishes on identical masks for every configuration") {
  Rng rng(43);
  const Grid2D mask = testutil::binary_grid(rng, 16, 16);
  for (const FilterSetName filter : sweep_filter_sets()) {
    for (const bool smooth : {false, true}) {
      for (const bool magnitude : {false, true}) {
        LossConfig config;
        config.filter_set = filter;
        config.smooth_gt = smooth;
        config.smooth_pred = smooth;
        config.include_magnitude = magnitude;
        const LossResult res = edge_agreement_loss(mask, mask, config);
        CHECK(res.value == 0.0);
        CHECK(testutil::all_equal(res.grad_wrt_pred, 0.0));
      }
    }
  }
}

TEST_CASE("edge loss on the centered square matches the oracle composition") {
  const Grid2D gt = centered_square_mask(28, 8);
  const Grid2D pred(28, 28, 0.0);
  LossConfig config;  // Sobel, p=2, alpha=1

  // Independent composition: oracle conv responses + scalar mean of squares.
  const Grid2D rx = oracle::naive_conv2d(gt, sobel_x().weights, PaddingMode::kZero);
  const Grid2D ry = oracle::naive_conv2d(gt, sobel_y().weights, PaddingMode::kZero);
  double expected = 0.0;
  for (int i = 0; i < rx.size(); ++i) expected += rx[i] * rx[i];
  for (int i = 0; i < ry.size(); ++i) expected += ry[i] * ry[i];
  expected /= 784.0 * 2.0;

  const LossResult res = edge_agreement_loss(pred, gt, config);
  CHECK(res.value == doctest::Approx(expected).epsilon(1e-12));

  // Alpha scales value and gradient exactly linearly.
  LossConfig wide = config;
  wide.alpha = 16.0;
  const LossResult scaled = edge_agreement_loss(pred, gt, wide);
  CHECK(scaled.value == 16.0 * res.value);
  for (int i = 0; i < res.grad_wrt_pred.size(); ++i) {
    CHECK(scaled.grad_wrt_pred[i] == 16.0 * res.grad_wrt_pred[i]);
  }
}

TEST_CASE("edge loss value is symmetric for the standard formulation") {
  Rng rng(47);
  const Grid2D a = testutil::binary_grid(rng, 14, 14);
  const Grid2D b = testutil::binary_grid(rng, 14, 14);
  for (const FilterSetName filter : sweep_filter_sets()) {
    LossConfig config;
    config.filter_set = filter;
    CHECK(edge_agreement_loss(a, b, config).value ==
          doctest::Approx(edge_agreement_loss(b, a, config).value).epsilon(1e-12));
  }
}

TEST_CASE("edge loss alpha zero short-circuits to exact zero") {
  Rng rng(53);
  const Grid2D pred = testutil::uniform_grid(rng, 10, 10, 0.0, 1.0);
  const Grid2D gt = testutil::binary_grid(rng, 10, 10);
  LossConfig config;
  config.alpha = 0.0;
  const LossResult res = edge_agreement_loss(pred, gt, config);
  CHECK(res.value == 0.0);
  CHECK(testutil::all_equal(res.grad_wrt_pred, 0.0));
}

TEST_CASE("edge loss validates inputs") {
  LossConfig config;
  CHECK_THROWS_AS(edge_agreement_loss(Grid2D(8, 8, 1.1), Grid2D(8, 8, 0.0), config),
                  std::invalid_argument);
  CHECK_THROWS_AS(edge_agreement_loss(Grid2D(8, 8, 0.5), Grid2D(8, 9, 0.0), config),
                  std::invalid_argument);
  CHECK_THROWS_AS(edge_agreement_loss(Grid2D(8, 8, 0.5), Grid2D(8, 8, 0.3), config),
                  std::invalid_argument);
  LossConfig bad = config;
  bad.p = 0;
  CHECK_THROWS_AS(edge_agreement_loss(Grid2D(8, 8, 0.5), Grid2D(8, 8, 1.0), bad),
                  std::invalid_argument);
  bad = config;
  bad.alpha = -1.0;
  CHECK_THROWS_AS(edge_agreement_loss(Grid2D(8, 8, 0.5), Grid2D(8, 8, 1.0), bad),
                  std::invalid_argument);
}

TEST_CASE("edge loss gradient matches finite differences across the bank") {
  Rng rng(59);
  for (const FilterSetName filter : sweep_filter_sets()) {
    for (const bool magnitude : {false, true}) {
      LossConfig config;
      config.filter_set = filter;
      config.include_magnitude = magnitude;
      const auto stats = gradcheck::check_edge_loss(rng, 3, config, 1e-5, 10);
      INFO(stats.label, " max rel err ", stats.max_rel_err);
      CHECK(stats.failed == 0);
    }
  }
  for (const bool smooth_gt : {false, true}) {
    for (const bool smooth_pred : {false, true}) {
      LossConfig config;
      config.smooth_gt = smooth_gt;
      config.smooth_pred = smooth_pred;
      const auto stats = gradcheck::check_edge_loss(rng, 3, config, 1e-5, 10);
      CHECK(stats.failed == 0);
    }
  }
}

TEST_CASE("constant offset leaves interior filter responses unchanged") {
  Rng rng(61);
  const Grid2D a = testutil::uniform_grid(rng, 12, 12, 0.0, 0.6);
  const double offset = 0.37;
  const Grid2D shifted = add(a, Grid2D(12, 12, offset));
  for (const FilterSetName name : sweep_filter_sets()) {
    for (const Kernel& k : get_filter_set(name).kernels) {
      const Grid2D r0 = conv2d(a, k, PaddingMode::kZero);
      const Grid2D r1 = conv2d(shifted, k, PaddingMode::kZero);
      for (int r = 1; r < 11; ++r) {
        for (int c = 1; c < 11; ++c) {
          CHECK(r0(r, c) == doctest::Approx(r1(r, c)).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("combined loss with alpha zero equals the bare cross entropy") {
  Rng rng(67);
  const Grid2D pred = testutil::uniform_grid(rng, 12, 12, 0.05, 0.95);
  const Grid2D gt = testutil::binary_grid(rng, 12, 12);
  LossConfig config;
  config.alpha = 0.0;
  const CombinedLossResult combined = combined_mask_loss(pred, gt, config);
  const LossResult bce = mask_bce_loss(pred, gt);
  CHECK(combined.value == bce.value);
  CHECK(combined.edge_value_raw == 0.0);
  CHECK(combined.grad_wrt_pred == bce.grad_wrt_pred);
}

TEST_CASE("combined loss is the sum of its independently oracled terms") {
  const Grid2D gt = centered_square_mask(28, 8);
  const Grid2D pred(28, 28, 0.0);
  LossConfig config;  // Standard, Sobel, p=2, alpha=1

  const double bce = oracle::naive_bce_value(pred, gt);
  const Grid2D rx = oracle::naive_conv2d(gt, sobel_x().weights, PaddingMode::kZero);
  const Grid2D ry = oracle::naive_conv2d(gt, sobel_y().weights, PaddingMode::kZero);
  double edge = 0.0;
  for (int i = 0; i < rx.size(); ++i) edge += rx[i] * rx[i] + ry[i] * ry[i];
  edge /= 784.0 * 2.0;

  const CombinedLossResult res = combined_mask_loss(pred, gt, config);
  CHECK(res.value == doctest::Approx(bce + edge).epsilon(1e-12));
  CHECK(res.mask_value == doctest::Approx(bce).epsilon(1e-12));
  CHECK(res.edge_value_raw == doctest::Approx(edge).epsilon(1e-12));
}

TEST_CASE("combined loss on identical masks reduces to the BCE floor") {
  Rng rng(71);
  const Grid2D gt = testutil::binary_grid(rng, 10, 10);
  Grid2D pred = gt;
  LossConfig config;
  const CombinedLossResult res = combined_mask_loss(pred, gt, config);
  CHECK(res.edge_value_raw == 0.0);
  CHECK(res.value == res.mask_value);
  CHECK(res.value <= 2e-7 * std::abs(std::log(1e-7)));
}

TEST_CASE("combined loss gradient matches finite differences per formulation") {
  Rng rng(73);
  for (const Formulation f : {Formulation::kStandard, Formulation::kProductPW,
                              Formulation::kExpProductPW}) {
    LossConfig config;
    config.formulation = f;
    const auto stats = gradcheck::check_combined_loss(rng, 5, config, 1e-5, 10);
    INFO(stats.label, " max rel err ", stats.max_rel_err);
    CHECK(stats.failed == 0);
  }
}

TEST_CASE("combined loss gradient on random configurations") {
  Rng rng(79);
  const std::vector<FilterSetName> filters = sweep_filter_sets();
  const std::vector<Formulation> formulations = {
      Formulation::kStandard, Formulation::kProductPW, Formulation::kExpProductPW};
  int triples = 0;
  for (int n = 0; n < 24; ++n) {
    LossConfig config;
    config.filter_set = filters[rng.uniform_int(static_cast<int>(filters.size()))];
    config.p = 1 + rng.uniform_int(4);
    config.alpha = rng.uniform(0.25, 2.0);
    config.smooth_gt = rng.uniform() < 0.5;
    config.smooth_pred = rng.uniform() < 0.5;
    config.include_magnitude = rng.uniform() < 0.5;
    config.formulation =
        formulations[rng.uniform_int(static_cast<int>(formulations.size()))];

    const Grid2D pred = testutil::uniform_grid(rng, 9, 9, 0.05, 0.95);
    const Grid2D gt = testutil::binary_grid(rng, 9, 9);
    const CombinedLossResult res = combined_mask_loss(pred, gt, config);
    const auto f = [&gt, &config](const Grid2D& x) {
      return combined_mask_loss(x, gt, config).value;
    };
    std::function<bool(int)> skip;
    if (config.p == 1) skip = p1_kink_skip(pred, gt, config);
    const auto stats =
        gradcheck::check_grid_gradient(f, pred, res.grad_wrt_pred, 1e-5, 1e-9, skip);
    INFO("config p=", config.p, " filter=", to_string(config.filter_set),
         " max rel err ", stats.max_rel_err);
    CHECK(stats.failed == 0);
    ++triples;
  }
  CHECK(triples >= 20);
}

TEST_CASE("smooth_mask behavior") {
  CHECK(testutil::all_equal(smooth_mask(Grid2D(10, 10, 0.0)), 0.0));

  const Grid2D ones(10, 10, 1.0);
  const Grid2D smoothed = smooth_mask(ones);
  CHECK(smoothed(5, 5) == 1.0);
  CHECK(smoothed(0, 0) == doctest::Approx(9.0 / 16.0).epsilon(1e-15));
  CHECK(smoothed.min() >= 0.0);
  CHECK(smoothed.max() <= 1.0);

  Grid2D impulse(9, 9, 0.0);
  impulse(4, 4) = 1.0;
  const Grid2D stamp = smooth_mask(impulse);
  const Kernel g = gaussian_kernel_3x3();
  for (int u = 0; u < 3; ++u) {
    for (int v = 0; v < 3; ++v) {
      CHECK(stamp(3 + u, 3 + v) == g.weights(2 - u, 2 - v));
    }
  }
  CHECK(stamp(4, 4) == 0.25);
}

TEST_CASE("formulation names round-trip") {
  for (const Formulation f : {Formulation::kStandard, Formulation::kProductPW,
                              Formulation::kExpProductPW}) {
    CHECK(parse_formulation(to_string(f)) == f);
  }
  CHECK_THROWS_AS(parse_formulation("Quotient"), std::invalid_argument);
}
