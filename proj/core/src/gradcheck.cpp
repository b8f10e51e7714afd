#include "maskedge/gradcheck.hpp"

#include <cmath>

#include "maskedge/model.hpp"
#include "maskedge/synthdata.hpp"

namespace maskedge::gradcheck {

namespace {

void tally(CheckStats& stats, double analytic, double fd, double rel_tol,
           double abs_tol) {
  ++stats.checked;
  const double denom = std::max(std::abs(analytic), std::abs(fd));
  if (denom <= abs_tol) return;
  const double rel = std::abs(analytic - fd) / denom;
  stats.max_rel_err = std::max(stats.max_rel_err, rel);
  if (rel > rel_tol) ++stats.failed;
}

}  // namespace

CheckStats check_grid_gradient(const std::function<double(const Grid2D&)>& f,
                               const Grid2D& x0, const Grid2D& analytic,
                               double rel_tol, double abs_tol,
                               const std::function<bool(int)>& skip) {
  CheckStats stats;
  Grid2D x = x0;
  for (int i = 0; i < x.size(); ++i) {
    if (skip && skip(i)) continue;
    const double saved = x[i];
    x[i] = saved + kFdStep;
    const double up = f(x);
    x[i] = saved - kFdStep;
    const double down = f(x);
    x[i] = saved;
    const double fd = (up - down) / (2.0 * kFdStep);
    tally(stats, analytic[i], fd, rel_tol, abs_tol);
  }
  return stats;
}

Grid2D random_grid(Rng& rng, int height, int width, double lo, double hi) {
  Grid2D g(height, width);
  for (int i = 0; i < g.size(); ++i) g[i] = rng.uniform(lo, hi);
  return g;
}

Grid2D random_binary_grid(Rng& rng, int height, int width) {
  Grid2D g(height, width);
  for (int i = 0; i < g.size(); ++i) g[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return g;
}

CheckStats check_lp_loss(Rng& rng, int instances, int p, double rel_tol) {
  CheckStats total;
  total.label = "lp_loss p=" + std::to_string(p);
  for (int n = 0; n < instances; ++n) {
    const int h = 5 + rng.uniform_int(4);
    const int w = 5 + rng.uniform_int(4);
    const int channels = 1 + rng.uniform_int(3);
    std::vector<Grid2D> ys, ts;
    for (int d = 0; d < channels; ++d) {
      ys.push_back(random_grid(rng, h, w, -2.0, 2.0));
      ts.push_back(random_grid(rng, h, w, -2.0, 2.0));
    }
    const GridStack y(ys), t(ts);
    const LpLossResult res = lp_loss(y, t, p);
    for (int d = 0; d < channels; ++d) {
      const auto f = [&](const Grid2D& g) {
        GridStack perturbed = y;
        perturbed.channel(d) = g;
        return lp_loss(perturbed, t, p).value;
      };
      // p = 1 is non-differentiable where y = y_hat; exclude near-kink elements.
      std::function<bool(int)> skip;
      if (p == 1) {
        const Grid2D& yd = y.channel(d);
        const Grid2D& td = t.channel(d);
        skip = [&yd, &td](int i) { return std::abs(yd[i] - td[i]) < 1e-4; };
      }
      const CheckStats s = check_grid_gradient(f, y.channel(d),
                                               res.grad_wrt_y.channel(d), rel_tol,
                                               1e-9, skip);
      total.checked += s.checked;
      total.failed += s.failed;
      total.max_rel_err = std::max(total.max_rel_err, s.max_rel_err);
    }
  }
  return total;
}

CheckStats check_mask_bce(Rng& rng, int instances, double rel_tol) {
  CheckStats total;
  total.label = "mask_bce_loss";
  for (int n = 0; n < instances; ++n) {
    const int h = 6 + rng.uniform_int(5);
    const int w = 6 + rng.uniform_int(5);
    const Grid2D pred = random_grid(rng, h, w, 0.05, 0.95);
    const Grid2D gt = random_binary_grid(rng, h, w);
    const LossResult res = mask_bce_loss(pred, gt);
    const auto f = [&gt](const Grid2D& x) { return mask_bce_loss(x, gt).value; };
    const CheckStats s =
        check_grid_gradient(f, pred, res.grad_wrt_pred, rel_tol);
    total.checked += s.checked;
    total.failed += s.failed;
    total.max_rel_err = std::max(total.max_rel_err, s.max_rel_err);
  }
  return total;
}

CheckStats check_edge_loss(Rng& rng, int instances, const LossConfig& config,
                           double rel_tol, int grid_size) {
  CheckStats total;
  total.label = "edge " + to_string(config.filter_set) +
                " smooth=" + (config.smooth_gt ? "on" : "off") +
                " mag=" + (config.include_magnitude ? "on" : "off");
  for (int n = 0; n < instances; ++n) {
    const Grid2D pred = random_grid(rng, grid_size, grid_size, 0.05, 0.95);
    const Grid2D gt = random_binary_grid(rng, grid_size, grid_size);
    const LossResult res = edge_agreement_loss(pred, gt, config);
    const auto f = [&gt, &config](const Grid2D& x) {
      return edge_agreement_loss(x, gt, config).value;
    };
    const CheckStats s =
        check_grid_gradient(f, pred, res.grad_wrt_pred, rel_tol);
    total.checked += s.checked;
    total.failed += s.failed;
    total.max_rel_err = std::max(total.max_rel_err, s.max_rel_err);
  }
  return total;
}

CheckStats check_combined_loss(Rng& rng, int instances, const LossConfig& config,
                               double rel_tol, int grid_size) {
  CheckStats total;
  total.label = "combined " + to_string(config.formulation);
  for (int n = 0; n < instances; ++n) {
    const Grid2D pred = random_grid(rng, grid_size, grid_size, 0.05, 0.95);
    const Grid2D gt = random_binary_grid(rng, grid_size, grid_size);
    const CombinedLossResult res = combined_mask_loss(pred, gt, config);
    const auto f = [&gt, &config](const Grid2D& x) {
      return combined_mask_loss(x, gt, config).value;
    };
    const CheckStats s =
        check_grid_gradient(f, pred, res.grad_wrt_pred, rel_tol);
    total.checked += s.checked;
    total.failed += s.failed;
    total.max_rel_err = std::max(total.max_rel_err, s.max_rel_err);
  }
  return total;
}

CheckStats check_model_params(Rng& rng, int instances, const LossConfig& config,
                              int image_size, int mask_size, double rel_tol) {
  CheckStats total;
  total.label = "model " + to_string(config.formulation);
  for (int n = 0; n < instances; ++n) {
    MaskHead head =
        init_weights(image_size, mask_size, kNumShapeClasses, rng.next_u64());
    const Grid2D image = random_grid(rng, image_size, image_size, 0.0, 1.0);
    const Grid2D gt = random_binary_grid(rng, mask_size, mask_size);
    const int class_id = rng.uniform_int(kNumShapeClasses);

    auto [pred, cache] = forward(head, image, class_id);
    const CombinedLossResult loss = combined_mask_loss(pred, gt, config);
    ParamGrads grads = backward(head, cache, loss.grad_wrt_pred);

    const auto loss_at = [&]() {
      return combined_mask_loss(forward(head, image, class_id).first, gt, config)
          .value;
    };
    auto params = param_tensors(head);
    auto grad_views = param_tensors(grads);
    for (size_t t = 0; t < params.size(); ++t) {
      for (size_t i = 0; i < params[t].values.size(); ++i) {
        double& p = params[t].values[i];
        const double saved = p;
        p = saved + kFdStep;
        const double up = loss_at();
        p = saved - kFdStep;
        const double down = loss_at();
        p = saved;
        const double fd = (up - down) / (2.0 * kFdStep);
        tally(total, grad_views[t].values[i], fd, rel_tol, 1e-9);
      }
    }
  }
  return total;
}

std::vector<CheckStats> run_battery(uint64_t seed, int instances,
                                    int model_instances) {
  Rng rng(seed);
  std::vector<CheckStats> results;

  for (const int p : {1, 2, 3, 4}) {
    results.push_back(check_lp_loss(rng, instances, p, 1e-6));
  }
  results.push_back(check_mask_bce(rng, instances, 1e-6));

  for (const FilterSetName filter : sweep_filter_sets()) {
    for (const bool smooth : {false, true}) {
      for (const bool magnitude : {false, true}) {
        LossConfig config;
        config.filter_set = filter;
        config.p = 2;
        config.smooth_gt = smooth;
        config.smooth_pred = smooth;
        config.include_magnitude = magnitude;
        results.push_back(check_edge_loss(rng, instances, config, 1e-5));
      }
    }
  }

  for (const Formulation f : {Formulation::kStandard, Formulation::kProductPW,
                              Formulation::kExpProductPW}) {
    LossConfig config;
    config.formulation = f;
    results.push_back(check_combined_loss(rng, instances, config, 1e-5));
  }

  for (const Formulation f : {Formulation::kStandard, Formulation::kProductPW,
                              Formulation::kExpProductPW}) {
    LossConfig config;
    config.formulation = f;
    results.push_back(check_model_params(rng, model_instances, config, 14, 7, 1e-4));
  }
  return results;
}

}  // namespace maskedge::gradcheck
