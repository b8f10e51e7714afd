#pragma once

#include <functional>
#include <string>
#include <vector>

#include "maskedge/grid.hpp"
#include "maskedge/loss.hpp"
#include "maskedge/rng.hpp"

namespace maskedge::gradcheck {

inline constexpr double kFdStep = 1e-5;

struct CheckStats {
  std::string label;
  long checked = 0;
  long failed = 0;
  double max_rel_err = 0.0;

  bool passed() const { return failed == 0 && checked > 0; }
};

/// Central finite differences of a scalar function of one grid, compared
/// elementwise against an analytic gradient. Elements where `skip` returns
/// true are not checked (used for the p = 1 kink exclusions). An element
/// passes when max(|analytic|, |fd|) <= abs_tol, otherwise when the relative
/// difference is within rel_tol.
CheckStats check_grid_gradient(
    const std::function<double(const Grid2D&)>& f, const Grid2D& x0,
    const Grid2D& analytic, double rel_tol, double abs_tol = 1e-9,
    const std::function<bool(int index)>& skip = {});

/// Random uniform grid in [lo, hi].
Grid2D random_grid(Rng& rng, int height, int width, double lo, double hi);
/// Random strictly binary grid (threshold on uniforms).
Grid2D random_binary_grid(Rng& rng, int height, int width);

CheckStats check_lp_loss(Rng& rng, int instances, int p, double rel_tol);
CheckStats check_mask_bce(Rng& rng, int instances, double rel_tol);
CheckStats check_edge_loss(Rng& rng, int instances, const LossConfig& config,
                           double rel_tol, int grid_size = 12);
CheckStats check_combined_loss(Rng& rng, int instances, const LossConfig& config,
                               double rel_tol, int grid_size = 12);
/// Central differences on every model parameter through
/// combined_mask_loss(forward(...)).
CheckStats check_model_params(Rng& rng, int instances, const LossConfig& config,
                              int image_size, int mask_size, double rel_tol);

/// The full battery: lp_loss for p in {1,2,3,4}, mask_bce_loss, the edge
/// loss over all six filter sets x smoothing on/off x magnitude on/off, the
/// combined loss for the three formulations, and model parameter checks for
/// the three formulations.
std::vector<CheckStats> run_battery(uint64_t seed, int instances,
                                    int model_instances);

}  // namespace maskedge::gradcheck
