#pragma once

#include <string>
#include <string_view>
#include <utility>

#include "maskedge/filters.hpp"
#include "maskedge/grid.hpp"

namespace maskedge {

/// How the edge term enters the total mask loss.
///   kStandard     - L_Mask + alpha * L_Edge
///   kProductPW    - edge term is the pixel mean of (pixelwise cross entropy)
///                   * (pixelwise edge loss)
///   kExpProductPW - pixel mean of (pixelwise cross entropy)
///                   * exp(pixelwise edge loss / 4)
enum class Formulation { kStandard, kProductPW, kExpProductPW };

std::string to_string(Formulation formulation);
Formulation parse_formulation(std::string_view text);

/// Full specification of one edge-agreement loss variant.
struct LossConfig {
  FilterSetName filter_set = FilterSetName::kSobel;
  int p = 2;
  double alpha = 1.0;
  bool smooth_gt = false;
  bool smooth_pred = false;
  Formulation formulation = Formulation::kStandard;
  bool include_magnitude = false;

  /// Throws std::invalid_argument on p < 1 or alpha < 0.
  void validate() const;
};

struct LossResult {
  double value = 0.0;
  Grid2D grad_wrt_pred;
};

struct LpLossResult {
  double value = 0.0;
  GridStack grad_wrt_y;
};

/// Mean over all N = H*W*D elements of |y - y_hat|^p (the p-th power of the
/// generalized power mean of the absolute difference), with its gradient
/// with respect to y. The gradient element is (p/N)*|d|^(p-1)*sign(d) and is
/// 0 where d = 0, including the p = 1 subgradient.
LpLossResult lp_loss(const GridStack& y, const GridStack& y_hat, int p);

/// Responses of `mask` under every kernel of `set` (zero padding, same
/// dimensions). When `include_magnitude` is set and the set has at least two
/// channels, the per-pixel Euclidean magnitude across channels is appended.
GridStack filter_responses(const Grid2D& mask, const FilterSet& set,
                           bool include_magnitude);

/// The edge agreement term: L^p distance between the edge-filter responses of
/// the predicted and ground-truth masks, scaled by alpha, with the analytic
/// gradient with respect to the prediction. No gradient flows into the
/// ground truth. Requires pred values in [0,1] and a binary ground truth.
LossResult edge_agreement_loss(const Grid2D& pred_mask, const Grid2D& gt_mask,
                               const LossConfig& config);

/// Pixel-wise binary cross entropy, predictions clamped to [eps, 1-eps] with
/// eps = 1e-7.
LossResult mask_bce_loss(const Grid2D& pred_mask, const Grid2D& gt_mask);

struct CombinedLossResult {
  double value = 0.0;
  Grid2D grad_wrt_pred;
  /// Cross-entropy term, before any edge contribution.
  double mask_value = 0.0;
  /// Edge term before the alpha scaling; exactly 0 when alpha = 0.
  double edge_value_raw = 0.0;
};

/// Total mask-branch loss for the configured formulation. For kStandard this
/// is mask_bce_loss + alpha * (unscaled edge term); for the PW variants the
/// edge term is the pixelwise product described on Formulation. alpha = 0
/// reduces to the bare cross entropy exactly (edge path skipped).
CombinedLossResult combined_mask_loss(const Grid2D& pred_mask,
                                      const Grid2D& gt_mask,
                                      const LossConfig& config);

/// 3x3 Gaussian smoothing, zero padded; preserves [0,1] range.
Grid2D smooth_mask(const Grid2D& mask);

}  // namespace maskedge
