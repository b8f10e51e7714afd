#include "maskedge/loss.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace maskedge {

namespace {

constexpr double kBceEps = 1e-7;

void require(bool condition, const char* message) {
  if (!condition) throw std::invalid_argument(message);
}

void require_same_shape(const Grid2D& a, const Grid2D& b, const char* message) {
  require(a.same_shape(b), message);
}

void require_unit_range(const Grid2D& g, const char* message) {
  for (double v : g.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(message);
  }
}

void require_binary(const Grid2D& g, const char* message) {
  for (double v : g.values()) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument(message);
  }
}

// |d|^p for small integer p, in fixed expression form.
double abs_pow(double d, int p) {
  switch (p) {
    case 1: return std::abs(d);
    case 2: return d * d;
    case 3: return std::abs(d) * d * d;
    case 4: return (d * d) * (d * d);
    default: return std::pow(std::abs(d), p);
  }
}

// |d|^(p-1) * sign(d), with the subgradient choice of 0 at d = 0.
double abs_pow_grad(double d, int p) {
  if (d == 0.0) return 0.0;
  switch (p) {
    case 1: return d > 0.0 ? 1.0 : -1.0;
    case 2: return d;
    case 3: return d * std::abs(d);
    case 4: return d * d * d;
    default: return std::pow(std::abs(d), p - 1) * (d > 0.0 ? 1.0 : -1.0);
  }
}

double clamp_pred(double y) {
  if (y < kBceEps) return kBceEps;
  if (y > 1.0 - kBceEps) return 1.0 - kBceEps;
  return y;
}

struct ResponsePair {
  FilterSet set;
  bool magnitude_used = false;
  GridStack pred_resp;
  GridStack gt_resp;
};

ResponsePair compute_responses(const Grid2D& pred_in, const Grid2D& gt_in,
                               const LossConfig& config) {
  ResponsePair rp;
  rp.set = get_filter_set(config.filter_set);
  rp.magnitude_used = config.include_magnitude && rp.set.channels() >= 2;
  rp.pred_resp = filter_responses(pred_in, rp.set, config.include_magnitude);
  rp.gt_resp = filter_responses(gt_in, rp.set, config.include_magnitude);
  return rp;
}

// Chains per-channel response gradients back to the (unsmoothed) prediction:
// folds the magnitude channel into the base channels, applies the adjoint of
// each edge kernel, then the adjoint of the smoothing kernel if the
// prediction was smoothed.
Grid2D backprop_responses(std::vector<Grid2D>& channel_grads,
                          const ResponsePair& rp, const LossConfig& config,
                          int height, int width) {
  const int base = rp.set.channels();
  if (rp.magnitude_used) {
    const Grid2D& magnitude = rp.pred_resp.channel(base);
    const Grid2D& gmag = channel_grads[base];
    for (int d = 0; d < base; ++d) {
      Grid2D& gd = channel_grads[d];
      const Grid2D& rd = rp.pred_resp.channel(d);
      for (int i = 0; i < gd.size(); ++i) {
        if (magnitude[i] > 0.0) gd[i] += gmag[i] * rd[i] / magnitude[i];
      }
    }
  }
  Grid2D dpred(height, width, 0.0);
  for (int d = 0; d < base; ++d) {
    const Grid2D g = conv2d_input_grad(channel_grads[d], rp.set.kernels[d],
                                       PaddingMode::kZero, height, width);
    for (int i = 0; i < dpred.size(); ++i) dpred[i] += g[i];
  }
  if (config.smooth_pred) {
    return conv2d_input_grad(dpred, gaussian_kernel_3x3(), PaddingMode::kZero,
                             height, width);
  }
  return dpred;
}

// Unscaled standard edge term (value and gradient before the alpha factor).
LossResult edge_term_unscaled(const Grid2D& pred_mask, const Grid2D& gt_mask,
                              const LossConfig& config) {
  const int h = pred_mask.height(), w = pred_mask.width();
  const Grid2D pred_in = config.smooth_pred ? smooth_mask(pred_mask) : pred_mask;
  const Grid2D gt_in = config.smooth_gt ? smooth_mask(gt_mask) : gt_mask;
  ResponsePair rp = compute_responses(pred_in, gt_in, config);

  const LpLossResult lp = lp_loss(rp.pred_resp, rp.gt_resp, config.p);
  std::vector<Grid2D> channel_grads;
  channel_grads.reserve(lp.grad_wrt_y.channels());
  for (int d = 0; d < lp.grad_wrt_y.channels(); ++d) {
    channel_grads.push_back(lp.grad_wrt_y.channel(d));
  }
  return {lp.value, backprop_responses(channel_grads, rp, config, h, w)};
}

void validate_edge_inputs(const Grid2D& pred_mask, const Grid2D& gt_mask) {
  require_same_shape(pred_mask, gt_mask, "edge_agreement_loss: dimension mismatch");
  require_unit_range(pred_mask, "edge_agreement_loss: pred values outside [0,1]");
  require_binary(gt_mask, "edge_agreement_loss: ground truth must be binary");
}

}  // namespace

void LossConfig::validate() const {
  if (p < 1) throw std::invalid_argument("LossConfig: p must be >= 1");
  if (!(alpha >= 0.0)) throw std::invalid_argument("LossConfig: alpha must be >= 0");
}

std::string to_string(Formulation formulation) {
  switch (formulation) {
    case Formulation::kStandard: return "Standard";
    case Formulation::kProductPW: return "ProductPW";
    case Formulation::kExpProductPW: return "ExpProductPW";
  }
  throw std::invalid_argument("to_string: unknown formulation");
}

Formulation parse_formulation(std::string_view text) {
  if (text == "Standard") return Formulation::kStandard;
  if (text == "ProductPW") return Formulation::kProductPW;
  if (text == "ExpProductPW") return Formulation::kExpProductPW;
  throw std::invalid_argument("unknown formulation: " + std::string(text));
}

LpLossResult lp_loss(const GridStack& y, const GridStack& y_hat, int p) {
  if (!y.same_shape(y_hat)) {
    throw std::invalid_argument("lp_loss: dimension mismatch");
  }
  if (p < 1) throw std::invalid_argument("lp_loss: p must be >= 1");

  const int n = y.elements();
  const double inv_n = 1.0 / n;
  double value = 0.0;
  std::vector<Grid2D> grads;
  grads.reserve(y.channels());
  for (int d = 0; d < y.channels(); ++d) {
    const Grid2D& yd = y.channel(d);
    const Grid2D& td = y_hat.channel(d);
    Grid2D gd(y.height(), y.width());
    for (int i = 0; i < yd.size(); ++i) {
      const double diff = yd[i] - td[i];
      value += abs_pow(diff, p);
      gd[i] = p * inv_n * abs_pow_grad(diff, p);
    }
    grads.push_back(std::move(gd));
  }
  return {value * inv_n, GridStack(std::move(grads))};
}

GridStack filter_responses(const Grid2D& mask, const FilterSet& set,
                           bool include_magnitude) {
  std::vector<Grid2D> responses;
  responses.reserve(set.kernels.size() + 1);
  for (const Kernel& k : set.kernels) {
    responses.push_back(conv2d(mask, k, PaddingMode::kZero));
  }
  if (include_magnitude && set.channels() >= 2) {
    Grid2D magnitude(mask.height(), mask.width());
    for (int i = 0; i < magnitude.size(); ++i) {
      double acc = 0.0;
      for (const Grid2D& r : responses) acc += r[i] * r[i];
      magnitude[i] = std::sqrt(acc);
    }
    responses.push_back(std::move(magnitude));
  }
  return GridStack(std::move(responses));
}

LossResult edge_agreement_loss(const Grid2D& pred_mask, const Grid2D& gt_mask,
                               const LossConfig& config) {
  config.validate();
  validate_edge_inputs(pred_mask, gt_mask);
  if (config.alpha == 0.0) {
    return {0.0, Grid2D(pred_mask.height(), pred_mask.width(), 0.0)};
  }
  LossResult term = edge_term_unscaled(pred_mask, gt_mask, config);
  term.value *= config.alpha;
  for (double& g : term.grad_wrt_pred.values()) g *= config.alpha;
  return term;
}

LossResult mask_bce_loss(const Grid2D& pred_mask, const Grid2D& gt_mask) {
  require_same_shape(pred_mask, gt_mask, "mask_bce_loss: dimension mismatch");
  require_unit_range(pred_mask, "mask_bce_loss: pred values outside [0,1]");
  require_binary(gt_mask, "mask_bce_loss: ground truth must be binary");

  const int n = pred_mask.size();
  const double inv_n = 1.0 / n;
  double value = 0.0;
  Grid2D grad(pred_mask.height(), pred_mask.width());
  for (int i = 0; i < n; ++i) {
    const double yc = clamp_pred(pred_mask[i]);
    const double t = gt_mask[i];
    value -= t * std::log(yc) + (1.0 - t) * std::log(1.0 - yc);
    grad[i] = inv_n * (yc - t) / (yc * (1.0 - yc));
  }
  return {value * inv_n, std::move(grad)};
}

namespace {

// Edge term of the pixelwise product formulations, already divided by the
// pixel count, together with its gradient contribution with respect to the
// raw prediction.
LossResult pw_edge_term(const Grid2D& pred_mask, const Grid2D& gt_mask,
                        const LossConfig& config) {
  const int h = pred_mask.height(), w = pred_mask.width();
  const int npix = h * w;
  const double inv_npix = 1.0 / npix;

  // Unaveraged pixelwise cross entropy and its derivative.
  Grid2D bce_pw(h, w), dbce_pw(h, w);
  for (int i = 0; i < npix; ++i) {
    const double yc = clamp_pred(pred_mask[i]);
    const double t = gt_mask[i];
    bce_pw[i] = -(t * std::log(yc) + (1.0 - t) * std::log(1.0 - yc));
    dbce_pw[i] = (yc - t) / (yc * (1.0 - yc));
  }

  const Grid2D pred_in = config.smooth_pred ? smooth_mask(pred_mask) : pred_mask;
  const Grid2D gt_in = config.smooth_gt ? smooth_mask(gt_mask) : gt_mask;
  ResponsePair rp = compute_responses(pred_in, gt_in, config);
  const int channels = rp.pred_resp.channels();
  const double inv_channels = 1.0 / channels;

  // Pixelwise edge loss: |response diff|^p averaged over channels.
  std::vector<Grid2D> diffs;
  diffs.reserve(channels);
  Grid2D edge_pw(h, w, 0.0);
  for (int d = 0; d < channels; ++d) {
    Grid2D diff = sub(rp.pred_resp.channel(d), rp.gt_resp.channel(d));
    for (int i = 0; i < npix; ++i) edge_pw[i] += abs_pow(diff[i], config.p) * inv_channels;
    diffs.push_back(std::move(diff));
  }

  // Pixel weight applied to the edge side and scale applied to the BCE side.
  Grid2D resp_weight(h, w), bce_scale(h, w);
  double value = 0.0;
  if (config.formulation == Formulation::kProductPW) {
    for (int i = 0; i < npix; ++i) {
      value += bce_pw[i] * edge_pw[i];
      resp_weight[i] = bce_pw[i] * inv_npix;
      bce_scale[i] = edge_pw[i] * inv_npix;
    }
  } else {
    for (int i = 0; i < npix; ++i) {
      const double ex = std::exp(edge_pw[i] / 4.0);
      value += bce_pw[i] * ex;
      resp_weight[i] = bce_pw[i] * ex * 0.25 * inv_npix;
      bce_scale[i] = ex * inv_npix;
    }
  }
  value *= inv_npix;

  std::vector<Grid2D> upstream;
  upstream.reserve(channels);
  for (int d = 0; d < channels; ++d) {
    Grid2D up(h, w);
    for (int i = 0; i < npix; ++i) {
      up[i] = resp_weight[i] * config.p * inv_channels * abs_pow_grad(diffs[d][i], config.p);
    }
    upstream.push_back(std::move(up));
  }
  Grid2D grad = backprop_responses(upstream, rp, config, h, w);
  for (int i = 0; i < npix; ++i) grad[i] += bce_scale[i] * dbce_pw[i];
  return {value, std::move(grad)};
}

}  // namespace

CombinedLossResult combined_mask_loss(const Grid2D& pred_mask,
                                      const Grid2D& gt_mask,
                                      const LossConfig& config) {
  config.validate();
  validate_edge_inputs(pred_mask, gt_mask);
  LossResult bce = mask_bce_loss(pred_mask, gt_mask);

  CombinedLossResult result;
  result.mask_value = bce.value;
  if (config.alpha == 0.0) {
    result.value = bce.value;
    result.grad_wrt_pred = std::move(bce.grad_wrt_pred);
    result.edge_value_raw = 0.0;
    return result;
  }

  const LossResult edge = config.formulation == Formulation::kStandard
                              ? edge_term_unscaled(pred_mask, gt_mask, config)
                              : pw_edge_term(pred_mask, gt_mask, config);
  result.edge_value_raw = edge.value;
  result.value = bce.value + config.alpha * edge.value;
  result.grad_wrt_pred = std::move(bce.grad_wrt_pred);
  for (int i = 0; i < result.grad_wrt_pred.size(); ++i) {
    result.grad_wrt_pred[i] += config.alpha * edge.grad_wrt_pred[i];
  }
  return result;
}

Grid2D smooth_mask(const Grid2D& mask) {
  return conv2d(mask, gaussian_kernel_3x3(), PaddingMode::kZero);
}

}  // namespace maskedge
