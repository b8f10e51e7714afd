#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "maskedge/grid.hpp"

namespace maskedge {

inline constexpr int kHiddenChannels = 8;

/// Fixed tiny convolutional mask head:
///   conv1: kHiddenChannels 3x3 kernels over 1 input channel, ReLU
///   conv2: kHiddenChannels 3x3 kernels over kHiddenChannels channels, ReLU
///   area-average pooling from image to mask resolution (when they differ)
///   conv3: num_classes 1x1 kernels; the selected class channel goes through
///   a sigmoid and becomes the predicted mask.
struct MaskHead {
  int image_size = 0;
  int mask_size = 0;
  int num_classes = 0;

  std::vector<Grid2D> conv1_w;               // [hidden] 3x3
  std::vector<double> conv1_b;               // [hidden]
  std::vector<std::vector<Grid2D>> conv2_w;  // [hidden][hidden] 3x3
  std::vector<double> conv2_b;               // [hidden]
  std::vector<std::vector<double>> conv3_w;  // [classes][hidden]
  std::vector<double> conv3_b;               // [classes]

  int pool_factor() const { return image_size / mask_size; }
};

/// Per-parameter gradients (and momentum buffers), same layout as MaskHead.
struct ParamGrads {
  std::vector<Grid2D> conv1_w;
  std::vector<double> conv1_b;
  std::vector<std::vector<Grid2D>> conv2_w;
  std::vector<double> conv2_b;
  std::vector<std::vector<double>> conv3_w;
  std::vector<double> conv3_b;
};

/// Intermediate activations retained by forward() for the backward pass.
struct ActivationCache {
  Grid2D image;
  int class_id = 0;
  std::vector<Grid2D> z1, a1, z2, a2, pooled;
  Grid2D pred;
};

/// Xavier-uniform kernels (biases zero), deterministic per seed.
MaskHead init_weights(int image_size, int mask_size, int num_classes,
                      uint64_t seed);

/// Predicted mask (sigmoid of the selected class channel) plus the cache
/// needed by backward(). Throws on class out of range or image size mismatch.
std::pair<Grid2D, ActivationCache> forward(const MaskHead& head,
                                           const Grid2D& image, int class_id);

/// Backpropagates d(loss)/d(pred) to every parameter. Unselected class
/// channels receive zero gradient.
ParamGrads backward(const MaskHead& head, const ActivationCache& cache,
                    const Grid2D& grad_wrt_pred);

ParamGrads make_zero_grads(const MaskHead& head);
void accumulate_grads(ParamGrads& acc, const ParamGrads& g);
void scale_grads(ParamGrads& grads, double factor);

/// SGD with momentum 0.9 and weight decay 1e-4:
///   v <- momentum * v + grad + weight_decay * param
///   param <- param - learning_rate * v
struct OptimizerState {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  ParamGrads velocity;
};

OptimizerState make_optimizer(const MaskHead& head, double learning_rate);
void sgd_step(MaskHead& head, const ParamGrads& grads, OptimizerState& state);

/// Flat named views over all parameter tensors, in a fixed order shared by
/// the optimizer, checkpoints and gradient checks. Biases appear as 1xN.
struct ParamTensorView {
  std::string name;
  int height = 0;
  int width = 0;
  std::span<double> values;
};

std::vector<ParamTensorView> param_tensors(MaskHead& head);
std::vector<ParamTensorView> param_tensors(ParamGrads& grads);
int parameter_count(const MaskHead& head);

/// Plain-text checkpoint: a header carrying seed and step, then one named
/// tensor per parameter with dimensions and row-major values.
void save_checkpoint(const std::string& path, const MaskHead& head,
                     uint64_t seed, int step);
struct Checkpoint {
  MaskHead head;
  uint64_t seed = 0;
  int step = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace maskedge
