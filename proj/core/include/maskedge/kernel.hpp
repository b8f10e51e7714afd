#pragma once

#include <string>
#include <utility>

#include "maskedge/grid.hpp"

namespace maskedge {

/// Named fixed-coefficient convolution kernel.
struct Kernel {
  std::string name;
  Grid2D weights;

  int height() const { return weights.height(); }
  int width() const { return weights.width(); }
  double coefficient_sum() const { return weights.sum(); }
};

inline Grid2D conv2d(const Grid2D& input, const Kernel& kernel, PaddingMode padding) {
  return conv2d(input, kernel.weights, padding);
}

inline Grid2D conv2d_input_grad(const Grid2D& upstream_grad, const Kernel& kernel,
                                PaddingMode padding, int input_height, int input_width) {
  return conv2d_input_grad(upstream_grad, kernel.weights, padding, input_height,
                           input_width);
}

}  // namespace maskedge
