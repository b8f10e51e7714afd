#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace maskedge {

/// Boundary handling for convolution.
///   kZero  - zero padding, output has the input's dimensions
///   kValid - no padding, output shrinks to (H-kh+1) x (W-kw+1)
enum class PaddingMode { kZero, kValid };

/// Dense 2D array of doubles in row-major order. The universal carrier for
/// masks, images, filter responses and gradients. All library arithmetic is
/// done at double precision with accumulation in natural loop order, so
/// results are bit-reproducible for identical inputs.
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(int height, int width, double fill = 0.0);

  /// Takes ownership of `values`; throws if length != height * width.
  static Grid2D from_values(int height, int width, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }
  int size() const { return height_ * width_; }

  double operator()(int row, int col) const { return values_[static_cast<size_t>(row) * width_ + col]; }
  double& operator()(int row, int col) { return values_[static_cast<size_t>(row) * width_ + col]; }

  double operator[](int i) const { return values_[i]; }
  double& operator[](int i) { return values_[i]; }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool same_shape(const Grid2D& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool all_finite() const;

  double sum() const;
  double min() const;
  double max() const;

  bool operator==(const Grid2D& other) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

/// Channel stack of equally sized grids (the D filter-response channels).
class GridStack {
 public:
  GridStack() = default;
  /// Throws if the grids are empty or differ in shape.
  explicit GridStack(std::vector<Grid2D> grids);

  int channels() const { return static_cast<int>(grids_.size()); }
  int height() const { return grids_.empty() ? 0 : grids_.front().height(); }
  int width() const { return grids_.empty() ? 0 : grids_.front().width(); }
  int elements() const { return channels() * height() * width(); }

  const Grid2D& channel(int d) const { return grids_[d]; }
  Grid2D& channel(int d) { return grids_[d]; }

  /// Appends a grid; throws on shape mismatch with existing channels.
  void append(Grid2D grid);

  bool same_shape(const GridStack& other) const;
  bool operator==(const GridStack& other) const = default;

 private:
  std::vector<Grid2D> grids_;
};

/// Cross-correlation (no kernel flip) of `input` with `kernel`. This is the
/// fixed library-wide convolution convention. Kernel dimensions must be odd
/// and no larger than the input.
Grid2D conv2d(const Grid2D& input, const Grid2D& kernel, PaddingMode padding);

/// Adjoint of conv2d: maps d(scalar)/d(output) to d(scalar)/d(input) for the
/// same kernel and padding. Upstream dimensions must match what conv2d would
/// produce for an input of (input_height, input_width).
Grid2D conv2d_input_grad(const Grid2D& upstream_grad, const Grid2D& kernel,
                         PaddingMode padding, int input_height, int input_width);

enum class ElementwiseOp { kAdd, kSub, kMul, kScale, kAbs, kPow, kExp };

Grid2D elementwise(ElementwiseOp op, const Grid2D& a, const Grid2D& b);
Grid2D elementwise(ElementwiseOp op, const Grid2D& a, double scalar);
Grid2D elementwise(ElementwiseOp op, const Grid2D& a);

Grid2D add(const Grid2D& a, const Grid2D& b);
Grid2D sub(const Grid2D& a, const Grid2D& b);
Grid2D mul(const Grid2D& a, const Grid2D& b);
Grid2D scale(const Grid2D& a, double factor);
Grid2D abs(const Grid2D& a);
/// Pointwise power. Negative bases are rejected unless `exponent` is integral.
Grid2D pow(const Grid2D& a, double exponent);
Grid2D exp(const Grid2D& a);

double dot(const Grid2D& a, const Grid2D& b);

}  // namespace maskedge
