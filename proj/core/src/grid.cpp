#include "maskedge/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace maskedge {

namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

bool is_integral(double x) { return std::floor(x) == x && std::isfinite(x); }

}  // namespace

Grid2D::Grid2D(int height, int width, double fill)
    : height_(height), width_(width) {
  require(height > 0 && width > 0, "Grid2D: dimensions must be positive");
  values_.assign(static_cast<size_t>(height) * width, fill);
}

Grid2D Grid2D::from_values(int height, int width, std::vector<double> values) {
  require(height > 0 && width > 0, "Grid2D: dimensions must be positive");
  require(values.size() == static_cast<size_t>(height) * width,
          "Grid2D: values length must equal height * width");
  Grid2D g;
  g.height_ = height;
  g.width_ = width;
  g.values_ = std::move(values);
  return g;
}

bool Grid2D::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Grid2D::sum() const {
  double acc = 0.0;
  for (double v : values_) acc += v;
  return acc;
}

double Grid2D::min() const {
  return *std::min_element(values_.begin(), values_.end());
}

double Grid2D::max() const {
  return *std::max_element(values_.begin(), values_.end());
}

GridStack::GridStack(std::vector<Grid2D> grids) : grids_(std::move(grids)) {
  require(!grids_.empty(), "GridStack: at least one channel required");
  for (const Grid2D& g : grids_) {
    require(g.same_shape(grids_.front()), "GridStack: channel shape mismatch");
  }
}

void GridStack::append(Grid2D grid) {
  if (!grids_.empty()) {
    require(grid.same_shape(grids_.front()), "GridStack: channel shape mismatch");
  }
  grids_.push_back(std::move(grid));
}

bool GridStack::same_shape(const GridStack& other) const {
  return channels() == other.channels() && height() == other.height() &&
         width() == other.width();
}

namespace {

void validate_kernel(const Grid2D& input, const Grid2D& kernel) {
  require(kernel.height() > 0 && kernel.width() > 0, "conv2d: empty kernel");
  require(kernel.height() % 2 == 1 && kernel.width() % 2 == 1,
          "conv2d: kernel dimensions must be odd");
  require(kernel.height() <= input.height() && kernel.width() <= input.width(),
          "conv2d: kernel larger than input");
}

}  // namespace

Grid2D conv2d(const Grid2D& input, const Grid2D& kernel, PaddingMode padding) {
  validate_kernel(input, kernel);
  const int h = input.height(), w = input.width();
  const int kh = kernel.height(), kw = kernel.width();

  if (padding == PaddingMode::kValid) {
    Grid2D out(h - kh + 1, w - kw + 1);
    for (int i = 0; i < out.height(); ++i) {
      for (int j = 0; j < out.width(); ++j) {
        double acc = 0.0;
        for (int u = 0; u < kh; ++u) {
          for (int v = 0; v < kw; ++v) {
            acc += kernel(u, v) * input(i + u, j + v);
          }
        }
        out(i, j) = acc;
      }
    }
    return out;
  }

  const int ph = kh / 2, pw = kw / 2;
  Grid2D out(h, w);
  for (int i = 0; i < h; ++i) {
    const bool row_interior = i >= ph && i + kh - 1 - ph < h;
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      if (row_interior && j >= pw && j + kw - 1 - pw < w) {
        for (int u = 0; u < kh; ++u) {
          for (int v = 0; v < kw; ++v) {
            acc += kernel(u, v) * input(i + u - ph, j + v - pw);
          }
        }
      } else {
        for (int u = 0; u < kh; ++u) {
          const int r = i + u - ph;
          if (r < 0 || r >= h) continue;
          for (int v = 0; v < kw; ++v) {
            const int c = j + v - pw;
            if (c < 0 || c >= w) continue;
            acc += kernel(u, v) * input(r, c);
          }
        }
      }
      out(i, j) = acc;
    }
  }
  return out;
}

Grid2D conv2d_input_grad(const Grid2D& upstream_grad, const Grid2D& kernel,
                         PaddingMode padding, int input_height, int input_width) {
  require(input_height > 0 && input_width > 0,
          "conv2d_input_grad: input dimensions must be positive");
  const int kh = kernel.height(), kw = kernel.width();
  require(kh % 2 == 1 && kw % 2 == 1, "conv2d_input_grad: kernel dimensions must be odd");
  require(kh <= input_height && kw <= input_width,
          "conv2d_input_grad: kernel larger than input");

  const int expect_h =
      padding == PaddingMode::kValid ? input_height - kh + 1 : input_height;
  const int expect_w =
      padding == PaddingMode::kValid ? input_width - kw + 1 : input_width;
  require(upstream_grad.height() == expect_h && upstream_grad.width() == expect_w,
          "conv2d_input_grad: upstream dimensions inconsistent with conv2d output");

  Grid2D grad(input_height, input_width, 0.0);
  const int ph = padding == PaddingMode::kValid ? 0 : kh / 2;
  const int pw = padding == PaddingMode::kValid ? 0 : kw / 2;
  for (int i = 0; i < expect_h; ++i) {
    for (int j = 0; j < expect_w; ++j) {
      const double g = upstream_grad(i, j);
      for (int u = 0; u < kh; ++u) {
        const int r = i + u - ph;
        if (r < 0 || r >= input_height) continue;
        for (int v = 0; v < kw; ++v) {
          const int c = j + v - pw;
          if (c < 0 || c >= input_width) continue;
          grad(r, c) += g * kernel(u, v);
        }
      }
    }
  }
  return grad;
}

namespace {

template <typename F>
Grid2D binary_apply(const Grid2D& a, const Grid2D& b, F f, const char* name) {
  require(a.same_shape(b), std::string(name) + ": dimension mismatch");
  Grid2D out(a.height(), a.width());
  for (int i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

template <typename F>
Grid2D unary_apply(const Grid2D& a, F f) {
  Grid2D out(a.height(), a.width());
  for (int i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

Grid2D add(const Grid2D& a, const Grid2D& b) {
  return binary_apply(a, b, [](double x, double y) { return x + y; }, "add");
}

Grid2D sub(const Grid2D& a, const Grid2D& b) {
  return binary_apply(a, b, [](double x, double y) { return x - y; }, "sub");
}

Grid2D mul(const Grid2D& a, const Grid2D& b) {
  return binary_apply(a, b, [](double x, double y) { return x * y; }, "mul");
}

Grid2D scale(const Grid2D& a, double factor) {
  return unary_apply(a, [factor](double x) { return x * factor; });
}

Grid2D abs(const Grid2D& a) {
  return unary_apply(a, [](double x) { return std::abs(x); });
}

Grid2D pow(const Grid2D& a, double exponent) {
  if (!is_integral(exponent) && a.min() < 0.0) {
    throw std::invalid_argument("pow: non-integer exponent of negative value");
  }
  return unary_apply(a, [exponent](double x) { return std::pow(x, exponent); });
}

Grid2D exp(const Grid2D& a) {
  return unary_apply(a, [](double x) { return std::exp(x); });
}

Grid2D elementwise(ElementwiseOp op, const Grid2D& a, const Grid2D& b) {
  switch (op) {
    case ElementwiseOp::kAdd: return add(a, b);
    case ElementwiseOp::kSub: return sub(a, b);
    case ElementwiseOp::kMul: return mul(a, b);
    default:
      throw std::invalid_argument("elementwise: op does not take two grids");
  }
}

Grid2D elementwise(ElementwiseOp op, const Grid2D& a, double scalar) {
  switch (op) {
    case ElementwiseOp::kScale: return scale(a, scalar);
    case ElementwiseOp::kPow: return pow(a, scalar);
    default:
      throw std::invalid_argument("elementwise: op does not take a scalar operand");
  }
}

Grid2D elementwise(ElementwiseOp op, const Grid2D& a) {
  switch (op) {
    case ElementwiseOp::kAbs: return abs(a);
    case ElementwiseOp::kExp: return exp(a);
    default:
      throw std::invalid_argument("elementwise: op requires a second operand");
  }
}

double dot(const Grid2D& a, const Grid2D& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("dot: dimension mismatch");
  double acc = 0.0;
  for (int i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace maskedge
