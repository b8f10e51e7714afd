#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "maskedge/kernel.hpp"

namespace maskedge {

/// The fixed edge-detection filter banks. Every bank kernel is 3x3 with
/// integer coefficients summing to zero: the 2x2 Roberts pair is zero-padded
/// into the top-left of a 3x3 so all kernels share one shape.
enum class FilterSetName {
  kSobel,
  kPrewitt,
  kKayyali,
  kRoberts,
  kLaplace,
  kSobelAndLaplace,
  kLaplace4,
};

std::string to_string(FilterSetName name);
FilterSetName parse_filter_set_name(std::string_view text);

struct FilterSet {
  FilterSetName name;
  std::vector<Kernel> kernels;

  int channels() const { return static_cast<int>(kernels.size()); }
};

/// Returns the named bank. Channel counts: Sobel/Prewitt/Kayyali/Roberts 2,
/// Laplace/Laplace4 1, SobelAndLaplace 3 (Sobel channels then Laplace).
FilterSet get_filter_set(FilterSetName name);
FilterSet get_filter_set(std::string_view name);

/// The six banks swept in the filter ablation (Laplace4 is kept in the bank
/// for completeness but is not part of any default sweep).
const std::vector<FilterSetName>& sweep_filter_sets();

Kernel sobel_x();
Kernel sobel_y();
Kernel prewitt_x();
Kernel prewitt_y();
Kernel kayyali_se();
Kernel kayyali_ne();
Kernel roberts_main();
Kernel roberts_anti();
Kernel laplace8();
Kernel laplace4();

/// Approximate 3x3 Gaussian [[1,2,1],[2,4,2],[1,2,1]]/16; coefficients sum to 1.
Kernel gaussian_kernel_3x3();

}  // namespace maskedge
