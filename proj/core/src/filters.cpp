#include "maskedge/filters.hpp"

#include <stdexcept>

namespace maskedge {

namespace {

Kernel make_kernel(std::string name, std::vector<double> coefficients) {
  return Kernel{std::move(name), Grid2D::from_values(3, 3, std::move(coefficients))};
}

}  // namespace

Kernel sobel_x() {
  return make_kernel("sobel_x", {1, 0, -1, 2, 0, -2, 1, 0, -1});
}

Kernel sobel_y() {
  return make_kernel("sobel_y", {1, 2, 1, 0, 0, 0, -1, -2, -1});
}

Kernel prewitt_x() {
  return make_kernel("prewitt_x", {1, 0, -1, 1, 0, -1, 1, 0, -1});
}

Kernel prewitt_y() {
  return make_kernel("prewitt_y", {1, 1, 1, 0, 0, 0, -1, -1, -1});
}

Kernel kayyali_se() {
  return make_kernel("kayyali_se", {6, 0, -6, 0, 0, 0, -6, 0, 6});
}

Kernel kayyali_ne() {
  return make_kernel("kayyali_ne", {-6, 0, 6, 0, 0, 0, 6, 0, -6});
}

Kernel roberts_main() {
  return make_kernel("roberts_main", {1, 0, 0, 0, -1, 0, 0, 0, 0});
}

Kernel roberts_anti() {
  return make_kernel("roberts_anti", {0, 1, 0, -1, 0, 0, 0, 0, 0});
}

Kernel laplace8() {
  return make_kernel("laplace8", {1, 1, 1, 1, -8, 1, 1, 1, 1});
}

Kernel laplace4() {
  return make_kernel("laplace4", {0, 1, 0, 1, -4, 1, 0, 1, 0});
}

Kernel gaussian_kernel_3x3() {
  return make_kernel("gaussian3x3", {1.0 / 16, 2.0 / 16, 1.0 / 16, 2.0 / 16,
                                     4.0 / 16, 2.0 / 16, 1.0 / 16, 2.0 / 16,
                                     1.0 / 16});
}

std::string to_string(FilterSetName name) {
  switch (name) {
    case FilterSetName::kSobel: return "Sobel";
    case FilterSetName::kPrewitt: return "Prewitt";
    case FilterSetName::kKayyali: return "Kayyali";
    case FilterSetName::kRoberts: return "Roberts";
    case FilterSetName::kLaplace: return "Laplace";
    case FilterSetName::kSobelAndLaplace: return "SobelAndLaplace";
    case FilterSetName::kLaplace4: return "Laplace4";
  }
  throw std::invalid_argument("to_string: unknown filter set");
}

FilterSetName parse_filter_set_name(std::string_view text) {
  if (text == "Sobel") return FilterSetName::kSobel;
  if (text == "Prewitt") return FilterSetName::kPrewitt;
  if (text == "Kayyali") return FilterSetName::kKayyali;
  if (text == "Roberts") return FilterSetName::kRoberts;
  if (text == "Laplace") return FilterSetName::kLaplace;
  if (text == "SobelAndLaplace") return FilterSetName::kSobelAndLaplace;
  if (text == "Laplace4") return FilterSetName::kLaplace4;
  throw std::invalid_argument("unknown filter set name: " + std::string(text));
}

FilterSet get_filter_set(FilterSetName name) {
  switch (name) {
    case FilterSetName::kSobel:
      return {name, {sobel_x(), sobel_y()}};
    case FilterSetName::kPrewitt:
      return {name, {prewitt_x(), prewitt_y()}};
    case FilterSetName::kKayyali:
      return {name, {kayyali_se(), kayyali_ne()}};
    case FilterSetName::kRoberts:
      return {name, {roberts_main(), roberts_anti()}};
    case FilterSetName::kLaplace:
      return {name, {laplace8()}};
    case FilterSetName::kSobelAndLaplace:
      return {name, {sobel_x(), sobel_y(), laplace8()}};
    case FilterSetName::kLaplace4:
      return {name, {laplace4()}};
  }
  throw std::invalid_argument("get_filter_set: unknown filter set");
}

FilterSet get_filter_set(std::string_view name) {
  return get_filter_set(parse_filter_set_name(name));
}

const std::vector<FilterSetName>& sweep_filter_sets() {
  static const std::vector<FilterSetName> sets = {
      FilterSetName::kSobel,   FilterSetName::kPrewitt,
      FilterSetName::kKayyali, FilterSetName::kRoberts,
      FilterSetName::kLaplace, FilterSetName::kSobelAndLaplace,
  };
  return sets;
}

}  // namespace maskedge
