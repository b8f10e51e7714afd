#include "maskedge/synthdata.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "internal/format.hpp"
#include "maskedge/rng.hpp"

namespace maskedge {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kForeground = 0.75;
constexpr double kBackground = 0.25;
constexpr int kSupersample = 2;
constexpr double kMinAreaFraction = 0.04;
constexpr double kMaxAreaFraction = 0.90;
constexpr int kMaxAttempts = 64;

struct ShapeParams {
  int class_id = 0;       // 0 ellipse, 1 rectangle, 2 triangle
  double cx = 0.5, cy = 0.5;
  double extent_a = 0.2;  // semi-axis / half-extent / circumradius
  double extent_b = 0.2;
  double rotation = 0.0;
};

ShapeParams draw_shape(Rng& rng) {
  ShapeParams s;
  s.class_id = rng.uniform_int(kNumShapeClasses);
  s.cx = rng.uniform(0.3, 0.7);
  s.cy = rng.uniform(0.3, 0.7);
  s.rotation = rng.uniform(0.0, kPi);
  if (s.class_id == 2) {
    s.extent_a = s.extent_b = rng.uniform(0.20, 0.42);
  } else {
    s.extent_a = rng.uniform(0.13, 0.35);
    s.extent_b = rng.uniform(0.13, 0.35);
  }
  return s;
}

bool inside_shape(const ShapeParams& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  switch (s.class_id) {
    case 0: {  // ellipse
      const double u = dx * std::cos(s.rotation) + dy * std::sin(s.rotation);
      const double v = -dx * std::sin(s.rotation) + dy * std::cos(s.rotation);
      const double ua = u / s.extent_a, vb = v / s.extent_b;
      return ua * ua + vb * vb <= 1.0;
    }
    case 1: {  // rectangle
      const double u = dx * std::cos(s.rotation) + dy * std::sin(s.rotation);
      const double v = -dx * std::sin(s.rotation) + dy * std::cos(s.rotation);
      return std::abs(u) <= s.extent_a && std::abs(v) <= s.extent_b;
    }
    default: {  // equilateral triangle with circumradius extent_a
      double vx[3], vy[3];
      for (int k = 0; k < 3; ++k) {
        const double angle = s.rotation + 2.0 * kPi * k / 3.0;
        vx[k] = s.cx + s.extent_a * std::cos(angle);
        vy[k] = s.cy + s.extent_a * std::sin(angle);
      }
      bool has_pos = false, has_neg = false;
      for (int k = 0; k < 3; ++k) {
        const int k2 = (k + 1) % 3;
        const double cross = (vx[k2] - vx[k]) * (y - vy[k]) -
                             (vy[k2] - vy[k]) * (x - vx[k]);
        if (cross > 0) has_pos = true;
        if (cross < 0) has_neg = true;
      }
      return !(has_pos && has_neg);
    }
  }
}

// Coverage fraction per image pixel via a kSupersample^2 subgrid.
Grid2D rasterize_coverage(const ShapeParams& shape, int image_size) {
  Grid2D coverage(image_size, image_size);
  const double inv_size = 1.0 / image_size;
  const double inv_ss = 1.0 / kSupersample;
  for (int r = 0; r < image_size; ++r) {
    for (int c = 0; c < image_size; ++c) {
      int hits = 0;
      for (int sr = 0; sr < kSupersample; ++sr) {
        for (int sc = 0; sc < kSupersample; ++sc) {
          const double x = (c + (sc + 0.5) * inv_ss) * inv_size;
          const double y = (r + (sr + 0.5) * inv_ss) * inv_size;
          if (inside_shape(shape, x, y)) ++hits;
        }
      }
      coverage(r, c) = static_cast<double>(hits) / (kSupersample * kSupersample);
    }
  }
  return coverage;
}

// Area-average to mask resolution, then threshold at 0.5 (>= counts as
// foreground).
Grid2D downsample_to_mask(const Grid2D& coverage, int mask_size) {
  const int factor = coverage.height() / mask_size;
  const double inv_block = 1.0 / (factor * factor);
  Grid2D mask(mask_size, mask_size);
  for (int r = 0; r < mask_size; ++r) {
    for (int c = 0; c < mask_size; ++c) {
      double acc = 0.0;
      for (int u = 0; u < factor; ++u) {
        for (int v = 0; v < factor; ++v) {
          acc += coverage(r * factor + u, c * factor + v);
        }
      }
      mask(r, c) = acc * inv_block >= 0.5 ? 1.0 : 0.0;
    }
  }
  return mask;
}

}  // namespace

void DatasetSpec::validate() const {
  if (n_train < 1 || n_eval < 1) {
    throw std::invalid_argument("DatasetSpec: n_train and n_eval must be positive");
  }
  if (mask_size != 28 && mask_size != 56) {
    throw std::invalid_argument("DatasetSpec: mask_size must be 28 or 56");
  }
  const int img = effective_image_size();
  if (img < mask_size || img % mask_size != 0) {
    throw std::invalid_argument(
        "DatasetSpec: image_size must be a positive multiple of mask_size");
  }
  if (!(noise_std >= 0.0)) {
    throw std::invalid_argument("DatasetSpec: noise_std must be >= 0");
  }
}

Sample generate_sample(const DatasetSpec& spec, int index) {
  spec.validate();
  if (index < 0 || index >= spec.n_train + spec.n_eval) {
    throw std::invalid_argument("generate_sample: index out of range");
  }
  const int image_size = spec.effective_image_size();

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(mix64(mix64(spec.seed, static_cast<uint64_t>(index)),
                  static_cast<uint64_t>(attempt)));
    const ShapeParams shape = draw_shape(rng);
    const Grid2D coverage = rasterize_coverage(shape, image_size);
    Grid2D mask = downsample_to_mask(coverage, spec.mask_size);

    const double area_fraction = mask.sum() / mask.size();
    if (area_fraction < kMinAreaFraction || area_fraction > kMaxAreaFraction) {
      continue;
    }

    Grid2D image(image_size, image_size);
    for (int i = 0; i < image.size(); ++i) {
      image[i] = kBackground + (kForeground - kBackground) * coverage[i];
    }
    if (spec.noise_std > 0.0) {
      for (int i = 0; i < image.size(); ++i) {
        const double v = image[i] + spec.noise_std * rng.normal();
        image[i] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
      }
    }
    return Sample{std::move(image), shape.class_id, std::move(mask), index};
  }
  throw std::runtime_error("generate_sample: no admissible shape after max attempts");
}

std::pair<std::vector<Sample>, std::vector<Sample>> generate_dataset(
    const DatasetSpec& spec) {
  spec.validate();
  std::vector<Sample> train, eval;
  train.reserve(spec.n_train);
  eval.reserve(spec.n_eval);
  for (int i = 0; i < spec.n_train; ++i) train.push_back(generate_sample(spec, i));
  for (int i = 0; i < spec.n_eval; ++i) {
    eval.push_back(generate_sample(spec, spec.n_train + i));
  }
  return {std::move(train), std::move(eval)};
}

void save_dataset(const std::string& path, const std::vector<Sample>& samples,
                  const DatasetSpec& spec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  out << "maskedge-dataset 1 " << samples.size() << ' '
      << spec.effective_image_size() << ' ' << spec.mask_size << ' ' << spec.seed
      << '\n';
  for (const Sample& s : samples) {
    out << s.sample_id << ' ' << s.class_id << ' ' << s.image.height() << ' '
        << s.image.width() << '\n';
    for (int r = 0; r < s.image.height(); ++r) {
      for (int c = 0; c < s.image.width(); ++c) {
        out << (c ? " " : "") << internal::format_double(s.image(r, c));
      }
      out << '\n';
    }
    for (int r = 0; r < s.gt_mask.height(); ++r) {
      for (int c = 0; c < s.gt_mask.width(); ++c) {
        out << (c ? " " : "") << internal::format_double(s.gt_mask(r, c));
      }
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("save_dataset: write failure on " + path);
}

std::vector<Sample> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
  std::string magic;
  int version = 0;
  size_t count = 0;
  int image_size = 0, mask_size = 0;
  uint64_t seed = 0;
  in >> magic >> version >> count >> image_size >> mask_size >> seed;
  if (!in || magic != "maskedge-dataset" || version != 1) {
    throw std::runtime_error("load_dataset: bad file header in " + path);
  }
  std::vector<Sample> samples;
  samples.reserve(count);
  for (size_t k = 0; k < count; ++k) {
    Sample s;
    int h = 0, w = 0;
    in >> s.sample_id >> s.class_id >> h >> w;
    if (!in || h != image_size || w != image_size) {
      throw std::runtime_error("load_dataset: bad record header in " + path);
    }
    std::vector<double> image(static_cast<size_t>(h) * w);
    for (double& v : image) in >> v;
    std::vector<double> mask(static_cast<size_t>(mask_size) * mask_size);
    for (double& v : mask) in >> v;
    if (!in) throw std::runtime_error("load_dataset: truncated record in " + path);
    s.image = Grid2D::from_values(h, w, std::move(image));
    s.gt_mask = Grid2D::from_values(mask_size, mask_size, std::move(mask));
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace maskedge
