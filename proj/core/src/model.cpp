#include "maskedge/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "internal/format.hpp"
#include "maskedge/rng.hpp"

namespace maskedge {

namespace {

void require(bool condition, const char* message) {
  if (!condition) throw std::invalid_argument(message);
}

// out += cross-correlation of in with a 3x3 kernel, zero padded, same size.
void accumulate_conv3x3_same(const Grid2D& in, const Grid2D& kernel, Grid2D& out) {
  const int h = in.height(), w = in.width();
  for (int i = 0; i < h; ++i) {
    const bool row_interior = i >= 1 && i < h - 1;
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      if (row_interior && j >= 1 && j < w - 1) {
        acc = kernel(0, 0) * in(i - 1, j - 1) + kernel(0, 1) * in(i - 1, j) +
              kernel(0, 2) * in(i - 1, j + 1) + kernel(1, 0) * in(i, j - 1) +
              kernel(1, 1) * in(i, j) + kernel(1, 2) * in(i, j + 1) +
              kernel(2, 0) * in(i + 1, j - 1) + kernel(2, 1) * in(i + 1, j) +
              kernel(2, 2) * in(i + 1, j + 1);
      } else {
        for (int u = 0; u < 3; ++u) {
          const int r = i + u - 1;
          if (r < 0 || r >= h) continue;
          for (int v = 0; v < 3; ++v) {
            const int c = j + v - 1;
            if (c < 0 || c >= w) continue;
            acc += kernel(u, v) * in(r, c);
          }
        }
      }
      out(i, j) += acc;
    }
  }
}

// Weight gradient of the same-padded 3x3 cross-correlation:
// dW(u,v) = sum_ij dz(i,j) * in(i+u-1, j+v-1), zero outside.
void accumulate_kernel_grad3x3(const Grid2D& in, const Grid2D& dz, Grid2D& dw) {
  const int h = in.height(), w = in.width();
  for (int u = 0; u < 3; ++u) {
    for (int v = 0; v < 3; ++v) {
      double acc = 0.0;
      const int r0 = std::max(0, 1 - u), r1 = std::min(h, h + 1 - u);
      const int c0 = std::max(0, 1 - v), c1 = std::min(w, w + 1 - v);
      for (int i = r0; i < r1; ++i) {
        for (int j = c0; j < c1; ++j) {
          acc += dz(i, j) * in(i + u - 1, j + v - 1);
        }
      }
      dw(u, v) += acc;
    }
  }
}

// Input gradient of the same-padded 3x3 cross-correlation, accumulated.
void accumulate_input_grad3x3(const Grid2D& dz, const Grid2D& kernel, Grid2D& din) {
  const int h = dz.height(), w = dz.width();
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const double g = dz(i, j);
      for (int u = 0; u < 3; ++u) {
        const int r = i + u - 1;
        if (r < 0 || r >= h) continue;
        for (int v = 0; v < 3; ++v) {
          const int c = j + v - 1;
          if (c < 0 || c >= w) continue;
          din(r, c) += g * kernel(u, v);
        }
      }
    }
  }
}

Grid2D relu(const Grid2D& z) {
  Grid2D a(z.height(), z.width());
  for (int i = 0; i < z.size(); ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
  return a;
}

Grid2D avg_pool(const Grid2D& in, int factor) {
  if (factor == 1) return in;
  const int h = in.height() / factor, w = in.width() / factor;
  const double inv_block = 1.0 / (factor * factor);
  Grid2D out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int u = 0; u < factor; ++u) {
        for (int v = 0; v < factor; ++v) {
          acc += in(r * factor + u, c * factor + v);
        }
      }
      out(r, c) = acc * inv_block;
    }
  }
  return out;
}

Grid2D avg_unpool(const Grid2D& grad, int factor, int out_h, int out_w) {
  if (factor == 1) return grad;
  const double inv_block = 1.0 / (factor * factor);
  Grid2D out(out_h, out_w);
  for (int r = 0; r < grad.height(); ++r) {
    for (int c = 0; c < grad.width(); ++c) {
      const double g = grad(r, c) * inv_block;
      for (int u = 0; u < factor; ++u) {
        for (int v = 0; v < factor; ++v) {
          out(r * factor + u, c * factor + v) = g;
        }
      }
    }
  }
  return out;
}

}  // namespace

MaskHead init_weights(int image_size, int mask_size, int num_classes,
                      uint64_t seed) {
  require(image_size > 0 && mask_size > 0 && num_classes > 0,
          "init_weights: sizes must be positive");
  require(image_size % mask_size == 0,
          "init_weights: image_size must be a multiple of mask_size");

  MaskHead head;
  head.image_size = image_size;
  head.mask_size = mask_size;
  head.num_classes = num_classes;

  Rng rng(seed);
  const auto xavier = [&rng](int fan_in, int fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    return [&rng, a]() { return rng.uniform(-a, a); };
  };

  auto draw1 = xavier(1 * 9, kHiddenChannels * 9);
  head.conv1_w.resize(kHiddenChannels);
  for (Grid2D& k : head.conv1_w) {
    k = Grid2D(3, 3);
    for (int i = 0; i < 9; ++i) k[i] = draw1();
  }
  head.conv1_b.assign(kHiddenChannels, 0.0);

  auto draw2 = xavier(kHiddenChannels * 9, kHiddenChannels * 9);
  head.conv2_w.assign(kHiddenChannels, std::vector<Grid2D>(kHiddenChannels));
  for (auto& row : head.conv2_w) {
    for (Grid2D& k : row) {
      k = Grid2D(3, 3);
      for (int i = 0; i < 9; ++i) k[i] = draw2();
    }
  }
  head.conv2_b.assign(kHiddenChannels, 0.0);

  auto draw3 = xavier(kHiddenChannels, num_classes);
  head.conv3_w.assign(num_classes, std::vector<double>(kHiddenChannels));
  for (auto& row : head.conv3_w) {
    for (double& wv : row) wv = draw3();
  }
  head.conv3_b.assign(num_classes, 0.0);
  return head;
}

std::pair<Grid2D, ActivationCache> forward(const MaskHead& head,
                                           const Grid2D& image, int class_id) {
  require(class_id >= 0 && class_id < head.num_classes,
          "forward: class id out of range");
  require(image.height() == head.image_size && image.width() == head.image_size,
          "forward: image dimensions mismatch");

  ActivationCache cache;
  cache.image = image;
  cache.class_id = class_id;

  cache.z1.reserve(kHiddenChannels);
  cache.a1.reserve(kHiddenChannels);
  for (int oc = 0; oc < kHiddenChannels; ++oc) {
    Grid2D z(head.image_size, head.image_size, head.conv1_b[oc]);
    accumulate_conv3x3_same(image, head.conv1_w[oc], z);
    cache.a1.push_back(relu(z));
    cache.z1.push_back(std::move(z));
  }

  cache.z2.reserve(kHiddenChannels);
  cache.a2.reserve(kHiddenChannels);
  for (int oc = 0; oc < kHiddenChannels; ++oc) {
    Grid2D z(head.image_size, head.image_size, head.conv2_b[oc]);
    for (int ic = 0; ic < kHiddenChannels; ++ic) {
      accumulate_conv3x3_same(cache.a1[ic], head.conv2_w[oc][ic], z);
    }
    cache.a2.push_back(relu(z));
    cache.z2.push_back(std::move(z));
  }

  const int factor = head.pool_factor();
  cache.pooled.reserve(kHiddenChannels);
  for (int ch = 0; ch < kHiddenChannels; ++ch) {
    cache.pooled.push_back(avg_pool(cache.a2[ch], factor));
  }

  Grid2D pred(head.mask_size, head.mask_size);
  for (int i = 0; i < pred.size(); ++i) {
    double z = head.conv3_b[class_id];
    for (int ch = 0; ch < kHiddenChannels; ++ch) {
      z += head.conv3_w[class_id][ch] * cache.pooled[ch][i];
    }
    pred[i] = 1.0 / (1.0 + std::exp(-z));
  }
  cache.pred = pred;
  return {std::move(pred), std::move(cache)};
}

ParamGrads backward(const MaskHead& head, const ActivationCache& cache,
                    const Grid2D& grad_wrt_pred) {
  require(grad_wrt_pred.height() == head.mask_size &&
              grad_wrt_pred.width() == head.mask_size,
          "backward: gradient dimensions mismatch");
  require(static_cast<int>(cache.z1.size()) == kHiddenChannels &&
              cache.image.height() == head.image_size,
          "backward: cache inconsistent with head");

  ParamGrads grads = make_zero_grads(head);
  const int c = cache.class_id;

  // Sigmoid on the selected class channel.
  Grid2D dz3(head.mask_size, head.mask_size);
  for (int i = 0; i < dz3.size(); ++i) {
    dz3[i] = grad_wrt_pred[i] * cache.pred[i] * (1.0 - cache.pred[i]);
  }

  // conv3 (1x1): only the selected class row receives gradient.
  for (int ch = 0; ch < kHiddenChannels; ++ch) {
    grads.conv3_w[c][ch] = dot(dz3, cache.pooled[ch]);
  }
  grads.conv3_b[c] = dz3.sum();

  const int factor = head.pool_factor();
  std::vector<Grid2D> dz2(kHiddenChannels);
  for (int ch = 0; ch < kHiddenChannels; ++ch) {
    Grid2D dpooled(head.mask_size, head.mask_size);
    for (int i = 0; i < dpooled.size(); ++i) {
      dpooled[i] = head.conv3_w[c][ch] * dz3[i];
    }
    Grid2D da2 = avg_unpool(dpooled, factor, head.image_size, head.image_size);
    Grid2D d(head.image_size, head.image_size);
    for (int i = 0; i < d.size(); ++i) {
      d[i] = cache.z2[ch][i] > 0.0 ? da2[i] : 0.0;
    }
    dz2[ch] = std::move(d);
  }

  std::vector<Grid2D> da1(kHiddenChannels,
                          Grid2D(head.image_size, head.image_size, 0.0));
  for (int oc = 0; oc < kHiddenChannels; ++oc) {
    grads.conv2_b[oc] = dz2[oc].sum();
    for (int ic = 0; ic < kHiddenChannels; ++ic) {
      accumulate_kernel_grad3x3(cache.a1[ic], dz2[oc], grads.conv2_w[oc][ic]);
      accumulate_input_grad3x3(dz2[oc], head.conv2_w[oc][ic], da1[ic]);
    }
  }

  for (int oc = 0; oc < kHiddenChannels; ++oc) {
    Grid2D dz1(head.image_size, head.image_size);
    for (int i = 0; i < dz1.size(); ++i) {
      dz1[i] = cache.z1[oc][i] > 0.0 ? da1[oc][i] : 0.0;
    }
    grads.conv1_b[oc] = dz1.sum();
    accumulate_kernel_grad3x3(cache.image, dz1, grads.conv1_w[oc]);
  }
  return grads;
}

ParamGrads make_zero_grads(const MaskHead& head) {
  ParamGrads g;
  g.conv1_w.assign(kHiddenChannels, Grid2D(3, 3, 0.0));
  g.conv1_b.assign(kHiddenChannels, 0.0);
  g.conv2_w.assign(kHiddenChannels,
                   std::vector<Grid2D>(kHiddenChannels, Grid2D(3, 3, 0.0)));
  g.conv2_b.assign(kHiddenChannels, 0.0);
  g.conv3_w.assign(head.num_classes, std::vector<double>(kHiddenChannels, 0.0));
  g.conv3_b.assign(head.num_classes, 0.0);
  return g;
}

namespace {

template <typename Fn>
void zip_params(ParamGrads& a, const ParamGrads& b, Fn fn) {
  for (size_t k = 0; k < a.conv1_w.size(); ++k) {
    for (int i = 0; i < 9; ++i) fn(a.conv1_w[k][i], b.conv1_w[k][i]);
  }
  for (size_t k = 0; k < a.conv1_b.size(); ++k) fn(a.conv1_b[k], b.conv1_b[k]);
  for (size_t o = 0; o < a.conv2_w.size(); ++o) {
    for (size_t i = 0; i < a.conv2_w[o].size(); ++i) {
      for (int j = 0; j < 9; ++j) fn(a.conv2_w[o][i][j], b.conv2_w[o][i][j]);
    }
  }
  for (size_t k = 0; k < a.conv2_b.size(); ++k) fn(a.conv2_b[k], b.conv2_b[k]);
  for (size_t o = 0; o < a.conv3_w.size(); ++o) {
    for (size_t i = 0; i < a.conv3_w[o].size(); ++i) {
      fn(a.conv3_w[o][i], b.conv3_w[o][i]);
    }
  }
  for (size_t k = 0; k < a.conv3_b.size(); ++k) fn(a.conv3_b[k], b.conv3_b[k]);
}

}  // namespace

void accumulate_grads(ParamGrads& acc, const ParamGrads& g) {
  zip_params(acc, g, [](double& a, const double& b) { a += b; });
}

void scale_grads(ParamGrads& grads, double factor) {
  zip_params(grads, grads, [factor](double& a, const double&) { a *= factor; });
}

OptimizerState make_optimizer(const MaskHead& head, double learning_rate) {
  require(learning_rate > 0.0, "make_optimizer: learning rate must be positive");
  OptimizerState state;
  state.learning_rate = learning_rate;
  state.velocity = make_zero_grads(head);
  return state;
}

void sgd_step(MaskHead& head, const ParamGrads& grads, OptimizerState& state) {
  auto params = param_tensors(head);
  ParamGrads grads_copy = grads;  // non-const views over a fixed order
  auto gs = param_tensors(grads_copy);
  auto vs = param_tensors(state.velocity);
  require(params.size() == gs.size() && params.size() == vs.size(),
          "sgd_step: tensor layout mismatch");
  for (size_t t = 0; t < params.size(); ++t) {
    require(params[t].values.size() == gs[t].values.size(),
            "sgd_step: shape mismatch");
    for (size_t i = 0; i < params[t].values.size(); ++i) {
      double& v = vs[t].values[i];
      double& p = params[t].values[i];
      v = state.momentum * v + gs[t].values[i] + state.weight_decay * p;
      p -= state.learning_rate * v;
    }
  }
}

namespace {

template <typename Model>
std::vector<ParamTensorView> tensor_views(Model& m, int num_classes) {
  std::vector<ParamTensorView> views;
  for (int k = 0; k < kHiddenChannels; ++k) {
    views.push_back({"conv1.w." + std::to_string(k), 3, 3,
                     std::span<double>(m.conv1_w[k].values())});
  }
  views.push_back({"conv1.b", 1, kHiddenChannels,
                   std::span<double>(m.conv1_b.data(), m.conv1_b.size())});
  for (int o = 0; o < kHiddenChannels; ++o) {
    for (int i = 0; i < kHiddenChannels; ++i) {
      views.push_back({"conv2.w." + std::to_string(o) + "." + std::to_string(i),
                       3, 3, std::span<double>(m.conv2_w[o][i].values())});
    }
  }
  views.push_back({"conv2.b", 1, kHiddenChannels,
                   std::span<double>(m.conv2_b.data(), m.conv2_b.size())});
  for (int o = 0; o < num_classes; ++o) {
    views.push_back({"conv3.w." + std::to_string(o), 1, kHiddenChannels,
                     std::span<double>(m.conv3_w[o].data(), m.conv3_w[o].size())});
  }
  views.push_back({"conv3.b", 1, num_classes,
                   std::span<double>(m.conv3_b.data(), m.conv3_b.size())});
  return views;
}

}  // namespace

std::vector<ParamTensorView> param_tensors(MaskHead& head) {
  return tensor_views(head, head.num_classes);
}

std::vector<ParamTensorView> param_tensors(ParamGrads& grads) {
  return tensor_views(grads, static_cast<int>(grads.conv3_w.size()));
}

int parameter_count(const MaskHead& head) {
  return kHiddenChannels * 9 + kHiddenChannels +
         kHiddenChannels * kHiddenChannels * 9 + kHiddenChannels +
         head.num_classes * kHiddenChannels + head.num_classes;
}

void save_checkpoint(const std::string& path, const MaskHead& head,
                     uint64_t seed, int step) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << "maskedge-checkpoint 1\n";
  out << "seed " << seed << "\n";
  out << "step " << step << "\n";
  out << "shape " << head.image_size << ' ' << head.mask_size << ' '
      << head.num_classes << "\n";
  MaskHead copy = head;  // tensor views are non-const; the copy is tiny
  for (const ParamTensorView& t : param_tensors(copy)) {
    out << "tensor " << t.name << ' ' << t.height << ' ' << t.width << '\n';
    for (size_t i = 0; i < t.values.size(); ++i) {
      out << (i ? " " : "") << internal::format_double(t.values[i]);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failure on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::string magic, word;
  int version = 0;
  in >> magic >> version;
  if (!in || magic != "maskedge-checkpoint" || version != 1) {
    throw std::runtime_error("load_checkpoint: bad header in " + path);
  }
  Checkpoint ckpt;
  int image_size = 0, mask_size = 0, num_classes = 0;
  in >> word >> ckpt.seed;
  if (word != "seed") throw std::runtime_error("load_checkpoint: missing seed");
  in >> word >> ckpt.step;
  if (word != "step") throw std::runtime_error("load_checkpoint: missing step");
  in >> word >> image_size >> mask_size >> num_classes;
  if (!in || word != "shape") throw std::runtime_error("load_checkpoint: missing shape");

  ckpt.head = init_weights(image_size, mask_size, num_classes, 0);
  for (ParamTensorView& t : param_tensors(ckpt.head)) {
    std::string name;
    int h = 0, w = 0;
    in >> word >> name >> h >> w;
    if (!in || word != "tensor" || name != t.name || h != t.height || w != t.width) {
      throw std::runtime_error("load_checkpoint: tensor mismatch at " + t.name);
    }
    for (double& v : t.values) in >> v;
  }
  if (!in) throw std::runtime_error("load_checkpoint: truncated file " + path);
  return ckpt;
}

}  // namespace maskedge
