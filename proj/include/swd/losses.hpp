#pragma once

#include <array>
#include <string>
#include <vector>

#include "swd/conv.hpp"
#include "swd/params.hpp"
#include "swd/tensor.hpp"

namespace swd {

struct LossConfig {
  std::array<double, 4> lambda{1.0, 0.5, 0.4, 1.0};  // per-tap perceptual weights
  double alpha = 5e-4;                               // consistency weight
  uint64_t extractor_seed = 0;
};

// Fixed, seeded, randomly initialized 4-stage conv pyramid standing in for a
// pretrained feature extractor. Taps sit at strides 1, 2, 4, 8. The weights
// are frozen (never trained) and serialized with the checkpoint so loss
// values are reproducible.
template <typename T>
struct FeatureExtractorParams {
  uint64_t seed = 0;
  std::array<Tensor<T>, 4> w;
  std::array<Tensor<T>, 4> b;
};

template <typename T>
FeatureExtractorParams<T> make_extractor_params(ParamStore<T>& store, uint64_t seed,
                                                int in_channels = 3) {
  FeatureExtractorParams<T> p;
  p.seed = seed;
  Rng rng(seed ^ 0x9f0e1d2c3b4a5968ULL);
  const std::array<int, 4> widths{8, 16, 16, 16};
  int in_ch = in_channels;
  for (int t = 0; t < 4; ++t) {
    const int out_ch = widths[static_cast<size_t>(t)];
    const std::string base = "perc.s" + std::to_string(t + 1) + ".";
    p.w[static_cast<size_t>(t)] = store.add_he_normal(base + "w", {out_ch, in_ch, 3, 3}, rng,
                                                      in_ch * 9, /*trainable=*/false);
    p.b[static_cast<size_t>(t)] = store.add_zeros(base + "b", {out_ch},
                                                  /*trainable=*/false);
    in_ch = out_ch;
  }
  return p;
}

// Four tap tensors at strides 1, 2, 4, 8.
template <typename T>
std::array<Tensor<T>, 4> feature_extract(const Tensor<T>& image,
                                         const FeatureExtractorParams<T>& p) {
  std::array<Tensor<T>, 4> taps;
  auto x = image;
  for (int t = 0; t < 4; ++t) {
    const int stride = t == 0 ? 1 : 2;
    x = relu(conv2d(x, p.w[static_cast<size_t>(t)], p.b[static_cast<size_t>(t)], stride, 1, 1));
    taps[static_cast<size_t>(t)] = x;
  }
  return taps;
}

// Weighted l1 distance between tap features of outputs and clean targets,
// summed over taps and views.
template <typename T>
Tensor<T> perceptual_loss(const Tensor<T>& out_l, const Tensor<T>& out_r,
                          const Tensor<T>& clean_l, const Tensor<T>& clean_r,
                          const FeatureExtractorParams<T>& p, const LossConfig& cfg) {
  auto fo_l = feature_extract(out_l, p);
  auto fo_r = feature_extract(out_r, p);
  auto fc_l = feature_extract(clean_l, p);
  auto fc_r = feature_extract(clean_r, p);
  Tensor<T> total;
  for (int t = 0; t < 4; ++t) {
    auto term = add(l1_mean(fo_l[static_cast<size_t>(t)], fc_l[static_cast<size_t>(t)]),
                    l1_mean(fo_r[static_cast<size_t>(t)], fc_r[static_cast<size_t>(t)]));
    term = scalar_mul(term, static_cast<T>(cfg.lambda[static_cast<size_t>(t)]));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

// Ground-truth disparity and masks arrive at full image resolution in pixels.
// The comparison happens at level-1 resolution (stride 4) in level-1 cell
// units: values are block-averaged over mask-valid pixels and divided by 4;
// the mask is reduced by logical AND over each 4x4 block.
template <typename T>
Array<T> downsample_disparity_to_level1(const Array<T>& disp_px, const Array<T>& mask) {
  const int H = disp_px.shape[disp_px.shape.size() - 2];
  const int W = disp_px.shape[disp_px.shape.size() - 1];
  const int h = H / 4, w = W / 4;
  Array<T> out(Shape{1, 1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      T acc = T(0);
      int cnt = 0;
      for (int dy = 0; dy < 4; ++dy)
        for (int dx = 0; dx < 4; ++dx) {
          const size_t i = static_cast<size_t>(4 * y + dy) * W + 4 * x + dx;
          if (mask.data[i] != T(0)) {
            acc += disp_px.data[i];
            ++cnt;
          }
        }
      out.data[static_cast<size_t>(y) * w + x] = cnt ? acc / (T(4) * cnt) : T(0);
    }
  return out;
}

template <typename T>
Array<T> downsample_mask_to_level1(const Array<T>& mask) {
  const int H = mask.shape[mask.shape.size() - 2];
  const int W = mask.shape[mask.shape.size() - 1];
  const int h = H / 4, w = W / 4;
  Array<T> out(Shape{1, 1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool all = true;
      for (int dy = 0; dy < 4 && all; ++dy)
        for (int dx = 0; dx < 4 && all; ++dx)
          all = mask.data[static_cast<size_t>(4 * y + dy) * W + 4 * x + dx] != T(0);
      out.data[static_cast<size_t>(y) * w + x] = all ? T(1) : T(0);
    }
  return out;
}

// Masked mean-l1 between predicted and ground-truth disparity, summed over
// the two views. All inputs must already live at level-1 resolution in
// level-1 cell units. All-false masks contribute 0 and raise the warn flag.
template <typename T>
Tensor<T> attention_consistency_loss(const Tensor<T>& D_l, const Tensor<T>& D_r,
                                     const Tensor<T>& gt_l, const Tensor<T>& gt_r,
                                     const Tensor<T>& mask_l, const Tensor<T>& mask_r,
                                     bool* empty_mask = nullptr) {
  bool warn_l = false, warn_r = false;
  auto loss_l = l1_mean(D_l, gt_l, mask_l, &warn_l);
  auto loss_r = l1_mean(D_r, gt_r, mask_r, &warn_r);
  if (empty_mask) *empty_mask = warn_l || warn_r;
  return add(loss_l, loss_r);
}

template <typename T>
Tensor<T> total_loss(const Tensor<T>& perceptual, const Tensor<T>& consistency, T alpha) {
  return add(perceptual, scalar_mul(consistency, alpha));
}

}  // namespace swd
