#pragma once

#include <array>
#include <string>

#include "swd/conv.hpp"
#include "swd/params.hpp"
#include "swd/tensor.hpp"

namespace swd {

struct EncoderConfig {
  int in_channels = 3;
  int stem_channels = 8;
  std::array<int, 3> channels{16, 32, 64};  // per level, strides 4/8/16
};

inline constexpr std::array<int, 3> kLevelStride{4, 8, 16};

template <typename T>
struct FeaturePyramid {
  std::array<Tensor<T>, 3> levels;  // levels[i] has stride kLevelStride[i]

  Tensor<T>& level(int i) { return levels[static_cast<size_t>(i - 1)]; }
  const Tensor<T>& level(int i) const { return levels[static_cast<size_t>(i - 1)]; }
};

template <typename T>
struct EncoderParams {
  EncoderConfig cfg;
  Tensor<T> stem_w, stem_b;
  struct Level {
    Tensor<T> down_w, down_b;
    Tensor<T> res1_w, res1_b, res2_w, res2_b;
  };
  std::array<Level, 3> lv;
};

template <typename T>
EncoderParams<T> make_encoder_params(ParamStore<T>& store, const EncoderConfig& cfg,
                                     Rng& rng) {
  EncoderParams<T> p;
  p.cfg = cfg;
  p.stem_w = store.add_he_normal("enc.stem.w", {cfg.stem_channels, cfg.in_channels, 3, 3},
                                 rng, cfg.in_channels * 9);
  p.stem_b = store.add_zeros("enc.stem.b", {cfg.stem_channels});
  int in_ch = cfg.stem_channels;
  for (int i = 0; i < 3; ++i) {
    const int out_ch = cfg.channels[static_cast<size_t>(i)];
    const std::string base = "enc.l" + std::to_string(i + 1) + ".";
    auto& lv = p.lv[static_cast<size_t>(i)];
    lv.down_w = store.add_he_normal(base + "down.w", {out_ch, in_ch, 3, 3}, rng, in_ch * 9);
    lv.down_b = store.add_zeros(base + "down.b", {out_ch});
    lv.res1_w = store.add_he_normal(base + "res1.w", {out_ch, out_ch, 3, 3}, rng, out_ch * 9);
    lv.res1_b = store.add_zeros(base + "res1.b", {out_ch});
    lv.res2_w = store.add_he_normal(base + "res2.w", {out_ch, out_ch, 3, 3}, rng, out_ch * 9);
    lv.res2_b = store.add_zeros(base + "res2.b", {out_ch});
    in_ch = out_ch;
  }
  return p;
}

// Three-level pyramid at strides 4/8/16: one stride-2 stem, then per level a
// stride-2 downsampling conv followed by a residual block. Both views are
// encoded with the same parameter tensors.
template <typename T>
FeaturePyramid<T> encode(const EncoderParams<T>& p, const Tensor<T>& image) {
  const Shape& s = image.shape();
  if (s.size() != 4 || s[1] != p.cfg.in_channels)
    throw std::invalid_argument("encode: expected NCHW with " +
                                std::to_string(p.cfg.in_channels) + " channels, got " +
                                shape_str(s));
  if (s[2] % 16 != 0 || s[3] % 16 != 0)
    throw std::invalid_argument(
        "encode: spatial dims " + std::to_string(s[2]) + "x" + std::to_string(s[3]) +
        " must be multiples of 16; pad to " + std::to_string((s[2] + 15) / 16 * 16) + "x" +
        std::to_string((s[3] + 15) / 16 * 16));

  auto x = relu(conv2d(image, p.stem_w, p.stem_b, 2, 1, 1));
  FeaturePyramid<T> pyr;
  for (int i = 0; i < 3; ++i) {
    const auto& lv = p.lv[static_cast<size_t>(i)];
    x = relu(conv2d(x, lv.down_w, lv.down_b, 2, 1, 1));
    auto r = conv2d_same(relu(conv2d_same(x, lv.res1_w, lv.res1_b)), lv.res2_w, lv.res2_b);
    x = add(x, r);
    pyr.levels[static_cast<size_t>(i)] = x;
  }
  return pyr;
}

// Receptive-field radius of level i (1..3) in input pixels, derived from the
// layer list: stem conv3/s2, then per level conv3/s2 plus two conv3 at the
// level's stride.
inline int encoder_receptive_radius(int level) {
  int radius = 1;  // stem at input stride 1
  int stride = 2;
  for (int i = 1; i <= level; ++i) {
    radius += stride;      // downsampling conv3
    stride *= 2;
    radius += 2 * stride;  // residual block: two conv3 at the new stride
  }
  return radius;
}

}  // namespace swd
