#pragma once

#include <array>
#include <string>

#include "swd/conv.hpp"
#include "swd/params.hpp"
#include "swd/tensor.hpp"

namespace swd {

template <typename T>
struct DecoderStepParams {
  Tensor<T> fuse_w, fuse_b;  // 3x3 over the concatenated (P, A) maps
  // Two residual blocks, each two 3x3 same-padded convs with a skip.
  Tensor<T> r1a_w, r1a_b, r1b_w, r1b_b;
  Tensor<T> r2a_w, r2a_b, r2b_w, r2b_b;
};

template <typename T>
struct DecoderParams {
  int width = 0;  // channel width of the aggregated maps, equals level-3 channels
  std::array<DecoderStepParams<T>, 3> steps;  // consume A_3, A_2, A_1 in that order
  Tensor<T> head_w, head_b;                   // final 3x3 projection to RGB
};

template <typename T>
DecoderParams<T> make_decoder_params(ParamStore<T>& store, int width,
                                     const std::array<int, 3>& refined_channels, Rng& rng,
                                     int out_channels = 3) {
  DecoderParams<T> p;
  p.width = width;
  for (int i = 0; i < 3; ++i) {
    auto& st = p.steps[static_cast<size_t>(i)];
    const std::string base = "dec.step" + std::to_string(i) + ".";
    const int in_ch = width + refined_channels[static_cast<size_t>(i)];
    st.fuse_w = store.add_he_normal(base + "fuse.w", {width, in_ch, 3, 3}, rng, in_ch * 9);
    st.fuse_b = store.add_zeros(base + "fuse.b", {width});
    auto res_conv = [&](const std::string& n) {
      auto w = store.add_he_normal(base + n + ".w", {width, width, 3, 3}, rng, width * 9);
      auto b = store.add_zeros(base + n + ".b", {width});
      return std::pair{w, b};
    };
    std::tie(st.r1a_w, st.r1a_b) = res_conv("r1a");
    std::tie(st.r1b_w, st.r1b_b) = res_conv("r1b");
    std::tie(st.r2a_w, st.r2a_b) = res_conv("r2a");
    std::tie(st.r2b_w, st.r2b_b) = res_conv("r2b");
  }
  p.head_w = store.add_he_normal("dec.head.w", {out_channels, width, 3, 3}, rng, width * 9);
  p.head_b = store.add_zeros("dec.head.b", {out_channels});
  return p;
}

namespace detail {

template <typename T>
Tensor<T> residual_block(const Tensor<T>& x, const Tensor<T>& wa, const Tensor<T>& ba,
                         const Tensor<T>& wb, const Tensor<T>& bb) {
  return add(x, conv2d_same(relu(conv2d_same(x, wa, ba)), wb, bb));
}

}  // namespace detail

// One aggregation step: concat -> 3x3 fuse -> residual blocks -> skip add
// with the incoming map -> bilinear x2.
template <typename T>
Tensor<T> aggregate_step(const Tensor<T>& P_next, const Tensor<T>& A_next,
                         const DecoderStepParams<T>& st) {
  const Shape& sp = P_next.shape();
  const Shape& sa = A_next.shape();
  if (sp[2] != sa[2] || sp[3] != sa[3])
    throw std::invalid_argument("aggregate_step: spatial mismatch " + shape_str(sp) + " vs " +
                                shape_str(sa));
  auto fused = conv2d_same(concat<T>({P_next, A_next}, 1), st.fuse_w, st.fuse_b);
  auto r = detail::residual_block(fused, st.r1a_w, st.r1a_b, st.r1b_w, st.r1b_b);
  r = detail::residual_block(r, st.r2a_w, st.r2a_b, st.r2b_w, st.r2b_b);
  return bilinear_upsample2x(add(P_next, r));
}

// Aggregates from the coarsest level down and projects to RGB. Starting from
// P_3 = F_3 (stride 16), three steps consume A_3, A_2, A_1 and reach stride 2;
// the head upsamples once more and projects to the output channels. Output is
// linear; clamping to [0,1] happens at inference only, outside the graph.
template <typename T>
Tensor<T> decode(const Tensor<T>& F3, const std::array<Tensor<T>, 3>& refined,
                 const DecoderParams<T>& p) {
  auto x = F3;
  for (int i = 0; i < 3; ++i)
    x = aggregate_step(x, refined[static_cast<size_t>(2 - i)], p.steps[static_cast<size_t>(i)]);
  return conv2d_same(bilinear_upsample2x(x), p.head_w, p.head_b);
}

}  // namespace swd
