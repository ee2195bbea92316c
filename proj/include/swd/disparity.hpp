#pragma once

#include <vector>

#include "swd/conv.hpp"
#include "swd/rda.hpp"
#include "swd/tensor.hpp"

namespace swd {

// Soft-argmax disparity of one window: f is the score-weighted mean of the
// key cells' horizontal coordinates (keys in all rows of the band contribute
// their column index); the disparity is |query column - f|.
template <typename T>
Tensor<T> soft_argmax_window_disp(const WindowAttention<T>& wa, int W) {
  const Shape& s = wa.scores.shape();
  const int N = s[0], cells = s[1];
  const int rows = cells / W;

  // Horizontal coordinate of every cell in the flattened band, replicated per
  // batch item so the batched matmul applies.
  Array<T> key_cols(Shape{N, cells, 1});
  Array<T> query_cols(Shape{N, cells, 1});
  for (int n = 0; n < N; ++n)
    for (int j = 0; j < cells; ++j) {
      key_cols.data[static_cast<size_t>(n) * cells + j] = static_cast<T>(j % W);
      query_cols.data[static_cast<size_t>(n) * cells + j] = static_cast<T>(j % W);
    }
  auto f = matmul(wa.scores, Tensor<T>::leaf(std::move(key_cols)));  // (N, cells, 1)
  auto disp = abs(sub(Tensor<T>::leaf(std::move(query_cols)), f));
  return reshape(disp, Shape{N, 1, rows, W});
}

// Per-level disparity map from the windowed scores; overlapping windows are
// averaged per query cell. Output is (N,1,H,W) in feature cells of the level.
template <typename T>
Tensor<T> soft_argmax_disp(const AttentionResult<T>& att, int H, int W) {
  std::vector<Tensor<T>> bands;
  std::vector<int> starts;
  for (const auto& wa : att.windows) {
    bands.push_back(soft_argmax_window_disp(wa, W));
    starts.push_back(wa.window.start);
  }
  return scatter_rows_mean(bands, starts, H);
}

// Coarse-to-fine merge: upsample the coarser map, double its values (cell
// units halve), concatenate with this level's estimate and fuse with a 3x3
// same-padded convolution down to one channel.
template <typename T>
Tensor<T> merge_disp(const Tensor<T>& D_next, const Tensor<T>& disp_i, const Tensor<T>& kw,
                     const Tensor<T>& kb) {
  auto up = scalar_mul(bilinear_upsample2x(D_next), T(2));
  detail::require_same_shape("merge_disp", up, disp_i);
  return conv2d_same(concat<T>({up, disp_i}, 1), kw, kb);
}

// Appends the upsampled, rescaled higher-level disparity as an extra feature
// channel. Disabled by the "nocat" ablation, which passes features through.
template <typename T>
Tensor<T> inject_disparity(const Tensor<T>& F_level, const Tensor<T>& D_next,
                           bool enabled = true) {
  if (!enabled) return F_level;
  auto up = scalar_mul(bilinear_upsample2x(D_next), T(2));
  const Shape& sf = F_level.shape();
  const Shape& su = up.shape();
  if (su[2] != sf[2] || su[3] != sf[3])
    throw std::invalid_argument("inject_disparity: disparity " + shape_str(D_next.shape()) +
                                " does not upsample to features " + shape_str(sf));
  return concat<T>({F_level, up}, 1);
}

}  // namespace swd
