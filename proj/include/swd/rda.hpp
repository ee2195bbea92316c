#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "swd/conv.hpp"
#include "swd/params.hpp"
#include "swd/tensor.hpp"

namespace swd {

// A horizontal band of feature rows. Attention is confined to one band at a
// time: query rows only ever see reference cells inside the same band.
struct RowWindow {
  int start = 0;
  int rows = 3;
};

// Band starts form an arithmetic sequence with the given stride; a final
// window that would overrun is clamped to end at the last row, so every row
// belongs to at least one window and no fabricated rows are attended to.
inline std::vector<RowWindow> enumerate_windows(int H, int rows = 3, int stride = 2) {
  if (H < 1) throw std::invalid_argument("enumerate_windows: H must be positive");
  if (rows < 1 || stride < 1)
    throw std::invalid_argument("enumerate_windows: rows and stride must be positive");
  if (stride > rows)
    throw std::invalid_argument("enumerate_windows: stride " + std::to_string(stride) +
                                " > rows " + std::to_string(rows) + " would orphan rows");
  if (H <= rows) return {RowWindow{0, H}};
  std::vector<RowWindow> out;
  int covered_to = 0;
  for (int s = 0; s + rows <= H; s += stride) {
    out.push_back(RowWindow{s, rows});
    covered_to = s + rows;
  }
  if (covered_to < H) out.push_back(RowWindow{H - rows, rows});
  return out;
}

inline std::vector<int> window_coverage(const std::vector<RowWindow>& windows, int H) {
  std::vector<int> cov(H, 0);
  for (const auto& w : windows)
    for (int r = 0; r < w.rows; ++r) cov[w.start + r]++;
  return cov;
}

// Per-level attention parameters, shared between the left-as-query and
// right-as-query directions. The 3x3 kernels k1p/k2p are shared across the
// three dilation branches (d = 1, 2, 4).
template <typename T>
struct RdaLevelParams {
  bool dilated_qk = true;    // false: typical attention, 1x1 query/key only
  bool dilated_value = false;  // the "FD" ablation adds a dilated branch to the value
  int channels = 0;          // input channel count C; attention dim equals C

  Tensor<T> k1_w, k1_b;      // 1x1 query
  Tensor<T> k2_w, k2_b;      // 1x1 distill after the concatenated dilated query branch
  Tensor<T> k3_w, k3_b;      // 1x1 key
  Tensor<T> k4_w, k4_b;      // 1x1 distill for the key branch
  Tensor<T> k5_w, k5_b;      // 1x1 value
  Tensor<T> k6_w, k6_b;      // 1x1 output projection before the residual add
  Tensor<T> k1p_w, k1p_b;    // 3x3 dilated query kernel (shared over d=1,2,4)
  Tensor<T> k2p_w, k2p_b;    // 3x3 dilated key kernel
  Tensor<T> k5p_w, k5p_b;    // FD only: 3x3 dilated value kernel
  Tensor<T> k5d_w, k5d_b;    // FD only: 1x1 distill for the value branch
};

template <typename T>
RdaLevelParams<T> make_attention_params(ParamStore<T>& store, int level, int channels,
                                        bool dilated_qk, bool dilated_value, Rng& rng) {
  RdaLevelParams<T> p;
  p.dilated_qk = dilated_qk;
  p.dilated_value = dilated_value;
  p.channels = channels;
  const int C = channels;
  const std::string base = "att.l" + std::to_string(level) + ".";
  auto conv1x1 = [&](const std::string& n, int in, int out) {
    auto w = store.add_he_normal(base + n + ".w", {out, in, 1, 1}, rng, in);
    auto b = store.add_zeros(base + n + ".b", {out});
    return std::pair{w, b};
  };
  std::tie(p.k1_w, p.k1_b) = conv1x1("k1", C, C);
  std::tie(p.k3_w, p.k3_b) = conv1x1("k3", C, C);
  std::tie(p.k5_w, p.k5_b) = conv1x1("k5", C, C);
  // Zero-init k6 so the module starts as the identity refinement.
  p.k6_w = store.add_zeros(base + "k6.w", {C, C, 1, 1});
  p.k6_b = store.add_zeros(base + "k6.b", {C});
  if (dilated_qk) {
    p.k1p_w = store.add_he_normal(base + "k1p.w", {C, C, 3, 3}, rng, C * 9);
    p.k1p_b = store.add_zeros(base + "k1p.b", {C});
    p.k2p_w = store.add_he_normal(base + "k2p.w", {C, C, 3, 3}, rng, C * 9);
    p.k2p_b = store.add_zeros(base + "k2p.b", {C});
    std::tie(p.k2_w, p.k2_b) = conv1x1("k2", 3 * C, C);
    std::tie(p.k4_w, p.k4_b) = conv1x1("k4", 3 * C, C);
  }
  if (dilated_value) {
    p.k5p_w = store.add_he_normal(base + "k5p.w", {C, C, 3, 3}, rng, C * 9);
    p.k5p_b = store.add_zeros(base + "k5p.b", {C});
    std::tie(p.k5d_w, p.k5d_b) = conv1x1("k5d", 3 * C, C);
  }
  return p;
}

namespace detail {

// 1x1 path plus, when enabled, a distilled concatenation of the dilated
// responses at d = 1, 2, 4 using one shared 3x3 kernel.
template <typename T>
Tensor<T> qk_projection(const Tensor<T>& F, const Tensor<T>& w1, const Tensor<T>& b1,
                        const Tensor<T>& wp, const Tensor<T>& bp, const Tensor<T>& wd,
                        const Tensor<T>& bd, bool dilated) {
  auto direct = conv2d(F, w1, b1);
  if (!dilated) return direct;
  std::vector<Tensor<T>> branches;
  for (int d : {1, 2, 4}) branches.push_back(conv2d_same(F, wp, bp, d));
  auto distilled = conv2d(concat(branches, 1), wd, bd);
  return add(direct, distilled);
}

}  // namespace detail

template <typename T>
Tensor<T> make_query(const Tensor<T>& F, const RdaLevelParams<T>& p) {
  return detail::qk_projection(F, p.k1_w, p.k1_b, p.k1p_w, p.k1p_b, p.k2_w, p.k2_b,
                               p.dilated_qk);
}

template <typename T>
Tensor<T> make_key(const Tensor<T>& F, const RdaLevelParams<T>& p) {
  return detail::qk_projection(F, p.k3_w, p.k3_b, p.k2p_w, p.k2p_b, p.k4_w, p.k4_b,
                               p.dilated_qk);
}

// Value extraction stays 1x1 (the dilated branch exists only in the FD
// ablation, where it demonstrably hurts).
template <typename T>
Tensor<T> make_value(const Tensor<T>& F, const RdaLevelParams<T>& p) {
  return detail::qk_projection(F, p.k5_w, p.k5_b, p.k5p_w, p.k5p_b, p.k5d_w, p.k5d_b,
                               p.dilated_value);
}

template <typename T>
struct WindowAttention {
  RowWindow window;
  Tensor<T> values;  // (N, C, rows, W)
  Tensor<T> scores;  // (N, rows*W, rows*W), rows softmax-normalized over keys
};

template <typename T>
struct AttentionResult {
  Tensor<T> refined;  // same shape as the query feature map
  std::vector<WindowAttention<T>> windows;
  std::vector<int> coverage;  // per query row, number of windows containing it
};

// Attention inside one row band. The band's rows*W cells are flattened per
// view; scores are softmax(Q^T K / sqrt(C)) over the reference cells.
template <typename T>
WindowAttention<T> attend_window(const Tensor<T>& Q, const Tensor<T>& K, const Tensor<T>& V,
                                 const RowWindow& w) {
  detail::require_same_shape("attend_window(Q,K)", Q, K);
  detail::require_same_shape("attend_window(Q,V)", Q, V);
  const Shape& s = Q.shape();
  const int N = s[0], C = s[1], W = s[3];
  const int cells = w.rows * W;

  auto flat = [&](const Tensor<T>& t) {
    return reshape(slice_rows(t, w.start, w.rows), Shape{N, C, cells});
  };
  auto Qw = flat(Q);
  auto Kw = flat(K);
  auto Vw = flat(V);
  const T scale = T(1) / std::sqrt(static_cast<T>(C));
  auto logits = scalar_mul(matmul(transpose_mat(Qw), Kw), scale);
  auto scores = softmax(logits, 2);
  auto attended = matmul(scores, transpose_mat(Vw));  // (N, cells, C)
  auto values = reshape(transpose_mat(attended), Shape{N, C, w.rows, W});
  return WindowAttention<T>{w, values, scores};
}

// Full attention pass of one level and one direction: query projections from
// F_query, key/value projections from F_ref, windowed attention, overlap
// averaging, 1x1 output projection and the residual add.
template <typename T>
AttentionResult<T> attention_forward(const Tensor<T>& F_query, const Tensor<T>& F_ref,
                                     const RdaLevelParams<T>& p, int rows = 3,
                                     int stride = 2) {
  detail::require_same_shape("attention_forward", F_query, F_ref);
  const Shape& s = F_query.shape();
  const int H = s[2];

  auto Q = make_query(F_query, p);
  auto K = make_key(F_ref, p);
  auto V = make_value(F_ref, p);

  const auto windows = enumerate_windows(H, rows, stride);
  AttentionResult<T> out;
  out.coverage = window_coverage(windows, H);
  std::vector<Tensor<T>> bands;
  std::vector<int> starts;
  for (const auto& w : windows) {
    auto wa = attend_window(Q, K, V, w);
    bands.push_back(wa.values);
    starts.push_back(w.start);
    out.windows.push_back(std::move(wa));
  }
  auto merged = scatter_rows_mean(bands, starts, H);
  out.refined = add(F_query, conv2d(merged, p.k6_w, p.k6_b));
  return out;
}

template <typename T>
AttentionResult<T> rda_forward(const Tensor<T>& F_query, const Tensor<T>& F_ref,
                               const RdaLevelParams<T>& p, int rows = 3, int stride = 2) {
  if (!p.dilated_qk)
    throw std::invalid_argument("rda_forward: parameters lack the dilated query/key branch");
  return attention_forward(F_query, F_ref, p, rows, stride);
}

template <typename T>
AttentionResult<T> typical_attention_forward(const Tensor<T>& F_query, const Tensor<T>& F_ref,
                                             const RdaLevelParams<T>& p, int rows = 3,
                                             int stride = 2) {
  if (p.dilated_qk)
    throw std::invalid_argument(
        "typical_attention_forward: parameters carry a dilated query/key branch");
  return attention_forward(F_query, F_ref, p, rows, stride);
}

}  // namespace swd
