#pragma once

#include <string>

#include "swd/tensor.hpp"

namespace swd {

inline int conv_out_extent(int in, int pad, int dilation, int k, int stride) {
  return (in + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
}

// Cross-correlation with zero padding, NCHW input and OIHW kernel.
// Differentiable w.r.t. input, kernel and bias; bias may be undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 int stride = 1, int dilation = 1, int padding = 0) {
  const Shape& si = input.shape();
  const Shape& sk = kernel.shape();
  if (si.size() != 4 || sk.size() != 4)
    throw std::invalid_argument("conv2d: expected NCHW input and OIHW kernel, got " +
                                shape_str(si) + " and " + shape_str(sk));
  const int N = si[0], Ci = si[1], H = si[2], W = si[3];
  const int Co = sk[0], Kh = sk[2], Kw = sk[3];
  if (sk[1] != Ci)
    throw std::invalid_argument("conv2d: kernel expects " + std::to_string(sk[1]) +
                                " input channels but input " + shape_str(si) + " has " +
                                std::to_string(Ci) + " (kernel " + shape_str(sk) + ")");
  if (bias.defined() && bias.shape() != Shape{Co})
    throw std::invalid_argument("conv2d: bias shape " + shape_str(bias.shape()) +
                                " does not match output channels " + std::to_string(Co));
  if (stride < 1 || dilation < 1 || padding < 0)
    throw std::invalid_argument("conv2d: bad stride/dilation/padding");
  const int Ho = conv_out_extent(H, padding, dilation, Kh, stride);
  const int Wo = conv_out_extent(W, padding, dilation, Kw, stride);
  if (Ho < 1 || Wo < 1)
    throw std::invalid_argument("conv2d: empty output for input " + shape_str(si) +
                                ", kernel " + shape_str(sk));

  std::vector<T> out(static_cast<size_t>(N) * Co * Ho * Wo, T(0));
  const T* iv = input.val().data();
  const T* kv = kernel.val().data();
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < Co; ++co) {
      const T b = bias.defined() ? bias.val()[co] : T(0);
      T* om = out.data() + (static_cast<size_t>(n) * Co + co) * Ho * Wo;
      for (int y = 0; y < Ho; ++y) {
        for (int x = 0; x < Wo; ++x) {
          T acc = b;
          for (int ci = 0; ci < Ci; ++ci) {
            const T* im = iv + (static_cast<size_t>(n) * Ci + ci) * H * W;
            const T* km = kv + (static_cast<size_t>(co) * Ci + ci) * Kh * Kw;
            for (int ky = 0; ky < Kh; ++ky) {
              const int sy = y * stride - padding + ky * dilation;
              if (sy < 0 || sy >= H) continue;
              for (int kx = 0; kx < Kw; ++kx) {
                const int sx = x * stride - padding + kx * dilation;
                if (sx < 0 || sx >= W) continue;
                acc += im[sy * W + sx] * km[ky * Kw + kx];
              }
            }
          }
          om[y * Wo + x] = acc;
        }
      }
    }
  }

  std::vector<NodePtr<T>> parents{input.node(), kernel.node()};
  if (bias.defined()) parents.push_back(bias.node());
  const bool has_bias = bias.defined();
  return detail::make_op<T>(
      "conv2d", Shape{N, Co, Ho, Wo}, std::move(out), std::move(parents),
      [N, Ci, H, W, Co, Kh, Kw, Ho, Wo, stride, dilation, padding, has_bias](Node<T>& self) {
        auto& pin = *self.parents[0];
        auto& pk = *self.parents[1];
        pin.ensure_grad();
        pk.ensure_grad();
        if (has_bias) self.parents[2]->ensure_grad();
        const T* iv = pin.val.data();
        const T* kv = pk.val.data();
        for (int n = 0; n < N; ++n) {
          for (int co = 0; co < Co; ++co) {
            const T* gm = self.grad.data() + (static_cast<size_t>(n) * Co + co) * Ho * Wo;
            if (has_bias) {
              T gb = T(0);
              for (int i = 0; i < Ho * Wo; ++i) gb += gm[i];
              self.parents[2]->grad[co] += gb;
            }
            for (int y = 0; y < Ho; ++y) {
              for (int x = 0; x < Wo; ++x) {
                const T g = gm[y * Wo + x];
                if (g == T(0)) continue;
                for (int ci = 0; ci < Ci; ++ci) {
                  const T* im = iv + (static_cast<size_t>(n) * Ci + ci) * H * W;
                  T* gim = pin.grad.data() + (static_cast<size_t>(n) * Ci + ci) * H * W;
                  const T* km = kv + (static_cast<size_t>(co) * Ci + ci) * Kh * Kw;
                  T* gkm = pk.grad.data() + (static_cast<size_t>(co) * Ci + ci) * Kh * Kw;
                  for (int ky = 0; ky < Kh; ++ky) {
                    const int sy = y * stride - padding + ky * dilation;
                    if (sy < 0 || sy >= H) continue;
                    for (int kx = 0; kx < Kw; ++kx) {
                      const int sx = x * stride - padding + kx * dilation;
                      if (sx < 0 || sx >= W) continue;
                      gim[sy * W + sx] += g * km[ky * Kw + kx];
                      gkm[ky * Kw + kx] += g * im[sy * W + sx];
                    }
                  }
                }
              }
            }
          }
        }
      });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, int stride = 1,
                 int dilation = 1, int padding = 0) {
  return conv2d(input, kernel, Tensor<T>{}, stride, dilation, padding);
}

// Same-padded 3x3 (or KxK) convenience: output keeps the input's spatial dims.
template <typename T>
Tensor<T> conv2d_same(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                      int dilation = 1) {
  const int k = kernel.shape()[2];
  return conv2d(input, kernel, bias, 1, dilation, dilation * (k - 1) / 2);
}

// Bilinear x2 upsampling, align-corners-false. Constant maps stay constant.
template <typename T>
Tensor<T> bilinear_upsample2x(const Tensor<T>& input) {
  const Shape& s = input.shape();
  if (s.size() != 4)
    throw std::invalid_argument("bilinear_upsample2x: expected NCHW, got " + shape_str(s));
  const int N = s[0], C = s[1], H = s[2], W = s[3];
  const int Ho = 2 * H, Wo = 2 * W;

  // Source coordinate for output index i is (i + 0.5)/2 - 0.5, clamped.
  auto taps = [](int out_i, int in_extent, int& i0, int& i1, T& w1) {
    const double src = (out_i + 0.5) * 0.5 - 0.5;
    double f = std::floor(src);
    double frac = src - f;
    int i = static_cast<int>(f);
    if (i < 0) {
      i = 0;
      frac = 0.0;
    }
    if (i >= in_extent - 1) {
      i = in_extent - 1;
      frac = 0.0;
    }
    i0 = i;
    i1 = std::min(i + 1, in_extent - 1);
    w1 = static_cast<T>(frac);
  };

  std::vector<int> y0(Ho), y1(Ho), x0(Wo), x1(Wo);
  std::vector<T> wy(Ho), wx(Wo);
  for (int y = 0; y < Ho; ++y) taps(y, H, y0[y], y1[y], wy[y]);
  for (int x = 0; x < Wo; ++x) taps(x, W, x0[x], x1[x], wx[x]);

  std::vector<T> out(static_cast<size_t>(N) * C * Ho * Wo);
  const T* iv = input.val().data();
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const T* im = iv + (static_cast<size_t>(n) * C + c) * H * W;
      T* om = out.data() + (static_cast<size_t>(n) * C + c) * Ho * Wo;
      for (int y = 0; y < Ho; ++y)
        for (int x = 0; x < Wo; ++x) {
          const T a = im[y0[y] * W + x0[x]], b = im[y0[y] * W + x1[x]];
          const T c2 = im[y1[y] * W + x0[x]], d = im[y1[y] * W + x1[x]];
          const T top = a + (b - a) * wx[x];
          const T bot = c2 + (d - c2) * wx[x];
          om[y * Wo + x] = top + (bot - top) * wy[y];
        }
    }
  return detail::make_op<T>(
      "bilinear_upsample2x", Shape{N, C, Ho, Wo}, std::move(out), {input.node()},
      [N, C, H, W, Ho, Wo, y0, y1, x0, x1, wy, wx](Node<T>& self) {
        auto& pa = *self.parents[0];
        pa.ensure_grad();
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < C; ++c) {
            T* gim = pa.grad.data() + (static_cast<size_t>(n) * C + c) * H * W;
            const T* gm = self.grad.data() + (static_cast<size_t>(n) * C + c) * Ho * Wo;
            for (int y = 0; y < Ho; ++y)
              for (int x = 0; x < Wo; ++x) {
                const T g = gm[y * Wo + x];
                if (g == T(0)) continue;
                const T wyy = wy[y], wxx = wx[x];
                gim[y0[y] * W + x0[x]] += g * (T(1) - wyy) * (T(1) - wxx);
                gim[y0[y] * W + x1[x]] += g * (T(1) - wyy) * wxx;
                gim[y1[y] * W + x0[x]] += g * wyy * (T(1) - wxx);
                gim[y1[y] * W + x1[x]] += g * wyy * wxx;
              }
          }
      });
}

}  // namespace swd
