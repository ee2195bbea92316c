#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "swd/tensor.hpp"

namespace swd {

// 10*log10(1/MSE) for images in [0,1], capped at 99 dB (identical inputs).
template <typename T>
double psnr(const Array<T>& a, const Array<T>& b) {
  if (a.shape != b.shape)
    throw std::invalid_argument("psnr: shape mismatch " + shape_str(a.shape) + " vs " +
                                shape_str(b.shape));
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

namespace metric_detail {

inline const std::vector<double>& gaussian11() {
  static const std::vector<double> k = [] {
    std::vector<double> v(11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
      const double d = i - 5.0;
      v[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += v[static_cast<size_t>(i)];
    }
    for (auto& x : v) x /= sum;
    return v;
  }();
  return k;
}

struct SsimTerms {
  double ssim = 0.0;  // mean luminance*contrast*structure
  double cs = 0.0;    // mean contrast*structure (for MS-SSIM)
};

// Single-scale SSIM over valid 11x11 Gaussian windows, one channel.
inline SsimTerms ssim_channel(const double* a, const double* b, int H, int W) {
  const auto& g = gaussian11();
  const int n = 11, half = 5;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;

  // Separable Gaussian filtering of a, b, a^2, b^2, ab (valid region).
  const int Hv = H - n + 1, Wv = W - n + 1;
  if (Hv < 1 || Wv < 1) throw std::invalid_argument("ssim: image smaller than 11x11");
  auto filt = [&](auto value) {
    std::vector<double> tmp(static_cast<size_t>(H) * Wv);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < Wv; ++x) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += g[static_cast<size_t>(k)] * value(y, x + k);
        tmp[static_cast<size_t>(y) * Wv + x] = acc;
      }
    std::vector<double> out(static_cast<size_t>(Hv) * Wv);
    for (int y = 0; y < Hv; ++y)
      for (int x = 0; x < Wv; ++x) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += g[static_cast<size_t>(k)] * tmp[(y + k) * Wv + x];
        out[static_cast<size_t>(y) * Wv + x] = acc;
      }
    return out;
  };
  auto mu_a = filt([&](int y, int x) { return a[y * W + x]; });
  auto mu_b = filt([&](int y, int x) { return b[y * W + x]; });
  auto aa = filt([&](int y, int x) { return a[y * W + x] * a[y * W + x]; });
  auto bb = filt([&](int y, int x) { return b[y * W + x] * b[y * W + x]; });
  auto ab = filt([&](int y, int x) { return a[y * W + x] * b[y * W + x]; });

  SsimTerms t;
  const size_t cnt = mu_a.size();
  for (size_t i = 0; i < cnt; ++i) {
    const double va = aa[i] - mu_a[i] * mu_a[i];
    const double vb = bb[i] - mu_b[i] * mu_b[i];
    const double cov = ab[i] - mu_a[i] * mu_b[i];
    const double lum = (2.0 * mu_a[i] * mu_b[i] + c1) / (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1);
    const double cs = (2.0 * cov + c2) / (va + vb + c2);
    t.ssim += lum * cs;
    t.cs += cs;
  }
  t.ssim /= static_cast<double>(cnt);
  t.cs /= static_cast<double>(cnt);
  return t;
}

inline std::vector<double> downsample2(const std::vector<double>& in, int H, int W, int& Ho,
                                       int& Wo) {
  Ho = H / 2;
  Wo = W / 2;
  std::vector<double> out(static_cast<size_t>(Ho) * Wo);
  for (int y = 0; y < Ho; ++y)
    for (int x = 0; x < Wo; ++x)
      out[static_cast<size_t>(y) * Wo + x] =
          0.25 * (in[(2 * y) * W + 2 * x] + in[(2 * y) * W + 2 * x + 1] +
                  in[(2 * y + 1) * W + 2 * x] + in[(2 * y + 1) * W + 2 * x + 1]);
  return out;
}

}  // namespace metric_detail

// Standard single-scale SSIM: 11x11 Gaussian window (sigma 1.5), c1=0.01^2,
// c2=0.03^2 on [0,1] images, channel-averaged, valid windows only.
template <typename T>
double ssim(const Array<T>& a, const Array<T>& b) {
  if (a.shape != b.shape)
    throw std::invalid_argument("ssim: shape mismatch " + shape_str(a.shape) + " vs " +
                                shape_str(b.shape));
  const size_t r = a.shape.size();
  const int H = a.shape[r - 2], W = a.shape[r - 1];
  if (H < 11 || W < 11)
    throw std::invalid_argument("ssim: images must be at least 11x11, got " +
                                std::to_string(W) + "x" + std::to_string(H));
  const int C = static_cast<int>(a.numel()) / (H * W);
  double acc = 0.0;
  std::vector<double> ca(static_cast<size_t>(H) * W), cb(ca.size());
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < H * W; ++i) {
      ca[static_cast<size_t>(i)] = static_cast<double>(a.data[static_cast<size_t>(c) * H * W + i]);
      cb[static_cast<size_t>(i)] = static_cast<double>(b.data[static_cast<size_t>(c) * H * W + i]);
    }
    acc += metric_detail::ssim_channel(ca.data(), cb.data(), H, W).ssim;
  }
  return acc / C;
}

inline constexpr int kMsSsimMinSide = 176;  // 5 dyadic scales of 11 pixels

// Five-scale MS-SSIM (Wang et al. weights). Requires min(H,W) >= 176.
template <typename T>
double ms_ssim(const Array<T>& a, const Array<T>& b) {
  if (a.shape != b.shape)
    throw std::invalid_argument("ms_ssim: shape mismatch");
  const size_t r = a.shape.size();
  int H = a.shape[r - 2], W = a.shape[r - 1];
  if (std::min(H, W) < kMsSsimMinSide)
    throw std::invalid_argument("ms_ssim: min side " + std::to_string(std::min(H, W)) +
                                " below " + std::to_string(kMsSsimMinSide));
  const int C = static_cast<int>(a.numel()) / (H * W);
  static const double weights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

  double result = 0.0;
  for (int c = 0; c < C; ++c) {
    std::vector<double> ca(static_cast<size_t>(H) * W), cb(ca.size());
    for (int i = 0; i < H * W; ++i) {
      ca[static_cast<size_t>(i)] = static_cast<double>(a.data[static_cast<size_t>(c) * H * W + i]);
      cb[static_cast<size_t>(i)] = static_cast<double>(b.data[static_cast<size_t>(c) * H * W + i]);
    }
    int h = H, w = W;
    double prod = 1.0;
    for (int scale = 0; scale < 5; ++scale) {
      auto t = metric_detail::ssim_channel(ca.data(), cb.data(), h, w);
      if (scale < 4) {
        prod *= std::pow(std::max(t.cs, 0.0), weights[scale]);
        int ho, wo;
        ca = metric_detail::downsample2(ca, h, w, ho, wo);
        cb = metric_detail::downsample2(cb, h, w, ho, wo);
        h = ho;
        w = wo;
      } else {
        prod *= std::pow(std::max(t.ssim, 0.0), weights[scale]);
      }
    }
    result += prod;
  }
  return result / C;
}

// Single-scale SSIM unless the image is large enough for MS-SSIM.
template <typename T>
double ssim_auto(const Array<T>& a, const Array<T>& b) {
  const size_t r = a.shape.size();
  const int H = a.shape[r - 2], W = a.shape[r - 1];
  return std::min(H, W) >= kMsSsimMinSide ? ms_ssim(a, b) : ssim(a, b);
}

struct EvalRow {
  std::string sample;
  double psnr_l = 0.0, psnr_r = 0.0;
  double ssim_l = 0.0, ssim_r = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::string variant;
  double runtime_seconds = 0.0;

  EvalRow aggregate() const {
    EvalRow agg;
    agg.sample = "aggregate";
    for (const auto& r : rows) {
      agg.psnr_l += r.psnr_l;
      agg.psnr_r += r.psnr_r;
      agg.ssim_l += r.ssim_l;
      agg.ssim_r += r.ssim_r;
    }
    const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
    agg.psnr_l /= n;
    agg.psnr_r /= n;
    agg.ssim_l /= n;
    agg.ssim_r /= n;
    return agg;
  }

  double mean_psnr() const {
    auto a = aggregate();
    return 0.5 * (a.psnr_l + a.psnr_r);
  }
  double mean_ssim() const {
    auto a = aggregate();
    return 0.5 * (a.ssim_l + a.ssim_r);
  }
};

inline void write_eval_csv(const std::string& path, const EvalReport& report) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os << "sample,psnr_l,psnr_r,ssim_l,ssim_r\n";
  auto row = [&](const EvalRow& r) {
    os << r.sample << "," << r.psnr_l << "," << r.psnr_r << "," << r.ssim_l << ","
       << r.ssim_r << "\n";
  };
  for (const auto& r : report.rows) row(r);
  row(report.aggregate());
}

}  // namespace swd
