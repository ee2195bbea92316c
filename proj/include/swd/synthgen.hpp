#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "swd/rng.hpp"
#include "swd/tensor.hpp"

namespace swd {

enum class DropMode { kDrops, kMist, kMixed };

inline std::string drop_mode_name(DropMode m) {
  switch (m) {
    case DropMode::kDrops: return "drops";
    case DropMode::kMist: return "mist";
    case DropMode::kMixed: return "mixed";
  }
  return "?";
}

inline DropMode drop_mode_from_name(const std::string& s) {
  if (s == "drops") return DropMode::kDrops;
  if (s == "mist") return DropMode::kMist;
  if (s == "mixed") return DropMode::kMixed;
  throw std::invalid_argument("unknown drop mode '" + s + "' (drops|mist|mixed)");
}

struct SceneSpec {
  uint64_t seed = 0;
  int width = 96;    // multiple of 16
  int height = 48;   // multiple of 16
  int layers = 3;    // fronto-parallel depth layers
  int min_disparity = 2;   // pixels
  int max_disparity = 10;  // pixels
  DropMode mode = DropMode::kMixed;
  // Drop statistics; placeholders exposed for experimentation.
  int drops_min = 4, drops_max = 9;
  double drop_radius_min = 3.0, drop_radius_max = 9.0;
  double drop_peak_min = 0.55, drop_peak_max = 0.95;
  int mist_min = 40, mist_max = 80;
  double mist_radius_min = 1.0, mist_radius_max = 2.5;
  double mist_peak_min = 0.15, mist_peak_max = 0.45;

  void validate() const {
    if (width % 16 != 0 || height % 16 != 0)
      throw std::invalid_argument("SceneSpec: dims must be multiples of 16");
    if (min_disparity < 0 || max_disparity < min_disparity ||
        max_disparity > width / 4)
      throw std::invalid_argument("SceneSpec: disparity range [" +
                                  std::to_string(min_disparity) + "," +
                                  std::to_string(max_disparity) +
                                  "] outside [0, W/4]");
    if (layers < 1) throw std::invalid_argument("SceneSpec: need at least one layer");
  }
};

// One scene: corrupted pair, clean pair, transparency and waterdrop layers,
// ground-truth disparity in pixels and validity masks (in-bounds, unoccluded).
struct StereoSample {
  int width = 0, height = 0;
  uint64_t seed = 0;
  DropMode mode = DropMode::kDrops;  // resolved mode (mixed picks one per scene)
  Array<float> i_l, i_r;          // (3,H,W) corrupted, [0,1]
  Array<float> clean_l, clean_r;  // (3,H,W)
  Array<float> trans_l, trans_r;  // (1,H,W) in [0,1]
  Array<float> drop_l, drop_r;    // (3,H,W) waterdrop appearance
  Array<float> disp_l, disp_r;    // (1,H,W) pixels, nonnegative
  Array<float> mask_l, mask_r;    // (1,H,W) 0/1
};

namespace synth_detail {

// Smooth value noise in [lo,hi]: random lattice values, cosine-interpolated,
// two octaves.
inline Array<float> smooth_noise(int channels, int H, int W, Rng& rng, int cell,
                                 float lo, float hi) {
  Array<float> out(Shape{channels, H, W});
  auto smooth = [](double t) { return 0.5 * (1.0 - std::cos(3.14159265358979323846 * t)); };
  for (int c = 0; c < channels; ++c) {
    for (int octave = 0; octave < 2; ++octave) {
      const int step = std::max(2, cell >> octave);
      const double amp = octave == 0 ? 0.7 : 0.3;
      const int gh = H / step + 2, gw = W / step + 2;
      std::vector<double> grid(static_cast<size_t>(gh) * gw);
      for (auto& g : grid) g = rng.uniform();
      for (int y = 0; y < H; ++y) {
        const int gy = y / step;
        const double ty = smooth(static_cast<double>(y % step) / step);
        for (int x = 0; x < W; ++x) {
          const int gx = x / step;
          const double tx = smooth(static_cast<double>(x % step) / step);
          const double v00 = grid[static_cast<size_t>(gy) * gw + gx];
          const double v01 = grid[static_cast<size_t>(gy) * gw + gx + 1];
          const double v10 = grid[static_cast<size_t>(gy + 1) * gw + gx];
          const double v11 = grid[static_cast<size_t>(gy + 1) * gw + gx + 1];
          const double v = (1 - ty) * ((1 - tx) * v00 + tx * v01) +
                           ty * ((1 - tx) * v10 + tx * v11);
          out.at(c, y, x) += static_cast<float>(amp * v);
        }
      }
    }
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        out.at(c, y, x) = lo + (hi - lo) * std::min(1.0f, std::max(0.0f, out.at(c, y, x)));
  }
  return out;
}

struct Layer {
  int disparity = 0;           // pixels, constant over the layer
  Array<float> texture;        // (3, H, Wext) in left-frame coordinates
  std::vector<uint8_t> cover;  // (H, Wext) visibility in left-frame coordinates
};

inline std::vector<Layer> make_layers(const SceneSpec& spec, Rng& rng) {
  const int H = spec.height, W = spec.width;
  const int ext = W + spec.max_disparity;  // right view samples x + d
  std::vector<int> disps;
  for (int l = 0; l < spec.layers; ++l)
    disps.push_back(rng.uniform_int(spec.min_disparity, spec.max_disparity));
  std::sort(disps.begin(), disps.end());  // back (small d) to front (large d)

  std::vector<Layer> layers;
  for (int l = 0; l < spec.layers; ++l) {
    Layer layer;
    layer.disparity = disps[static_cast<size_t>(l)];
    layer.texture = smooth_noise(3, H, ext, rng, 12, 0.05f, 0.95f);
    layer.cover.assign(static_cast<size_t>(H) * ext, 0);
    if (l == 0) {
      std::fill(layer.cover.begin(), layer.cover.end(), 1);  // background covers all
    } else {
      const int blobs = rng.uniform_int(2, 4);
      for (int b = 0; b < blobs; ++b) {
        const double cy = rng.uniform(0.0, H);
        const double cx = rng.uniform(0.0, ext);
        const double ry = rng.uniform(H / 8.0, H / 3.0);
        const double rx = rng.uniform(W / 8.0, W / 3.0);
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < ext; ++x) {
            const double dy = (y - cy) / ry, dx = (x - cx) / rx;
            if (dy * dy + dx * dx <= 1.0)
              layer.cover[static_cast<size_t>(y) * ext + x] = 1;
          }
      }
    }
    layers.push_back(std::move(layer));
  }
  return layers;
}

}  // namespace synth_detail

struct BackgroundPair {
  Array<float> clean_l, clean_r;  // (3,H,W)
  Array<float> disp_l, disp_r;    // (1,H,W) pixels
  Array<float> mask_l, mask_r;    // (1,H,W) 0/1
};

// Layered scene with constant-disparity fronto-parallel layers. The right
// view shows each layer shifted left by its disparity; disparity ground truth
// comes from the frontmost visible layer, and masks mark pixels whose
// correspondent is in-bounds and shows the same layer.
inline BackgroundPair gen_background_pair(const SceneSpec& spec, Rng& rng) {
  spec.validate();
  const int H = spec.height, W = spec.width;
  auto layers = synth_detail::make_layers(spec, rng);
  const int ext = W + spec.max_disparity;

  BackgroundPair bg;
  bg.clean_l = Array<float>(Shape{3, H, W});
  bg.clean_r = Array<float>(Shape{3, H, W});
  bg.disp_l = Array<float>(Shape{1, H, W});
  bg.disp_r = Array<float>(Shape{1, H, W});
  bg.mask_l = Array<float>(Shape{1, H, W});
  bg.mask_r = Array<float>(Shape{1, H, W});

  std::vector<int> lid_l(static_cast<size_t>(H) * W, -1);
  std::vector<int> lid_r(static_cast<size_t>(H) * W, -1);

  // Back-to-front compositing; later (nearer) layers overwrite.
  for (size_t li = 0; li < layers.size(); ++li) {
    const auto& layer = layers[li];
    const int d = layer.disparity;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        if (layer.cover[static_cast<size_t>(y) * ext + x]) {
          for (int c = 0; c < 3; ++c) bg.clean_l.at(c, y, x) = layer.texture.at(c, y, x);
          bg.disp_l.at(0, y, x) = static_cast<float>(d);
          lid_l[static_cast<size_t>(y) * W + x] = static_cast<int>(li);
        }
        if (layer.cover[static_cast<size_t>(y) * ext + x + d]) {
          for (int c = 0; c < 3; ++c)
            bg.clean_r.at(c, y, x) = layer.texture.at(c, y, x + d);
          bg.disp_r.at(0, y, x) = static_cast<float>(d);
          lid_r[static_cast<size_t>(y) * W + x] = static_cast<int>(li);
        }
      }
    }
  }

  // Validity: correspondent in-bounds and unoccluded (same layer visible).
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int dl = static_cast<int>(bg.disp_l.at(0, y, x));
      const int xr = x - dl;
      bg.mask_l.at(0, y, x) =
          (xr >= 0 && lid_l[static_cast<size_t>(y) * W + x] ==
                          lid_r[static_cast<size_t>(y) * W + xr])
              ? 1.0f
              : 0.0f;
      const int dr = static_cast<int>(bg.disp_r.at(0, y, x));
      const int xl = x + dr;
      bg.mask_r.at(0, y, x) =
          (xl < W && lid_r[static_cast<size_t>(y) * W + x] ==
                         lid_l[static_cast<size_t>(y) * W + xl])
              ? 1.0f
              : 0.0f;
    }
  return bg;
}

struct DropLayer {
  Array<float> trans;  // (1,H,W) in [0,1]
  Array<float> look;   // (3,H,W) waterdrop appearance
};

// Transparency map: Gaussian-profile elliptical blobs (many tiny ones in mist
// mode). Appearance: a blurred, locally displaced copy of the clean view with
// a brightness offset, standing in for refraction.
inline DropLayer gen_waterdrops(const SceneSpec& spec, const Array<float>& clean, Rng& rng,
                                DropMode resolved_mode) {
  const int H = spec.height, W = spec.width;
  DropLayer out;
  out.trans = Array<float>(Shape{1, H, W});
  out.look = Array<float>(Shape{3, H, W});

  const bool mist = resolved_mode == DropMode::kMist;
  const int count = mist ? rng.uniform_int(spec.mist_min, spec.mist_max)
                         : rng.uniform_int(spec.drops_min, spec.drops_max);
  for (int b = 0; b < count; ++b) {
    const double cy = rng.uniform(0.0, H);
    const double cx = rng.uniform(0.0, W);
    const double ry = mist ? rng.uniform(spec.mist_radius_min, spec.mist_radius_max)
                           : rng.uniform(spec.drop_radius_min, spec.drop_radius_max);
    const double rx = mist ? rng.uniform(spec.mist_radius_min, spec.mist_radius_max)
                           : rng.uniform(spec.drop_radius_min, spec.drop_radius_max);
    const double peak = mist ? rng.uniform(spec.mist_peak_min, spec.mist_peak_max)
                             : rng.uniform(spec.drop_peak_min, spec.drop_peak_max);
    const double theta = rng.uniform(0.0, 3.14159265358979323846);
    const double ct = std::cos(theta), st = std::sin(theta);
    const int y0 = std::max(0, static_cast<int>(cy - 3 * std::max(ry, rx)));
    const int y1 = std::min(H - 1, static_cast<int>(cy + 3 * std::max(ry, rx)));
    const int x0 = std::max(0, static_cast<int>(cx - 3 * std::max(ry, rx)));
    const int x1 = std::min(W - 1, static_cast<int>(cx + 3 * std::max(ry, rx)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double oy = y - cy, ox = x - cx;
        const double ey = (ct * oy - st * ox) / ry;
        const double ex = (st * oy + ct * ox) / rx;
        const double r2 = ey * ey + ex * ex;
        if (r2 > 4.0) continue;
        const float t = static_cast<float>(peak * std::exp(-2.0 * r2));
        out.trans.at(0, y, x) = std::max(out.trans.at(0, y, x), t);
      }
  }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      out.trans.at(0, y, x) = std::min(out.trans.at(0, y, x), 0.95f);

  // Blurred base for the appearance layer.
  Array<float> blurred(Shape{3, H, W});
  const int r = 2;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        int n = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
            acc += clean.at(c, yy, xx);
            ++n;
          }
        blurred.at(c, y, x) = static_cast<float>(acc / n);
      }

  auto disp_field = synth_detail::smooth_noise(2, H, W, rng, 16, -3.0f, 3.0f);
  const float brightness = static_cast<float>(rng.uniform(0.05, 0.2));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double sy = y + disp_field.at(0, y, x);
        double sx = x + disp_field.at(1, y, x);
        sy = std::min(std::max(sy, 0.0), H - 1.0);
        sx = std::min(std::max(sx, 0.0), W - 1.0);
        const int iy = static_cast<int>(sy), ix = static_cast<int>(sx);
        const int iy1 = std::min(iy + 1, H - 1), ix1 = std::min(ix + 1, W - 1);
        const double fy = sy - iy, fx = sx - ix;
        const double v = (1 - fy) * ((1 - fx) * blurred.at(c, iy, ix) +
                                     fx * blurred.at(c, iy, ix1)) +
                         fy * ((1 - fx) * blurred.at(c, iy1, ix) +
                               fx * blurred.at(c, iy1, ix1));
        out.look.at(c, y, x) =
            std::min(1.0f, std::max(0.0f, static_cast<float>(v) + brightness));
      }
  return out;
}

// I = (1-T) o O* + T o R, elementwise; T is scalar per pixel, replicated over
// channels. Inputs in [0,1] keep the output in [0,1] (convex combination).
inline Array<float> compose(const Array<float>& clean, const Array<float>& trans,
                            const Array<float>& look) {
  if (clean.shape != look.shape)
    throw std::invalid_argument("compose: shape mismatch " + shape_str(clean.shape) +
                                " vs " + shape_str(look.shape));
  const int C = clean.shape[0], H = clean.shape[1], W = clean.shape[2];
  const bool per_channel = trans.shape == clean.shape;
  if (!per_channel && trans.shape != Shape{1, H, W})
    throw std::invalid_argument("compose: transparency shape " + shape_str(trans.shape) +
                                " matches neither (1,H,W) nor " + shape_str(clean.shape));
  for (float t : trans.data)
    if (t < 0.0f || t > 1.0f)
      throw std::invalid_argument("compose: transparency outside [0,1]");
  Array<float> out(clean.shape);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const float t = per_channel ? trans.at(c, y, x) : trans.at(0, y, x);
        const float v = (1.0f - t) * clean.at(c, y, x) + t * look.at(c, y, x);
        out.at(c, y, x) = std::min(1.0f, std::max(0.0f, v));
      }
  return out;
}

// Several corrupted takes of one clean background, mirroring a capture
// session: the scene stays fixed while the waterdrops vary.
inline std::vector<StereoSample> make_scene_samples(const SceneSpec& spec, int per_scene) {
  spec.validate();
  if (per_scene < 1) throw std::invalid_argument("make_scene_samples: per_scene >= 1");
  Rng root(spec.seed);
  Rng bg_rng = root.fork(1);
  auto bg = gen_background_pair(spec, bg_rng);

  std::vector<StereoSample> out;
  for (int k = 0; k < per_scene; ++k) {
    Rng mode_rng = root.fork(2 + 3 * static_cast<uint64_t>(k));
    Rng drop_l_rng = root.fork(3 + 3 * static_cast<uint64_t>(k));
    Rng drop_r_rng = root.fork(4 + 3 * static_cast<uint64_t>(k));

    StereoSample s;
    s.width = spec.width;
    s.height = spec.height;
    s.seed = spec.seed;
    s.mode = spec.mode == DropMode::kMixed
                 ? (mode_rng.uniform() < 0.5 ? DropMode::kDrops : DropMode::kMist)
                 : spec.mode;
    s.clean_l = bg.clean_l;
    s.clean_r = bg.clean_r;
    s.disp_l = bg.disp_l;
    s.disp_r = bg.disp_r;
    s.mask_l = bg.mask_l;
    s.mask_r = bg.mask_r;

    auto dl = gen_waterdrops(spec, s.clean_l, drop_l_rng, s.mode);
    auto dr = gen_waterdrops(spec, s.clean_r, drop_r_rng, s.mode);
    s.trans_l = std::move(dl.trans);
    s.drop_l = std::move(dl.look);
    s.trans_r = std::move(dr.trans);
    s.drop_r = std::move(dr.look);

    s.i_l = compose(s.clean_l, s.trans_l, s.drop_l);
    s.i_r = compose(s.clean_r, s.trans_r, s.drop_r);
    out.push_back(std::move(s));
  }
  return out;
}

inline StereoSample make_sample(const SceneSpec& spec) {
  return make_scene_samples(spec, 1)[0];
}

}  // namespace swd
