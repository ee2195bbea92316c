#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "swd/decoder.hpp"
#include "swd/disparity.hpp"
#include "swd/encoder.hpp"
#include "swd/losses.hpp"
#include "swd/rda.hpp"

namespace swd {

enum class AttentionKind { kTypical, kRda };

// One row of the ablation table. Levels are listed 1..3; the default uses RDA
// on levels 1-2 and typical attention on level 3.
struct VariantSpec {
  std::string name = "default";
  std::array<AttentionKind, 3> attention{AttentionKind::kRda, AttentionKind::kRda,
                                         AttentionKind::kTypical};
  bool value_dilated = false;    // "FD": dilated branch on the value too
  int rows = 3;
  int stride = 2;
  bool mono = false;             // duplicate one view as both inputs
  bool disparity_concat = true;  // "nocat" disables the feedback channel
  std::optional<double> alpha_override;  // "noAC"/"mono": consistency weight forced to 0
};

inline VariantSpec variant_from_name(const std::string& name) {
  VariantSpec v;
  v.name = name;
  if (name == "default" || name == "ours") {
    v.name = "default";
  } else if (name == "TTT") {
    v.attention = {AttentionKind::kTypical, AttentionKind::kTypical, AttentionKind::kTypical};
  } else if (name == "RTT") {
    v.attention = {AttentionKind::kRda, AttentionKind::kTypical, AttentionKind::kTypical};
  } else if (name == "RRR") {
    v.attention = {AttentionKind::kRda, AttentionKind::kRda, AttentionKind::kRda};
  } else if (name == "FD") {
    v.value_dilated = true;
  } else if (name == "1row") {
    v.rows = 1;
    v.stride = 1;
  } else if (name == "5row") {
    v.rows = 5;
    v.stride = 2;
  } else if (name == "mono") {
    v.mono = true;
    v.alpha_override = 0.0;
  } else if (name == "nocat") {
    v.disparity_concat = false;
  } else if (name == "noAC") {
    v.alpha_override = 0.0;
  } else {
    throw std::invalid_argument("unknown variant '" + name +
                                "' (expected default|TTT|RTT|RRR|FD|1row|5row|mono|nocat|noAC)");
  }
  return v;
}

struct ModelConfig {
  int width = 96;   // image width, multiple of 16
  int height = 48;  // image height, multiple of 16
  EncoderConfig encoder;
  VariantSpec variant;
  uint64_t extractor_seed = 0;

  int level_h(int level) const { return height / kLevelStride[static_cast<size_t>(level - 1)]; }
  int level_w(int level) const { return width / kLevelStride[static_cast<size_t>(level - 1)]; }
};

template <typename T>
struct Model {
  ModelConfig cfg;
  ParamStore<T> store;
  EncoderParams<T> enc;
  std::array<RdaLevelParams<T>, 3> att;  // index 0 = level 1
  Tensor<T> merge1_w, merge1_b;          // fuse level-2 disparity into level 1
  Tensor<T> merge2_w, merge2_b;          // fuse level-3 disparity into level 2
  DecoderParams<T> dec;
  FeatureExtractorParams<T> extractor;
};

// Builds every parameter of the network for one variant. Creation order is
// fixed, so a given seed always produces the same initialization.
template <typename T>
Model<T> build_model(const ModelConfig& cfg, uint64_t seed) {
  Model<T> m;
  m.cfg = cfg;
  Rng rng(seed);
  m.enc = make_encoder_params(m.store, cfg.encoder, rng);
  const bool cat = cfg.variant.disparity_concat;
  for (int i = 0; i < 3; ++i) {
    const int ch = cfg.encoder.channels[static_cast<size_t>(i)] + ((cat && i < 2) ? 1 : 0);
    m.att[static_cast<size_t>(i)] = make_attention_params(
        m.store, i + 1, ch, cfg.variant.attention[static_cast<size_t>(i)] == AttentionKind::kRda,
        cfg.variant.value_dilated, rng);
  }
  m.merge2_w = m.store.add_he_normal("disp.merge.l2.w", {1, 2, 3, 3}, rng, 18);
  m.merge2_b = m.store.add_zeros("disp.merge.l2.b", {1});
  m.merge1_w = m.store.add_he_normal("disp.merge.l1.w", {1, 2, 3, 3}, rng, 18);
  m.merge1_b = m.store.add_zeros("disp.merge.l1.b", {1});
  const int width = cfg.encoder.channels[2];
  const std::array<int, 3> refined_ch{
      cfg.encoder.channels[2],
      cfg.encoder.channels[1] + (cat ? 1 : 0),
      cfg.encoder.channels[0] + (cat ? 1 : 0),
  };
  m.dec = make_decoder_params(m.store, width, refined_ch, rng, cfg.encoder.in_channels);
  m.extractor = make_extractor_params<T>(m.store, cfg.extractor_seed, cfg.encoder.in_channels);
  return m;
}

template <typename T>
struct ModelOutput {
  Tensor<T> out_l, out_r;                 // linear RGB, unclamped
  std::array<Tensor<T>, 3> disp_l, disp_r;  // per-level soft-argmax maps
  std::array<Tensor<T>, 3> D_l, D_r;        // merged maps; D[2] == disp[2]
  std::array<AttentionResult<T>, 3> att_l, att_r;
};

// Full restoration pass over one stereo batch. Attention runs coarsest level
// first so its disparity can be injected below; both directions share each
// level's kernels.
template <typename T>
ModelOutput<T> model_forward(const Model<T>& m, const Tensor<T>& I_l, const Tensor<T>& I_r) {
  const VariantSpec& v = m.cfg.variant;
  auto pyr_l = encode(m.enc, I_l);
  auto pyr_r = encode(m.enc, I_r);

  ModelOutput<T> out;
  for (int level = 3; level >= 1; --level) {
    const size_t li = static_cast<size_t>(level - 1);
    Tensor<T> f_l = pyr_l.level(level);
    Tensor<T> f_r = pyr_r.level(level);
    if (level < 3) {
      f_l = inject_disparity(f_l, out.D_l[li + 1], v.disparity_concat);
      f_r = inject_disparity(f_r, out.D_r[li + 1], v.disparity_concat);
    }
    const auto& ap = m.att[li];
    out.att_l[li] = attention_forward(f_l, f_r, ap, v.rows, v.stride);
    out.att_r[li] = attention_forward(f_r, f_l, ap, v.rows, v.stride);

    const int h = f_l.shape()[2], w = f_l.shape()[3];
    out.disp_l[li] = soft_argmax_disp(out.att_l[li], h, w);
    out.disp_r[li] = soft_argmax_disp(out.att_r[li], h, w);
    if (level == 3) {
      out.D_l[li] = out.disp_l[li];
      out.D_r[li] = out.disp_r[li];
    } else {
      const auto& mw = level == 2 ? m.merge2_w : m.merge1_w;
      const auto& mb = level == 2 ? m.merge2_b : m.merge1_b;
      out.D_l[li] = merge_disp(out.D_l[li + 1], out.disp_l[li], mw, mb);
      out.D_r[li] = merge_disp(out.D_r[li + 1], out.disp_r[li], mw, mb);
    }
  }

  out.out_l = decode(pyr_l.level(3),
                     {out.att_l[0].refined, out.att_l[1].refined, out.att_l[2].refined}, m.dec);
  out.out_r = decode(pyr_r.level(3),
                     {out.att_r[0].refined, out.att_r[1].refined, out.att_r[2].refined}, m.dec);
  return out;
}

}  // namespace swd
