#pragma once

#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "swd/adam.hpp"
#include "swd/checkpoint.hpp"
#include "swd/config.hpp"
#include "swd/losses.hpp"
#include "swd/model.hpp"
#include "swd/sample_io.hpp"

namespace swd {

// ---------------------------------------------------------------------------
// Stereo-consistent augmentation.

inline Array<float> flip_h(const Array<float>& a) {
  const size_t r = a.shape.size();
  const int H = a.shape[r - 2], W = a.shape[r - 1];
  const int C = static_cast<int>(a.numel()) / (H * W);
  Array<float> out(a.shape);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) out.at(c, y, x) = a.at(c, y, W - 1 - x);
  return out;
}

inline Array<float> flip_v(const Array<float>& a) {
  const size_t r = a.shape.size();
  const int H = a.shape[r - 2], W = a.shape[r - 1];
  const int C = static_cast<int>(a.numel()) / (H * W);
  Array<float> out(a.shape);
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) out.at(c, y, x) = a.at(c, H - 1 - y, x);
  return out;
}

// Horizontal flip must swap the views: mirroring alone would make left-of
// geometry invalid (disparity would change sign). Values of the disparity
// maps are unchanged; masks travel with their view.
inline StereoSample hflip_sample(const StereoSample& s) {
  StereoSample o = s;
  o.i_l = flip_h(s.i_r);
  o.i_r = flip_h(s.i_l);
  o.clean_l = flip_h(s.clean_r);
  o.clean_r = flip_h(s.clean_l);
  o.trans_l = flip_h(s.trans_r);
  o.trans_r = flip_h(s.trans_l);
  o.drop_l = flip_h(s.drop_r);
  o.drop_r = flip_h(s.drop_l);
  o.disp_l = flip_h(s.disp_r);
  o.disp_r = flip_h(s.disp_l);
  o.mask_l = flip_h(s.mask_r);
  o.mask_r = flip_h(s.mask_l);
  return o;
}

// Vertical flip keeps the views and disparities; epipolar lines are rows.
inline StereoSample vflip_sample(const StereoSample& s) {
  StereoSample o = s;
  o.i_l = flip_v(s.i_l);
  o.i_r = flip_v(s.i_r);
  o.clean_l = flip_v(s.clean_l);
  o.clean_r = flip_v(s.clean_r);
  o.trans_l = flip_v(s.trans_l);
  o.trans_r = flip_v(s.trans_r);
  o.drop_l = flip_v(s.drop_l);
  o.drop_r = flip_v(s.drop_r);
  o.disp_l = flip_v(s.disp_l);
  o.disp_r = flip_v(s.disp_r);
  o.mask_l = flip_v(s.mask_l);
  o.mask_r = flip_v(s.mask_r);
  return o;
}

inline StereoSample augment(const StereoSample& s, Rng& rng) {
  const bool do_h = rng.uniform() < 0.5;
  const bool do_v = rng.uniform() < 0.5;
  StereoSample out = s;
  if (do_h) out = hflip_sample(out);
  if (do_v) out = vflip_sample(out);
  return out;
}

// ---------------------------------------------------------------------------
// Batch assembly. Ground-truth disparity and masks are converted to level-1
// resolution and units here, once per batch.

struct BatchTensors {
  Tensor<float> i_l, i_r;
  Tensor<float> clean_l, clean_r;
  Tensor<float> gt_l, gt_r;  // level-1 cells
  Tensor<float> m_l, m_r;
};

namespace trainer_detail {

template <typename Get>
Tensor<float> stack(const std::vector<StereoSample>& ss, Get get) {
  const Array<float>& first = get(ss[0]);
  Shape shape = first.shape;
  shape.insert(shape.begin(), static_cast<int>(ss.size()));
  Array<float> out(shape);
  size_t off = 0;
  for (const auto& s : ss) {
    const Array<float>& a = get(s);
    if (a.shape != first.shape)
      throw std::invalid_argument("batch: sample shape mismatch " + shape_str(a.shape) +
                                  " vs " + shape_str(first.shape));
    std::copy(a.data.begin(), a.data.end(), out.data.begin() + off);
    off += a.numel();
  }
  return Tensor<float>::leaf(std::move(out));
}

}  // namespace trainer_detail

// `mono_pick_left`, when present, must have one entry per sample: the batch is
// built from that view duplicated on both sides.
inline BatchTensors make_batch(const std::vector<StereoSample>& ss,
                               const std::vector<bool>* mono_pick_left = nullptr) {
  if (ss.empty()) throw std::invalid_argument("make_batch: empty batch");
  using trainer_detail::stack;
  BatchTensors bt;
  auto ds_disp = [](const StereoSample& s, bool left) {
    return left ? downsample_disparity_to_level1(s.disp_l, s.mask_l)
                : downsample_disparity_to_level1(s.disp_r, s.mask_r);
  };
  auto ds_mask = [](const StereoSample& s, bool left) {
    return left ? downsample_mask_to_level1(s.mask_l) : downsample_mask_to_level1(s.mask_r);
  };
  if (!mono_pick_left) {
    bt.i_l = stack(ss, [](const StereoSample& s) -> const Array<float>& { return s.i_l; });
    bt.i_r = stack(ss, [](const StereoSample& s) -> const Array<float>& { return s.i_r; });
    bt.clean_l =
        stack(ss, [](const StereoSample& s) -> const Array<float>& { return s.clean_l; });
    bt.clean_r =
        stack(ss, [](const StereoSample& s) -> const Array<float>& { return s.clean_r; });
    std::vector<Array<float>> gl, gr, ml, mr;
    Shape gshape;
    for (const auto& s : ss) {
      gl.push_back(ds_disp(s, true));
      gr.push_back(ds_disp(s, false));
      ml.push_back(ds_mask(s, true));
      mr.push_back(ds_mask(s, false));
    }
    auto stack_arrays = [&](std::vector<Array<float>>& arrs) {
      Shape shape = arrs[0].shape;  // (1,1,h,w)
      shape[0] = static_cast<int>(arrs.size());
      Array<float> out(shape);
      size_t off = 0;
      for (auto& a : arrs) {
        std::copy(a.data.begin(), a.data.end(), out.data.begin() + off);
        off += a.numel();
      }
      return Tensor<float>::leaf(std::move(out));
    };
    bt.gt_l = stack_arrays(gl);
    bt.gt_r = stack_arrays(gr);
    bt.m_l = stack_arrays(ml);
    bt.m_r = stack_arrays(mr);
    return bt;
  }

  // Mono: the chosen view plays both roles.
  if (mono_pick_left->size() != ss.size())
    throw std::invalid_argument("make_batch: mono picks do not match batch size");
  std::vector<StereoSample> dup;
  dup.reserve(ss.size());
  for (size_t i = 0; i < ss.size(); ++i) {
    const bool left = (*mono_pick_left)[i];
    StereoSample d = ss[i];
    if (left) {
      d.i_r = d.i_l;
      d.clean_r = d.clean_l;
      d.disp_r = d.disp_l;
      d.mask_r = d.mask_l;
    } else {
      d.i_l = d.i_r;
      d.clean_l = d.clean_r;
      d.disp_l = d.disp_r;
      d.mask_l = d.mask_r;
    }
    dup.push_back(std::move(d));
  }
  return make_batch(dup, nullptr);
}

// ---------------------------------------------------------------------------
// Checkpoint glue.

template <typename T>
std::map<std::string, Array<float>> snapshot_model(const Model<T>& m,
                                                   const AdamState<T>& adam, int epoch,
                                                   int step) {
  std::map<std::string, Array<float>> out;
  for (const auto& [name, t] : m.store)
    out.emplace(name, t.to_array().template cast<float>());
  for (const auto& [name, mo] : adam.m) {
    Array<T> a(m.store.get(name).shape(), mo);
    out.emplace("adam.m." + name, a.template cast<float>());
  }
  for (const auto& [name, vo] : adam.v) {
    Array<T> a(m.store.get(name).shape(), vo);
    out.emplace("adam.v." + name, a.template cast<float>());
  }
  out.emplace("meta.epoch", Array<float>(Shape{1}, {static_cast<float>(epoch)}));
  out.emplace("meta.step", Array<float>(Shape{1}, {static_cast<float>(step)}));
  out.emplace("meta.adam_t", Array<float>(Shape{1}, {static_cast<float>(adam.t)}));
  out.emplace("meta.config", text_to_array(model_config_to_text(m.cfg)));
  return out;
}

struct LoadedModel {
  Model<float> model;
  AdamState<float> adam;
  int epoch = 0;
  int step = 0;
};

inline LoadedModel load_model_checkpoint(const std::string& path) {
  auto tensors = read_checkpoint(path);
  auto it = tensors.find("meta.config");
  if (it == tensors.end()) throw FormatError("checkpoint " + path + " lacks meta.config");
  ModelConfig mc = model_config_from_text(array_to_text(it->second));

  LoadedModel lm;
  lm.model = build_model<float>(mc, 0);
  for (const auto& [name, t] : lm.model.store) {
    auto found = tensors.find(name);
    if (found == tensors.end())
      throw FormatError("checkpoint " + path + " missing parameter '" + name + "'");
    if (found->second.shape != t.shape())
      throw FormatError("checkpoint " + path + " parameter '" + name + "' has shape " +
                        shape_str(found->second.shape) + ", expected " +
                        shape_str(t.shape()));
    auto tt = t;
    tt.mutable_val() = found->second.data;
  }
  for (const auto& [name, a] : tensors) {
    if (name.rfind("adam.m.", 0) == 0) lm.adam.m[name.substr(7)] = a.data;
    if (name.rfind("adam.v.", 0) == 0) lm.adam.v[name.substr(7)] = a.data;
  }
  if (tensors.count("meta.adam_t"))
    lm.adam.t = static_cast<int64_t>(tensors.at("meta.adam_t").data[0]);
  if (tensors.count("meta.epoch"))
    lm.epoch = static_cast<int>(tensors.at("meta.epoch").data[0]);
  if (tensors.count("meta.step"))
    lm.step = static_cast<int>(tensors.at("meta.step").data[0]);
  return lm;
}

// ---------------------------------------------------------------------------
// Training loop.

struct StepLog {
  int step = 0;
  int epoch = 0;
  double lr = 0.0;
  double loss_p = 0.0;
  double loss_c = 0.0;
  double loss_total = 0.0;
};

struct TrainResult {
  bool halted_nonfinite = false;
  std::string halt_reason;
  int steps = 0;
  std::vector<StepLog> log;
  std::string checkpoint_path;
};

inline void write_metrics_csv(const std::string& path, const std::vector<StepLog>& log) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open " + path + " for writing");
  os << "step,epoch,lr,loss_p,loss_c,loss_total\n";
  for (const auto& l : log)
    os << l.step << "," << l.epoch << "," << l.lr << "," << l.loss_p << "," << l.loss_c
       << "," << l.loss_total << "\n";
}

inline TrainResult train(const TrainConfig& cfg, const std::vector<StereoSample>& samples) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("train: no samples");
  for (const auto& s : samples)
    if (s.width != cfg.width || s.height != cfg.height)
      throw std::invalid_argument("train: sample dims " + std::to_string(s.width) + "x" +
                                  std::to_string(s.height) + " do not match config " +
                                  std::to_string(cfg.width) + "x" +
                                  std::to_string(cfg.height));

  const ModelConfig mcfg = model_config_from_train(cfg);
  auto model = build_model<float>(mcfg, cfg.seed);
  const double alpha_eff = mcfg.variant.alpha_override.value_or(cfg.alpha);
  LossConfig lcfg;
  lcfg.lambda = cfg.lambda;
  lcfg.alpha = alpha_eff;
  lcfg.extractor_seed = cfg.extractor_seed;

  AdamState<float> adam;
  auto trainables = model.store.trainable();
  Rng rng(cfg.seed ^ 0xA5A5A5A5ULL);

  TrainResult res;
  int step = 0;
  bool saved = false;

  std::vector<size_t> order(samples.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs && !res.halted_nonfinite; ++epoch) {
    const double lr_e = cfg.lr_at_epoch(epoch);
    // Fisher-Yates with the run rng.
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);

    for (size_t b = 0; b < order.size(); b += static_cast<size_t>(cfg.batch)) {
      std::vector<StereoSample> batch;
      std::vector<bool> mono_left;
      for (size_t i = b; i < std::min(order.size(), b + static_cast<size_t>(cfg.batch)); ++i) {
        const auto& s = samples[order[i]];
        batch.push_back(cfg.augment ? swd::augment(s, rng) : s);
        if (mcfg.variant.mono) mono_left.push_back(rng.uniform() < 0.5);
      }
      try {
        auto bt = make_batch(batch, mcfg.variant.mono ? &mono_left : nullptr);
        auto out = model_forward(model, bt.i_l, bt.i_r);
        auto lp = perceptual_loss(out.out_l, out.out_r, bt.clean_l, bt.clean_r,
                                  model.extractor, lcfg);
        auto lc = attention_consistency_loss(out.D_l[0], out.D_r[0], bt.gt_l, bt.gt_r,
                                             bt.m_l, bt.m_r);
        auto total = total_loss(lp, lc, static_cast<float>(alpha_eff));
        model.store.zero_grad();
        backward(total);
        adam_step(trainables, adam, lr_e);

        ++step;
        res.log.push_back(StepLog{step, epoch, lr_e, static_cast<double>(lp.item()),
                                  static_cast<double>(lc.item()),
                                  static_cast<double>(total.item())});
      } catch (const NumericError& e) {
        // Halt and leave the last cadence checkpoint in place.
        res.halted_nonfinite = true;
        res.halt_reason = e.what();
        break;
      }
    }
    if (!res.halted_nonfinite && cfg.save_every > 0 && epoch % cfg.save_every == 0) {
      write_checkpoint(cfg.out_checkpoint, snapshot_model(model, adam, epoch, step));
      res.checkpoint_path = cfg.out_checkpoint;
      saved = true;
    }
  }
  res.steps = step;
  if (!res.halted_nonfinite) {
    write_checkpoint(cfg.out_checkpoint, snapshot_model(model, adam, cfg.epochs, step));
    res.checkpoint_path = cfg.out_checkpoint;
  } else if (!saved) {
    res.checkpoint_path.clear();
  }
  if (!cfg.log_csv.empty()) write_metrics_csv(cfg.log_csv, res.log);
  return res;
}

inline TrainResult train(const TrainConfig& cfg) {
  auto dirs = list_sample_dirs(cfg.data_dir);
  if (dirs.empty()) throw FormatError("train: no samples under " + cfg.data_dir);
  std::vector<StereoSample> samples;
  for (const auto& d : dirs) samples.push_back(read_sample(d));
  return train(cfg, samples);
}

// ---------------------------------------------------------------------------
// Inference: one forward pass, outputs clamped to [0,1]. Mono checkpoints run
// once per view with that view duplicated.

struct InferResult {
  Array<float> out_l, out_r;    // (3,H,W) in [0,1]
  Array<float> disp_l, disp_r;  // (1,h1,w1), level-1 cells
};

namespace trainer_detail {

inline Tensor<float> as_batch1(const Array<float>& a) {
  Shape s = a.shape;
  s.insert(s.begin(), 1);
  return Tensor<float>::leaf(Array<float>(s, a.data));
}

inline Array<float> clamp01_chw(const Tensor<float>& t) {
  const Shape& s = t.shape();  // (1,C,H,W)
  Array<float> out(Shape{s[1], s[2], s[3]});
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = std::min(1.0f, std::max(0.0f, t.val()[i]));
  return out;
}

inline Array<float> squeeze_batch(const Tensor<float>& t) {
  const Shape& s = t.shape();
  return Array<float>(Shape{s[1], s[2], s[3]}, t.val());
}

}  // namespace trainer_detail

inline InferResult infer(const Model<float>& m, const Array<float>& i_l,
                         const Array<float>& i_r) {
  const Shape want{3, m.cfg.height, m.cfg.width};
  if (i_l.shape != want || i_r.shape != want)
    throw std::invalid_argument("infer: input dims " + shape_str(i_l.shape) +
                                " do not match checkpoint config " + shape_str(want));
  using trainer_detail::as_batch1;
  InferResult r;
  if (!m.cfg.variant.mono) {
    auto out = model_forward(m, as_batch1(i_l), as_batch1(i_r));
    r.out_l = trainer_detail::clamp01_chw(out.out_l);
    r.out_r = trainer_detail::clamp01_chw(out.out_r);
    r.disp_l = trainer_detail::squeeze_batch(out.D_l[0]);
    r.disp_r = trainer_detail::squeeze_batch(out.D_r[0]);
  } else {
    auto left = model_forward(m, as_batch1(i_l), as_batch1(i_l));
    auto right = model_forward(m, as_batch1(i_r), as_batch1(i_r));
    r.out_l = trainer_detail::clamp01_chw(left.out_l);
    r.out_r = trainer_detail::clamp01_chw(right.out_r);
    r.disp_l = trainer_detail::squeeze_batch(left.D_l[0]);
    r.disp_r = trainer_detail::squeeze_batch(right.D_r[0]);
  }
  return r;
}

}  // namespace swd
