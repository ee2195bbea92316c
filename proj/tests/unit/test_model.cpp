#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "helpers.hpp"
#include "swd/config.hpp"
#include "swd/gradcheck.hpp"
#include "swd/model.hpp"

using namespace swd;
using swd::test::random_tensor;

namespace {

ModelConfig tiny_model_config(const std::string& variant) {
  ModelConfig mc;
  mc.width = 32;
  mc.height = 32;
  mc.encoder.stem_channels = 4;
  mc.encoder.channels = {4, 6, 8};
  mc.variant = variant_from_name(variant);
  return mc;
}

}  // namespace

TEST_CASE("variant registry resolves the named rows of the ablation table", "[model]") {
  auto def = variant_from_name("default");
  CHECK(def.attention ==
        std::array<AttentionKind, 3>{AttentionKind::kRda, AttentionKind::kRda,
                                     AttentionKind::kTypical});
  CHECK(def.rows == 3);
  CHECK(def.stride == 2);
  CHECK(def.disparity_concat);
  CHECK_FALSE(def.mono);
  CHECK_FALSE(def.alpha_override.has_value());

  CHECK(variant_from_name("TTT").attention ==
        std::array<AttentionKind, 3>{AttentionKind::kTypical, AttentionKind::kTypical,
                                     AttentionKind::kTypical});
  CHECK(variant_from_name("RTT").attention ==
        std::array<AttentionKind, 3>{AttentionKind::kRda, AttentionKind::kTypical,
                                     AttentionKind::kTypical});
  CHECK(variant_from_name("RRR").attention ==
        std::array<AttentionKind, 3>{AttentionKind::kRda, AttentionKind::kRda,
                                     AttentionKind::kRda});
  CHECK(variant_from_name("FD").value_dilated);
  CHECK(variant_from_name("1row").rows == 1);
  CHECK(variant_from_name("1row").stride == 1);
  CHECK(variant_from_name("5row").rows == 5);
  CHECK(variant_from_name("5row").stride == 2);
  CHECK_FALSE(variant_from_name("nocat").disparity_concat);
  CHECK(*variant_from_name("noAC").alpha_override == 0.0);
  CHECK_THROWS_AS(variant_from_name("bogus"), std::invalid_argument);
}

TEST_CASE("RRR and default differ only in level-3 attention parameters", "[model]") {
  auto md = build_model<float>(tiny_model_config("default"), 1);
  auto mr = build_model<float>(tiny_model_config("RRR"), 1);
  std::set<std::string> nd, nr;
  for (const auto& n : md.store.names()) nd.insert(n);
  for (const auto& n : mr.store.names()) nr.insert(n);

  std::set<std::string> only_rrr;
  for (const auto& n : nr)
    if (!nd.count(n)) only_rrr.insert(n);
  std::set<std::string> only_def;
  for (const auto& n : nd)
    if (!nr.count(n)) only_def.insert(n);

  CHECK(only_def.empty());
  CHECK(only_rrr == std::set<std::string>{"att.l3.k1p.w", "att.l3.k1p.b", "att.l3.k2p.w",
                                          "att.l3.k2p.b", "att.l3.k2.w", "att.l3.k2.b",
                                          "att.l3.k4.w", "att.l3.k4.b"});
}

TEST_CASE("model build is deterministic in the seed", "[model]") {
  auto a = build_model<float>(tiny_model_config("default"), 5);
  auto b = build_model<float>(tiny_model_config("default"), 5);
  for (const auto& [name, t] : a.store) CHECK(b.store.get(name).val() == t.val());
  auto c = build_model<float>(tiny_model_config("default"), 6);
  CHECK(c.store.get("enc.stem.w").val() != a.store.get("enc.stem.w").val());
}

TEST_CASE("full forward produces the documented shapes", "[model]") {
  auto mc = tiny_model_config("default");
  auto m = build_model<float>(mc, 2);
  Rng rng(3);
  Array<float> il(Shape{2, 3, 32, 32});
  Array<float> ir(Shape{2, 3, 32, 32});
  for (auto& v : il.data) v = static_cast<float>(rng.uniform());
  for (auto& v : ir.data) v = static_cast<float>(rng.uniform());
  auto out = model_forward(m, Tensor<float>::leaf(il), Tensor<float>::leaf(ir));

  CHECK(out.out_l.shape() == Shape{2, 3, 32, 32});
  CHECK(out.out_r.shape() == Shape{2, 3, 32, 32});
  CHECK(out.disp_l[0].shape() == Shape{2, 1, 8, 8});
  CHECK(out.disp_l[1].shape() == Shape{2, 1, 4, 4});
  CHECK(out.disp_l[2].shape() == Shape{2, 1, 2, 2});
  CHECK(out.D_l[0].shape() == Shape{2, 1, 8, 8});

  // Eq-10 anchor: the coarsest merged map is the coarsest estimate itself.
  CHECK(out.D_l[2].node().get() == out.disp_l[2].node().get());
  CHECK(out.D_r[2].node().get() == out.disp_r[2].node().get());
}

TEST_CASE("per-view independence holds for nocat with zero output projections",
          "[model]") {
  auto mc = tiny_model_config("nocat");
  auto m = build_model<float>(mc, 4);  // k6 kernels are zero-initialized
  Rng rng(5);
  Array<float> il(Shape{1, 3, 32, 32});
  Array<float> ir(Shape{1, 3, 32, 32});
  for (auto& v : il.data) v = static_cast<float>(rng.uniform());
  for (auto& v : ir.data) v = static_cast<float>(rng.uniform());

  auto base = model_forward(m, Tensor<float>::leaf(il), Tensor<float>::leaf(ir));
  Array<float> ir2 = ir;
  for (auto& v : ir2.data) v = 1.0f - v;  // drastic change of the right view
  auto moved = model_forward(m, Tensor<float>::leaf(il), Tensor<float>::leaf(ir2));

  // With the attention projection zeroed and no disparity feedback, the left
  // output depends on the right view only through attention results that are
  // currently cut off.
  CHECK(base.out_l.val() == moved.out_l.val());
  CHECK(base.out_r.val() != moved.out_r.val());
}

TEST_CASE("disparity concatenation feeds the next level by default", "[model]") {
  auto mc = tiny_model_config("default");
  auto m = build_model<float>(mc, 6);
  // Level 1 and 2 attention kernels expect one extra input channel.
  CHECK(m.store.get("att.l1.k1.w").shape()[1] == mc.encoder.channels[0] + 1);
  CHECK(m.store.get("att.l2.k1.w").shape()[1] == mc.encoder.channels[1] + 1);
  CHECK(m.store.get("att.l3.k1.w").shape()[1] == mc.encoder.channels[2]);

  auto mn = build_model<float>(tiny_model_config("nocat"), 6);
  CHECK(mn.store.get("att.l1.k1.w").shape()[1] == mc.encoder.channels[0]);
}

TEST_CASE("FD variant adds dilated value kernels", "[model]") {
  auto m = build_model<float>(tiny_model_config("FD"), 7);
  CHECK(m.store.has("att.l1.k5p.w"));
  CHECK(m.store.has("att.l1.k5d.w"));
  auto md = build_model<float>(tiny_model_config("default"), 7);
  CHECK_FALSE(md.store.has("att.l1.k5p.w"));
}

TEST_CASE("model config text round-trips", "[model]") {
  for (const std::string name :
       {"default", "TTT", "RTT", "RRR", "FD", "1row", "5row", "mono", "nocat", "noAC"}) {
    auto mc = tiny_model_config(name);
    auto back = model_config_from_text(model_config_to_text(mc));
    CHECK(back.width == mc.width);
    CHECK(back.height == mc.height);
    CHECK(back.encoder.channels == mc.encoder.channels);
    CHECK(back.variant.name == mc.variant.name);
    CHECK(back.variant.attention == mc.variant.attention);
    CHECK(back.variant.value_dilated == mc.variant.value_dilated);
    CHECK(back.variant.rows == mc.variant.rows);
    CHECK(back.variant.stride == mc.variant.stride);
    CHECK(back.variant.mono == mc.variant.mono);
    CHECK(back.variant.disparity_concat == mc.variant.disparity_concat);
    CHECK(back.variant.alpha_override.has_value() == mc.variant.alpha_override.has_value());
  }
}

TEST_CASE("gradcheck of the total loss through the whole model", "[model][gradcheck]") {
  ModelConfig mc;
  mc.width = 16;
  mc.height = 16;
  mc.encoder.stem_channels = 2;
  mc.encoder.channels = {2, 3, 4};
  mc.variant = variant_from_name("default");
  auto m = build_model<double>(mc, 8);

  Rng rng(9);
  auto mk_img = [&] {
    Array<double> a(Shape{1, 3, 16, 16});
    for (auto& v : a.data) v = rng.uniform();
    return Tensor<double>::leaf(std::move(a));
  };
  auto i_l = mk_img(), i_r = mk_img(), clean_l = mk_img(), clean_r = mk_img();
  Array<double> gt(Shape{1, 1, 4, 4});
  for (auto& v : gt.data) v = rng.uniform(0.0, 2.0);
  auto gt_l = Tensor<double>::leaf(gt), gt_r = Tensor<double>::leaf(gt);
  auto mask = Tensor<double>::full(Shape{1, 1, 4, 4}, 1.0);
  LossConfig lcfg;

  auto report = gradcheck(m.store.trainable(), [&] {
    auto out = model_forward(m, i_l, i_r);
    auto lp = perceptual_loss(out.out_l, out.out_r, clean_l, clean_r, m.extractor, lcfg);
    auto lc = attention_consistency_loss(out.D_l[0], out.D_r[0], gt_l, gt_r, mask, mask);
    return scalar_mul(total_loss(lp, lc, lcfg.alpha), 0.01);
  });
  INFO("max rel err " << report.max_rel_err());
  CHECK(report.pass(1e-4));
}
