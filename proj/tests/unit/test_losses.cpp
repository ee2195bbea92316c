#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "swd/gradcheck.hpp"
#include "swd/losses.hpp"

using namespace swd;
using swd::test::max_abs_diff;
using swd::test::random_tensor;

TEST_CASE("extractor taps sit at strides 1, 2, 4, 8", "[losses]") {
  ParamStore<double> store;
  auto p = make_extractor_params(store, 0);
  Rng rng(81);
  auto img = random_tensor<double>(Shape{1, 3, 96, 48}, rng, 0.2);
  auto taps = feature_extract(img, p);
  CHECK(taps[0].shape()[2] == 96);
  CHECK(taps[0].shape()[3] == 48);
  CHECK(taps[1].shape()[2] == 48);
  CHECK(taps[1].shape()[3] == 24);
  CHECK(taps[2].shape()[2] == 24);
  CHECK(taps[2].shape()[3] == 12);
  CHECK(taps[3].shape()[2] == 12);
  CHECK(taps[3].shape()[3] == 6);
}

TEST_CASE("extractor weights are frozen and seed-deterministic", "[losses]") {
  ParamStore<double> a, b;
  auto pa = make_extractor_params(a, 0);
  auto pb = make_extractor_params(b, 0);
  for (int t = 0; t < 4; ++t) {
    CHECK(pa.w[t].val() == pb.w[t].val());  // byte-identical across runs
    CHECK_FALSE(pa.w[t].requires_grad());
  }
  ParamStore<double> c;
  auto pc = make_extractor_params(c, 1);
  CHECK(pa.w[0].val() != pc.w[0].val());
}

TEST_CASE("identical images produce identical features", "[losses]") {
  ParamStore<double> store;
  auto p = make_extractor_params(store, 3);
  Rng rng(82);
  auto img = random_tensor<double>(Shape{1, 3, 32, 32}, rng, 0.2);
  auto t1 = feature_extract(img, p);
  auto t2 = feature_extract(img, p);
  for (int t = 0; t < 4; ++t) CHECK(max_abs_diff(t1[t].val(), t2[t].val()) == 0.0);
}

TEST_CASE("perceptual loss vanishes when outputs equal the clean pair", "[losses]") {
  ParamStore<double> store;
  auto p = make_extractor_params(store, 0);
  Rng rng(83);
  auto l = random_tensor<double>(Shape{1, 3, 32, 32}, rng, 0.2);
  auto r = random_tensor<double>(Shape{1, 3, 32, 32}, rng, 0.2);
  LossConfig cfg;
  CHECK(perceptual_loss(l, r, l, r, p, cfg).item() == 0.0);
}

TEST_CASE("perceptual loss is linear in the tap weights", "[losses]") {
  ParamStore<double> store;
  auto p = make_extractor_params(store, 0);
  Rng rng(84);
  auto out_l = random_tensor<double>(Shape{1, 3, 32, 32}, rng, 0.2);
  auto out_r = random_tensor<double>(Shape{1, 3, 32, 32}, rng, 0.2);
  auto clean_l = random_tensor<double>(Shape{1, 3, 32, 32}, rng, 0.2);
  auto clean_r = random_tensor<double>(Shape{1, 3, 32, 32}, rng, 0.2);
  LossConfig cfg;
  CHECK(cfg.lambda == std::array<double, 4>{1.0, 0.5, 0.4, 1.0});
  const double base = perceptual_loss(out_l, out_r, clean_l, clean_r, p, cfg).item();
  LossConfig doubled = cfg;
  for (auto& l : doubled.lambda) l *= 2.0;
  const double twice = perceptual_loss(out_l, out_r, clean_l, clean_r, p, doubled).item();
  CHECK(twice == Catch::Approx(2.0 * base).margin(1e-12));
}

TEST_CASE("perceptual loss is symmetric under swapping outputs and targets", "[losses]") {
  ParamStore<double> store;
  auto p = make_extractor_params(store, 0);
  Rng rng(85);
  auto a_l = random_tensor<double>(Shape{1, 3, 32, 32}, rng, 0.2);
  auto a_r = random_tensor<double>(Shape{1, 3, 32, 32}, rng, 0.2);
  auto b_l = random_tensor<double>(Shape{1, 3, 32, 32}, rng, 0.2);
  auto b_r = random_tensor<double>(Shape{1, 3, 32, 32}, rng, 0.2);
  LossConfig cfg;
  const double ab = perceptual_loss(a_l, a_r, b_l, b_r, p, cfg).item();
  const double ba = perceptual_loss(b_l, b_r, a_l, a_r, p, cfg).item();
  CHECK(ab == Catch::Approx(ba).margin(1e-12));
}

TEST_CASE("consistency loss is zero when prediction equals ground truth", "[losses]") {
  Rng rng(86);
  auto d_l = random_tensor<double>(Shape{1, 1, 6, 8}, rng);
  auto d_r = random_tensor<double>(Shape{1, 1, 6, 8}, rng);
  auto m = Tensor<double>::full(Shape{1, 1, 6, 8}, 1.0);
  bool warn = true;
  auto loss = attention_consistency_loss(d_l, d_r, d_l, d_r, m, m, &warn);
  CHECK(loss.item() == 0.0);
  CHECK_FALSE(warn);
}

TEST_CASE("constant offset under full masks gives 2*delta", "[losses]") {
  Rng rng(87);
  auto gt_l = random_tensor<double>(Shape{1, 1, 4, 4}, rng);
  auto gt_r = random_tensor<double>(Shape{1, 1, 4, 4}, rng);
  const double delta = 0.37;
  Array<double> dl = gt_l.to_array(), dr = gt_r.to_array();
  for (auto& v : dl.data) v += delta;
  for (auto& v : dr.data) v += delta;
  auto m = Tensor<double>::full(Shape{1, 1, 4, 4}, 1.0);
  auto loss = attention_consistency_loss(Tensor<double>::leaf(dl), Tensor<double>::leaf(dr),
                                         gt_l, gt_r, m, m);
  CHECK(loss.item() == Catch::Approx(2.0 * delta).margin(1e-12));
}

TEST_CASE("all-false masks give zero with a warning", "[losses]") {
  Rng rng(88);
  auto d = random_tensor<double>(Shape{1, 1, 4, 4}, rng);
  auto gt = random_tensor<double>(Shape{1, 1, 4, 4}, rng);
  auto m = Tensor<double>::zeros(Shape{1, 1, 4, 4});
  bool warn = false;
  auto loss = attention_consistency_loss(d, d, gt, gt, m, m, &warn);
  CHECK(loss.item() == 0.0);
  CHECK(warn);
}

TEST_CASE("total loss weights the consistency term", "[losses]") {
  auto lp = Tensor<double>::full(Shape{1}, 1.0);
  auto lc = Tensor<double>::full(Shape{1}, 2.0);
  CHECK(total_loss(lp, lc, 0.5).item() == Catch::Approx(2.0));
  CHECK(total_loss(lp, lc, 0.0).item() == Catch::Approx(1.0));  // noAC: L == L_P
  LossConfig cfg;
  CHECK(cfg.alpha == 5e-4);
}

TEST_CASE("ground-truth downsampling block-averages valid cells and ANDs masks",
          "[losses]") {
  const int H = 8, W = 8;
  Array<double> disp(Shape{1, 1, H, W});
  Array<double> mask(Shape{1, 1, H, W}, 1.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) disp.data[static_cast<size_t>(y) * W + x] = 8.0;
  // Poison one pixel of the top-left block: value excluded from the mean,
  // mask AND goes false.
  disp.data[1 * W + 1] = 1000.0;
  mask.data[1 * W + 1] = 0.0;

  auto d1 = downsample_disparity_to_level1(disp, mask);
  auto m1 = downsample_mask_to_level1(mask);
  REQUIRE(d1.shape == Shape{1, 1, 2, 2});
  CHECK(d1.data[0] == Catch::Approx(2.0));  // mean of valid 8s, divided by 4
  CHECK(d1.data[1] == Catch::Approx(2.0));
  CHECK(m1.data[0] == 0.0);
  CHECK(m1.data[1] == 1.0);
  CHECK(m1.data[2] == 1.0);
  CHECK(m1.data[3] == 1.0);
}

TEST_CASE("gradcheck of both losses on a tiny configuration", "[losses][gradcheck]") {
  ParamStore<double> store;
  auto p = make_extractor_params(store, 5);
  Rng rng(89);
  auto out_l = random_tensor<double>(Shape{1, 3, 16, 16}, rng, 0.2, true, "out_l");
  auto out_r = random_tensor<double>(Shape{1, 3, 16, 16}, rng, 0.2, true, "out_r");
  auto clean_l = random_tensor<double>(Shape{1, 3, 16, 16}, rng, 0.2);
  auto clean_r = random_tensor<double>(Shape{1, 3, 16, 16}, rng, 0.2);
  auto d_l = random_tensor<double>(Shape{1, 1, 4, 4}, rng, 1.0, true, "d_l");
  auto d_r = random_tensor<double>(Shape{1, 1, 4, 4}, rng, 1.0, true, "d_r");
  auto gt_l = random_tensor<double>(Shape{1, 1, 4, 4}, rng);
  auto gt_r = random_tensor<double>(Shape{1, 1, 4, 4}, rng);
  Array<double> mask_arr(Shape{1, 1, 4, 4}, 1.0);
  mask_arr.data[3] = 0.0;
  auto mask = Tensor<double>::leaf(mask_arr);
  LossConfig cfg;

  auto report = gradcheck({out_l, out_r, d_l, d_r}, [&] {
    auto lp = perceptual_loss(out_l, out_r, clean_l, clean_r, p, cfg);
    auto lc = attention_consistency_loss(d_l, d_r, gt_l, gt_r, mask, mask);
    return scalar_mul(total_loss(lp, lc, cfg.alpha), 0.1);
  });
  INFO("max rel err " << report.max_rel_err());
  CHECK(report.pass(1e-4));
}
