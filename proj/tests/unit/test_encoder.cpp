#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "swd/encoder.hpp"

using namespace swd;
using swd::test::max_abs_diff;
using swd::test::random_tensor;

namespace {

EncoderParams<double> small_encoder(ParamStore<double>& store, uint64_t seed) {
  Rng rng(seed);
  EncoderConfig cfg;
  cfg.stem_channels = 4;
  cfg.channels = {4, 8, 8};
  return make_encoder_params(store, cfg, rng);
}

}  // namespace

TEST_CASE("encode produces levels at strides 4, 8, 16", "[encoder]") {
  ParamStore<double> store;
  auto p = small_encoder(store, 1);
  Rng rng(2);
  auto img = random_tensor<double>(Shape{1, 3, 96, 48}, rng, 0.1);
  auto pyr = encode(p, img);
  CHECK(pyr.level(1).shape() == Shape{1, 4, 24, 12});
  CHECK(pyr.level(2).shape() == Shape{1, 8, 12, 6});
  CHECK(pyr.level(3).shape() == Shape{1, 8, 6, 3});
}

TEST_CASE("encode is a pure function of weights and image", "[encoder]") {
  ParamStore<double> store;
  auto p = small_encoder(store, 3);
  Rng rng(4);
  auto img = random_tensor<double>(Shape{1, 3, 32, 32}, rng, 0.1);
  auto a = encode(p, img);
  auto b = encode(p, img);
  for (int i = 1; i <= 3; ++i)
    CHECK(max_abs_diff(a.level(i).val(), b.level(i).val()) == 0.0);
}

TEST_CASE("zero image with zero biases yields zero pyramids", "[encoder]") {
  ParamStore<double> store;
  auto p = small_encoder(store, 5);  // biases are zero-initialized
  auto img = Tensor<double>::zeros(Shape{2, 3, 32, 48});
  auto pyr = encode(p, img);
  for (int i = 1; i <= 3; ++i)
    for (double v : pyr.level(i).val()) CHECK(v == 0.0);
}

TEST_CASE("encode rejects dims that are not multiples of 16 with a padding hint",
          "[encoder]") {
  ParamStore<double> store;
  auto p = small_encoder(store, 6);
  auto img = Tensor<double>::zeros(Shape{1, 3, 30, 48});
  try {
    encode(p, img);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("multiples of 16") != std::string::npos);
    CHECK(msg.find("32") != std::string::npos);  // required padding hint
  }
}

TEST_CASE("perturbing one pixel only moves features inside the receptive field",
          "[encoder]") {
  ParamStore<double> store;
  auto p = small_encoder(store, 7);
  Rng rng(8);
  const int H = 160, W = 160;
  auto base_arr = random_tensor<double>(Shape{1, 3, H, W}, rng, 0.1).to_array();
  auto base = encode(p, Tensor<double>::leaf(base_arr));

  Array<double> pert = base_arr;
  const int py = 77, px = 83;
  pert.data[(static_cast<size_t>(1) * H + py) * W + px] += 1.0;
  auto moved = encode(p, Tensor<double>::leaf(pert));

  for (int level = 1; level <= 3; ++level) {
    const int stride = kLevelStride[static_cast<size_t>(level - 1)];
    const int radius = encoder_receptive_radius(level);
    const auto& a = base.level(level).val();
    const auto& b = moved.level(level).val();
    const Shape& s = base.level(level).shape();
    const int C = s[1], h = s[2], w = s[3];
    bool any_changed = false;
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const size_t i = (static_cast<size_t>(c) * h + y) * w + x;
          if (a[i] != b[i]) {
            any_changed = true;
            const int dy = std::abs(y * stride - py);
            const int dx = std::abs(x * stride - px);
            CHECK(std::max(dy, dx) <= radius);
          }
        }
    CHECK(any_changed);
  }
}
