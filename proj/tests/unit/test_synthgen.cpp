#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "swd/synthgen.hpp"

using namespace swd;

namespace {

// Brute-force warp oracle: re-checks mask soundness and left-right
// consistency pixel by pixel, independent of the generator's bookkeeping.
void check_warp_consistency(const StereoSample& s) {
  const int H = s.height, W = s.width;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (s.mask_l.at(0, y, x) != 0.0f) {
        const float d = s.disp_l.at(0, y, x);
        const int xr = x - static_cast<int>(d);
        REQUIRE(d >= 0.0f);
        REQUIRE(xr >= 0);
        REQUIRE(xr < W);
        for (int c = 0; c < 3; ++c)
          CHECK(std::abs(s.clean_l.at(c, y, x) - s.clean_r.at(c, y, xr)) <= 1e-6f);
        // The correspondent must carry the same disparity (same layer).
        CHECK(s.disp_r.at(0, y, xr) == d);
      }
      if (s.mask_r.at(0, y, x) != 0.0f) {
        const float d = s.disp_r.at(0, y, x);
        const int xl = x + static_cast<int>(d);
        REQUIRE(xl < W);
        for (int c = 0; c < 3; ++c)
          CHECK(std::abs(s.clean_r.at(c, y, x) - s.clean_l.at(c, y, xl)) <= 1e-6f);
      }
    }
}

}  // namespace

TEST_CASE("single layer with disparity 4 has uniform ground truth", "[synthgen]") {
  SceneSpec spec;
  spec.seed = 3;
  spec.layers = 1;
  spec.min_disparity = 4;
  spec.max_disparity = 4;
  Rng rng(3);
  auto bg = gen_background_pair(spec, rng);
  const int H = spec.height, W = spec.width;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      CHECK(bg.disp_l.at(0, y, x) == 4.0f);
      // Out-of-bounds correspondents are exactly the first 4 columns.
      CHECK(bg.mask_l.at(0, y, x) == (x >= 4 ? 1.0f : 0.0f));
      CHECK(bg.mask_r.at(0, y, x) == (x < W - 4 ? 1.0f : 0.0f));
    }
}

TEST_CASE("single layer with disparity 0 makes both views identical", "[synthgen]") {
  SceneSpec spec;
  spec.seed = 4;
  spec.layers = 1;
  spec.min_disparity = 0;
  spec.max_disparity = 0;
  Rng rng(4);
  auto bg = gen_background_pair(spec, rng);
  CHECK(bg.clean_l.data == bg.clean_r.data);
  for (float m : bg.mask_l.data) CHECK(m == 1.0f);
}

TEST_CASE("three-layer scenes satisfy the brute-force warp oracle", "[synthgen]") {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    auto s = make_sample(spec);
    check_warp_consistency(s);
  }
}

TEST_CASE("formation identity holds exactly on generated samples", "[synthgen]") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    SceneSpec spec;
    spec.seed = seed * 31;
    auto s = make_sample(spec);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
          const float tl = s.trans_l.at(0, y, x);
          const float want_l =
              (1.0f - tl) * s.clean_l.at(c, y, x) + tl * s.drop_l.at(c, y, x);
          CHECK(s.i_l.at(c, y, x) == std::min(1.0f, std::max(0.0f, want_l)));
          const float tr = s.trans_r.at(0, y, x);
          const float want_r =
              (1.0f - tr) * s.clean_r.at(c, y, x) + tr * s.drop_r.at(c, y, x);
          CHECK(s.i_r.at(c, y, x) == std::min(1.0f, std::max(0.0f, want_r)));
        }
  }
}

TEST_CASE("zero drops give zero transparency", "[synthgen]") {
  SceneSpec spec;
  spec.seed = 9;
  spec.mode = DropMode::kDrops;
  spec.drops_min = 0;
  spec.drops_max = 0;
  auto s = make_sample(spec);
  for (float t : s.trans_l.data) CHECK(t == 0.0f);
  CHECK(s.i_l.data == s.clean_l.data);
}

TEST_CASE("transparency stays in [0,1] with peak clamp", "[synthgen]") {
  for (uint64_t seed = 50; seed < 60; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.mode = DropMode::kDrops;
    auto s = make_sample(spec);
    for (float t : s.trans_l.data) {
      CHECK(t >= 0.0f);
      CHECK(t <= 0.95f);
    }
  }
}

TEST_CASE("mixed mode splits scenes roughly 1:1 over 100 seeds", "[synthgen]") {
  int drops = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.mode = DropMode::kMixed;
    Rng root(spec.seed);
    Rng mode_rng = root.fork(2);
    if (mode_rng.uniform() < 0.5) ++drops;
  }
  CHECK(drops >= 35);
  CHECK(drops <= 65);
}

TEST_CASE("compose obeys its limit cases", "[synthgen]") {
  Array<float> clean(Shape{3, 2, 2}, 0.2f);
  Array<float> look(Shape{3, 2, 2}, 0.8f);

  Array<float> t0(Shape{1, 2, 2}, 0.0f);
  CHECK(compose(clean, t0, look).data == clean.data);

  Array<float> t1(Shape{1, 2, 2}, 1.0f);
  CHECK(compose(clean, t1, look).data == look.data);

  Array<float> th(Shape{1, 2, 2}, 0.5f);
  for (float v : compose(clean, th, look).data) CHECK(v == Catch::Approx(0.5f));

  Array<float> bad(Shape{1, 2, 2}, 1.5f);
  CHECK_THROWS_AS(compose(clean, bad, look), std::invalid_argument);
}

TEST_CASE("compose accepts per-channel transparency", "[synthgen]") {
  Array<float> clean(Shape{3, 2, 2}, 0.2f);
  Array<float> look(Shape{3, 2, 2}, 0.8f);
  Array<float> t(Shape{3, 2, 2}, 0.0f);
  for (size_t i = 0; i < 4; ++i) t.data[i] = 1.0f;  // channel 0 fully covered
  auto out = compose(clean, t, look);
  for (size_t i = 0; i < 4; ++i) CHECK(out.data[i] == 0.8f);
  for (size_t i = 4; i < 12; ++i) CHECK(out.data[i] == 0.2f);
}

TEST_CASE("generation is deterministic in the seed", "[synthgen]") {
  SceneSpec spec;
  spec.seed = 1234;
  auto a = make_sample(spec);
  auto b = make_sample(spec);
  CHECK(a.i_l.data == b.i_l.data);
  CHECK(a.i_r.data == b.i_r.data);
  CHECK(a.disp_l.data == b.disp_l.data);
  CHECK(a.mask_r.data == b.mask_r.data);
  CHECK(a.mode == b.mode);

  SceneSpec other = spec;
  other.seed = 1235;
  auto c = make_sample(other);
  CHECK(a.i_l.data != c.i_l.data);
}

TEST_CASE("disparity range outside bounds is rejected", "[synthgen]") {
  SceneSpec spec;
  spec.max_disparity = spec.width;  // > W/4
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  SceneSpec odd;
  odd.width = 50;
  CHECK_THROWS_AS(odd.validate(), std::invalid_argument);
}
