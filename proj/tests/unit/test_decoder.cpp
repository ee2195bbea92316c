#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "swd/decoder.hpp"
#include "swd/gradcheck.hpp"

using namespace swd;
using swd::test::max_abs_diff;
using swd::test::random_tensor;

namespace {

DecoderParams<double> random_decoder(ParamStore<double>& store, int width,
                                     const std::array<int, 3>& refined_ch, uint64_t seed) {
  Rng rng(seed);
  return make_decoder_params(store, width, refined_ch, rng);
}

}  // namespace

TEST_CASE("aggregate_step with a zeroed fuse path is skip + upsample", "[decoder]") {
  ParamStore<double> store;
  auto p = random_decoder(store, 4, {4, 4, 4}, 61);
  auto& st = p.steps[0];
  std::fill(st.fuse_w.mutable_val().begin(), st.fuse_w.mutable_val().end(), 0.0);
  std::fill(st.fuse_b.mutable_val().begin(), st.fuse_b.mutable_val().end(), 0.0);
  // Residual-block biases are zero-initialized, so Res(0) == 0.
  Rng rng(62);
  auto P = random_tensor<double>(Shape{1, 4, 5, 6}, rng);
  auto A = random_tensor<double>(Shape{1, 4, 5, 6}, rng);
  auto out = aggregate_step(P, A, st);
  auto want = bilinear_upsample2x(P);
  CHECK(max_abs_diff(out.val(), want.val()) == 0.0);
}

TEST_CASE("aggregate_step doubles the spatial dims", "[decoder]") {
  ParamStore<double> store;
  auto p = random_decoder(store, 4, {6, 4, 4}, 63);
  Rng rng(64);
  auto P = random_tensor<double>(Shape{2, 4, 6, 3}, rng);
  auto A = random_tensor<double>(Shape{2, 6, 6, 3}, rng);
  auto out = aggregate_step(P, A, p.steps[0]);
  CHECK(out.shape() == Shape{2, 4, 12, 6});
}

TEST_CASE("aggregate_step matches a hand-composed primitive oracle", "[decoder]") {
  ParamStore<double> store;
  auto p = random_decoder(store, 4, {5, 4, 4}, 65);
  auto& st = p.steps[0];
  Rng rng(66);
  auto P = random_tensor<double>(Shape{1, 4, 5, 7}, rng);
  auto A = random_tensor<double>(Shape{1, 5, 5, 7}, rng);
  auto out = aggregate_step(P, A, st);

  auto fused = conv2d(concat<double>({P, A}, 1), st.fuse_w, st.fuse_b, 1, 1, 1);
  auto r1 = add(fused, conv2d(relu(conv2d(fused, st.r1a_w, st.r1a_b, 1, 1, 1)), st.r1b_w,
                              st.r1b_b, 1, 1, 1));
  auto r2 = add(r1, conv2d(relu(conv2d(r1, st.r2a_w, st.r2a_b, 1, 1, 1)), st.r2b_w, st.r2b_b,
                           1, 1, 1));
  auto want = bilinear_upsample2x(add(P, r2));
  CHECK(max_abs_diff(out.val(), want.val()) <= 1e-12);
}

TEST_CASE("aggregate_step rejects spatial mismatch", "[decoder]") {
  ParamStore<double> store;
  auto p = random_decoder(store, 4, {4, 4, 4}, 67);
  auto P = Tensor<double>::zeros(Shape{1, 4, 5, 6});
  auto A = Tensor<double>::zeros(Shape{1, 4, 6, 6});
  CHECK_THROWS_AS(aggregate_step(P, A, p.steps[0]), std::invalid_argument);
}

TEST_CASE("decode with all-zero weights yields a zero image of the right shape",
          "[decoder]") {
  ParamStore<double> store;
  DecoderParams<double> p;
  p.width = 4;
  Rng rng(68);
  p = make_decoder_params(store, 4, {4, 5, 6}, rng);
  for (auto& t : store.trainable()) {
    auto& v = t.mutable_val();
    std::fill(v.begin(), v.end(), 0.0);
  }
  auto F3 = random_tensor<double>(Shape{1, 4, 6, 3}, rng);
  std::array<Tensor<double>, 3> refined{
      random_tensor<double>(Shape{1, 6, 24, 12}, rng),
      random_tensor<double>(Shape{1, 5, 12, 6}, rng),
      random_tensor<double>(Shape{1, 4, 6, 3}, rng),
  };
  auto out = decode(F3, refined, p);
  REQUIRE(out.shape() == Shape{1, 3, 96, 48});
  for (double v : out.val()) CHECK(v == 0.0);
}

TEST_CASE("decode stride bookkeeping maps 16 -> 1", "[decoder]") {
  ParamStore<double> store;
  Rng rng(69);
  auto p = make_decoder_params(store, 4, {4, 4, 4}, rng);
  auto F3 = random_tensor<double>(Shape{2, 4, 6, 3}, rng, 0.2);
  std::array<Tensor<double>, 3> refined{
      random_tensor<double>(Shape{2, 4, 24, 12}, rng, 0.2),
      random_tensor<double>(Shape{2, 4, 12, 6}, rng, 0.2),
      random_tensor<double>(Shape{2, 4, 6, 3}, rng, 0.2),
  };
  auto out = decode(F3, refined, p);
  CHECK(out.shape() == Shape{2, 3, 96, 48});
}

TEST_CASE("gradcheck of one aggregation step", "[decoder][gradcheck]") {
  ParamStore<double> store;
  auto p = random_decoder(store, 3, {4, 3, 3}, 70);
  Rng rng(71);
  auto P = random_tensor<double>(Shape{1, 3, 4, 5}, rng, 0.5, true, "P");
  auto A = random_tensor<double>(Shape{1, 4, 4, 5}, rng, 0.5, true, "A");
  auto target = random_tensor<double>(Shape{1, 3, 8, 10}, rng);
  std::vector<Tensor<double>> checked{P, A};
  for (auto& t : store.trainable()) checked.push_back(t);
  auto report = gradcheck(checked, [&] {
    return scalar_mul(l1_mean(aggregate_step(P, A, p.steps[0]), target), 0.01);
  });
  INFO("max rel err " << report.max_rel_err());
  CHECK(report.pass(1e-4));
}
