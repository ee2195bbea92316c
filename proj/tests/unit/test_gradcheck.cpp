#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "swd/conv.hpp"
#include "swd/gradcheck.hpp"
#include "swd/tensor.hpp"

using namespace swd;
using swd::test::random_tensor;

namespace {
constexpr double kTol = 1e-4;
constexpr double kEps = 1e-5;
}  // namespace

TEST_CASE("gradcheck of the identity is exact up to rounding", "[gradcheck]") {
  Rng rng(41);
  auto x = random_tensor<double>(Shape{3, 3}, rng, 1.0, true, "x");
  auto r = gradcheck({x}, [&] { return sum(x); }, kEps);
  CHECK(r.max_rel_err() <= 1e-9);
}

TEST_CASE("gradcheck passes for every primitive op over 10 seeds", "[gradcheck]") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    auto a = random_tensor<double>(Shape{2, 3, 4, 5}, rng, 1.0, true, "a");
    auto b = random_tensor<double>(Shape{2, 3, 4, 5}, rng, 1.0, true, "b");
    auto m2 = random_tensor<double>(Shape{4, 3}, rng, 1.0, true, "m2");
    auto m3 = random_tensor<double>(Shape{2, 3, 4}, rng, 1.0, true, "m3");
    auto w = random_tensor<double>(Shape{2, 4, 3}, rng, 1.0, true, "w");

    CHECK(gradcheck({a, b}, [&] { return sum(mul(add(a, b), sub(a, b))); }, kEps).pass(kTol));
    CHECK(gradcheck({a}, [&] { return sum(abs(scalar_mul(a, 1.7))); }, kEps).pass(kTol));
    CHECK(gradcheck({a}, [&] { return sum(relu(a)); }, kEps).pass(kTol));
    CHECK(gradcheck({a, b}, [&] { return l1_mean(a, b); }, kEps).pass(kTol));
    CHECK(gradcheck({a}, [&] { return sum(mul(softmax(a, 1), a)); }, kEps).pass(kTol));
    CHECK(gradcheck({m3, w}, [&] { return sum(mul(matmul(m3, w), matmul(m3, w))); }, kEps)
              .pass(kTol));
    CHECK(gradcheck({m2}, [&] { return sum(mul(transpose_mat(m2), transpose_mat(m2))); }, kEps)
              .pass(kTol));
    CHECK(gradcheck({a}, [&] { return mean(reshape(a, Shape{6, 20})); }, kEps).pass(kTol));
    CHECK(gradcheck({a, b}, [&] { return sum(mul(concat<double>({a, b}, 1),
                                                 concat<double>({b, a}, 1))); },
                    kEps)
              .pass(kTol));
    CHECK(gradcheck({a}, [&] {
            std::vector<Tensor<double>> bands{slice_rows(a, 0, 3), slice_rows(a, 1, 3)};
            auto y = scatter_rows_mean(bands, {0, 1}, 4);
            return sum(mul(y, y));
          }).pass(kTol));
  }
}

TEST_CASE("gradcheck passes for conv2d and bilinear upsampling over 10 seeds",
          "[gradcheck]") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed * 7 + 1);
    auto x = random_tensor<double>(Shape{1, 2, 6, 7}, rng, 1.0, true, "x");
    auto k = random_tensor<double>(Shape{3, 2, 3, 3}, rng, 0.5, true, "k");
    auto bias = random_tensor<double>(Shape{3}, rng, 0.5, true, "bias");
    const int stride = 1 + static_cast<int>(seed % 2);
    const int dil = (seed % 3 == 0) ? 2 : 1;
    CHECK(gradcheck({x, k, bias},
                    [&] {
                      auto y = conv2d(x, k, bias, stride, dil, dil);
                      return sum(mul(y, y));
                    },
                    kEps)
              .pass(kTol));
    CHECK(gradcheck({x},
                    [&] {
                      auto y = bilinear_upsample2x(x);
                      return sum(mul(y, y));
                    },
                    kEps)
              .pass(kTol));
  }
}

TEST_CASE("gradcheck through conv2d -> relu -> l1_mean", "[gradcheck]") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed * 13 + 5);
    auto x = random_tensor<double>(Shape{1, 3, 6, 6}, rng, 1.0, true, "x");
    auto k = random_tensor<double>(Shape{2, 3, 3, 3}, rng, 0.5, true, "k");
    auto bias = random_tensor<double>(Shape{2}, rng, 0.5, true, "bias");
    auto target = random_tensor<double>(Shape{1, 2, 6, 6}, rng, 1.0, false, "target");
    CHECK(gradcheck({x, k, bias},
                    [&] { return l1_mean(relu(conv2d(x, k, bias, 1, 1, 1)), target); },
                    kEps)
              .pass(kTol));
  }
}

TEST_CASE("gradcheck of softmax at saturated logits stays within 1e-3", "[gradcheck]") {
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed * 3 + 2);
    Array<double> a(Shape{2, 6});
    for (auto& v : a.data) v = rng.uniform() < 0.5 ? -30.0 + rng.normal() : 30.0 + rng.normal();
    auto x = Tensor<double>::leaf(std::move(a), true, "logits");
    auto t = random_tensor<double>(Shape{2, 6}, rng, 1.0, false, "t");
    auto r = gradcheck({x}, [&] { return sum(mul(softmax(x, 1), t)); }, kEps);
    CHECK(r.max_rel_err() <= 1e-3);
  }
}

TEST_CASE("gradcheck reports non-finite forwards naming the node", "[gradcheck]") {
  auto x = Tensor<double>::leaf(Shape{1}, {1e308}, true, "huge");
  auto r = gradcheck({x}, [&] { return sum(mul(x, x)); }, kEps);
  REQUIRE_FALSE(r.entries.empty());
  CHECK_FALSE(r.entries[0].error.empty());
  CHECK(r.entries[0].error.find("mul") != std::string::npos);
  CHECK_FALSE(r.pass(kTol));
}
