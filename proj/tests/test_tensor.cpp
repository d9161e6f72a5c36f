#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "raf/tensor.hpp"

using raf::Tensor;

namespace {

Tensor random_tensor(std::vector<std::int64_t> shape, raf::Rng& rng, float lo = -1.0f,
                     float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (float& v : t.values()) v = static_cast<float>(rng.next_real(lo, hi));
  return t;
}

// Naive k-ordered reference for matmul.
std::vector<double> naive_matmul(const Tensor& a, const Tensor& b) {
  const std::int64_t m = a.extent(0), p = a.extent(1), q = b.extent(1);
  std::vector<double> c(static_cast<std::size_t>(m * q), 0.0);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t k = 0; k < p; ++k)
      for (std::int64_t j = 0; j < q; ++j)
        c[static_cast<std::size_t>(i * q + j)] +=
            static_cast<double>(a.at({i, k})) * static_cast<double>(b.at({k, j}));
  return c;
}

}  // namespace

TEST_CASE("tensor construction and indexing") {
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  t.at({1, 2}) = 5.0f;
  CHECK(t.at({1, 2}) == 5.0f);
  CHECK_THROWS_AS(t.at({2, 0}), raf::ArgumentError);
  CHECK_THROWS_AS(t.at({0}), raf::ArgumentError);
  CHECK_THROWS_AS(Tensor({0, 3}), raf::ArgumentError);
  CHECK_THROWS_AS(Tensor({2, 2}, {1.0f}), raf::DimensionError);
  CHECK_THROWS_AS(t.reshaped({5}), raf::DimensionError);
  CHECK(t.reshaped({6}).extent(0) == 6);
}

TEST_CASE("matmul identity") {
  Tensor id({3, 3});
  for (std::int64_t i = 0; i < 3; ++i) id.at({i, i}) = 1.0f;
  raf::Rng rng(1);
  const Tensor a = random_tensor({3, 4}, rng);
  const Tensor c = raf::matmul(id, a);
  for (std::int64_t i = 0; i < a.size(); ++i) CHECK(c.data()[i] == a.data()[i]);
}

TEST_CASE("matmul hand-computed 2x2") {
  const Tensor a({2, 2}, {1, 2, 3, 4});
  const Tensor b({2, 2}, {5, 6, 7, 8});
  const Tensor c = raf::matmul(a, b);
  CHECK(c.at({0, 0}) == 19.0f);
  CHECK(c.at({0, 1}) == 22.0f);
  CHECK(c.at({1, 0}) == 43.0f);
  CHECK(c.at({1, 1}) == 50.0f);
}

TEST_CASE("matmul zero annihilator") {
  raf::Rng rng(2);
  const Tensor z({2, 3});
  const Tensor a = random_tensor({3, 2}, rng);
  const Tensor zero_prod = raf::matmul(z, a);
  for (float v : zero_prod.values()) CHECK(v == 0.0f);
}

TEST_CASE("matmul shape errors name both shapes") {
  const Tensor a({2, 3});
  const Tensor b({2, 3});
  CHECK_THROWS_WITH_AS(raf::matmul(a, b),
                       doctest::Contains("[2 x 3]"), raf::DimensionError);
  CHECK_THROWS_AS(raf::matmul(a.reshaped({6}), b), raf::DimensionError);
}

TEST_CASE("matmul matches naive double oracle") {
  raf::Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = rng.next_int(1, 9), p = rng.next_int(1, 9), q = rng.next_int(1, 9);
    const Tensor a = random_tensor({m, p}, rng, -2.0f, 2.0f);
    const Tensor b = random_tensor({p, q}, rng, -2.0f, 2.0f);
    const Tensor c = raf::matmul(a, b);
    const auto ref = naive_matmul(a, b);
    for (std::int64_t i = 0; i < c.size(); ++i)
      CHECK(c.data()[i] == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-6));
  }
}

TEST_CASE("matmul associativity within 1e-4 relative") {
  raf::Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_tensor({6, 5}, rng);
    const Tensor b = random_tensor({5, 7}, rng);
    const Tensor c = random_tensor({7, 4}, rng);
    const Tensor l = raf::matmul(raf::matmul(a, b), c);
    const Tensor r = raf::matmul(a, raf::matmul(b, c));
    for (std::int64_t i = 0; i < l.size(); ++i) {
      const double denom = std::max(1e-3, std::abs(static_cast<double>(r.data()[i])));
      CHECK(std::abs(l.data()[i] - r.data()[i]) / denom < 1e-4);
    }
  }
}

TEST_CASE("softmax closed forms") {
  const Tensor u = raf::softmax_lastdim(Tensor({3}, {0, 0, 0}));
  for (float v : u.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-7));

  const Tensor v = raf::softmax_lastdim(Tensor({2}, {0.0f, std::log(2.0f)}));
  CHECK(v.at({0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  CHECK(v.at({1}) == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("softmax shift invariance and normalization") {
  raf::Rng rng(5);
  const Tensor x = random_tensor({4, 3, 7}, rng, -30.0f, 30.0f);
  Tensor shifted = x;
  for (float& v : shifted.values()) v += 11.5f;
  const Tensor sx = raf::softmax_lastdim(x);
  const Tensor sy = raf::softmax_lastdim(shifted);
  for (std::int64_t i = 0; i < sx.size(); ++i)
    CHECK(sx.data()[i] == doctest::Approx(sy.data()[i]).epsilon(1e-5));

  for (std::int64_t s = 0; s < sx.size() / 7; ++s) {
    double sum = 0.0;
    for (std::int64_t i = 0; i < 7; ++i) sum += sx.data()[s * 7 + i];
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("layer_norm closed forms") {
  const Tensor c = raf::layer_norm(Tensor({3}, {5, 5, 5}), 1e-5f);
  for (float v : c.values()) CHECK(std::abs(v) < 1e-6);

  const Tensor two = raf::layer_norm(Tensor({2}, {1, 3}), 1e-12f);
  CHECK(two.at({0}) == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(two.at({1}) == doctest::Approx(1.0).epsilon(1e-5));

  raf::Rng rng(6);
  const Tensor x = random_tensor({5, 16}, rng, -3.0f, 3.0f);
  const Tensor n = raf::layer_norm(x);
  for (std::int64_t s = 0; s < 5; ++s) {
    double mean = 0.0;
    for (std::int64_t i = 0; i < 16; ++i) mean += n.data()[s * 16 + i];
    CHECK(std::abs(mean / 16.0) < 1e-5);
  }
}

TEST_CASE("top_k_indices basics") {
  const std::vector<float> a{3, 1, 2};
  CHECK(raf::top_k_indices(a, 2) == std::vector<int>{0, 2});
  const std::vector<float> ties{1, 1, 1};
  CHECK(raf::top_k_indices(ties, 2) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(raf::top_k_indices(a, 0), raf::ArgumentError);
  CHECK_THROWS_AS(raf::top_k_indices(a, 4), raf::ArgumentError);
}

TEST_CASE("top_k_indices matches full-sort oracle") {
  raf::Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::int64_t n = rng.next_int(1, 64);
    std::vector<float> scores(static_cast<std::size_t>(n));
    for (float& v : scores)
      v = static_cast<float>(rng.next_int(0, 9));  // duplicates likely
    const std::int64_t k = rng.next_int(1, n);

    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
      return scores[static_cast<std::size_t>(x)] > scores[static_cast<std::size_t>(y)];
    });
    std::vector<int> expect(order.begin(), order.begin() + k);
    std::sort(expect.begin(), expect.end());

    CHECK(raf::top_k_indices(scores, k) == expect);
  }
}

TEST_CASE("conv2d identity kernel is exact") {
  raf::Rng rng(8);
  const Tensor x = random_tensor({5, 6, 3}, rng);
  Tensor k({3, 3, 3, 3});
  for (std::int64_t c = 0; c < 3; ++c) k.at({1, 1, c, c}) = 1.0f;
  const Tensor y = raf::conv2d(x, k, Tensor({3}));
  for (std::int64_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d all-ones kernel counts padded support") {
  const Tensor x = Tensor::full({5, 5, 1}, 1.0f);
  const Tensor k = Tensor::full({3, 3, 1, 1}, 1.0f);
  const Tensor y = raf::conv2d(x, k, Tensor({1}));
  CHECK(y.at({0, 0, 0}) == 4.0f);
  CHECK(y.at({0, 4, 0}) == 4.0f);
  CHECK(y.at({0, 2, 0}) == 6.0f);
  CHECK(y.at({2, 0, 0}) == 6.0f);
  CHECK(y.at({2, 2, 0}) == 9.0f);
}

TEST_CASE("conv2d zero kernel emits bias") {
  raf::Rng rng(9);
  const Tensor x = random_tensor({4, 4, 2}, rng);
  const Tensor y = raf::conv2d(x, Tensor({3, 3, 2, 2}), Tensor({2}, {0.5f, -1.0f}));
  for (std::int64_t i = 0; i < 16; ++i) {
    CHECK(y.data()[2 * i] == 0.5f);
    CHECK(y.data()[2 * i + 1] == -1.0f);
  }
}

TEST_CASE("conv2d channel mismatch") {
  CHECK_THROWS_AS(raf::conv2d(Tensor({4, 4, 2}), Tensor({3, 3, 3, 1}), Tensor({1})),
                  raf::DimensionError);
  CHECK_THROWS_AS(raf::conv2d(Tensor({4, 4, 2}), Tensor({5, 5, 2, 1}), Tensor({1})),
                  raf::DimensionError);
}

TEST_CASE("conv2d_stride halves the grid") {
  const Tensor x = Tensor::full({6, 8, 1}, 1.0f);
  Tensor k({3, 3, 1, 1});
  k.at({1, 1, 0, 0}) = 1.0f;
  const Tensor y = raf::conv2d_stride(x, k, Tensor({1}), 2);
  CHECK(y.extent(0) == 3);
  CHECK(y.extent(1) == 4);
  CHECK(y.at({1, 1, 0}) == 1.0f);
}

TEST_CASE("upsample_nn2x") {
  const Tensor x({2, 2, 1}, {1, 2, 3, 4});
  const Tensor y = raf::upsample_nn2x(x);
  const std::vector<float> expect{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  for (std::int64_t i = 0; i < y.size(); ++i)
    CHECK(y.data()[i] == expect[static_cast<std::size_t>(i)]);

  const Tensor c = raf::upsample_nn2x(Tensor::full({3, 5, 2}, 7.0f));
  for (float v : c.values()) CHECK(v == 7.0f);

  raf::Rng rng(10);
  const Tensor r = random_tensor({4, 3, 2}, rng);
  const Tensor u = raf::upsample_nn2x(r);
  for (std::int64_t i = 0; i < 4; ++i)
    for (std::int64_t j = 0; j < 3; ++j)
      for (std::int64_t ch = 0; ch < 2; ++ch)
        CHECK(u.at({2 * i, 2 * j, ch}) == r.at({i, j, ch}));
}

TEST_CASE("leaky_relu") {
  const Tensor y = raf::leaky_relu(Tensor({3}, {1.0f, -1.0f, 0.0f}), 0.2f);
  CHECK(y.at({0}) == 1.0f);
  CHECK(y.at({1}) == doctest::Approx(-0.2));
  CHECK(y.at({2}) == 0.0f);

  raf::Rng rng(11);
  const Tensor pos = random_tensor({10}, rng, 0.0f, 5.0f);
  const Tensor once = raf::leaky_relu(pos, 0.2f);
  const Tensor twice = raf::leaky_relu(once, 0.2f);
  for (std::int64_t i = 0; i < pos.size(); ++i) {
    CHECK(once.data()[i] == pos.data()[i]);
    CHECK(twice.data()[i] == once.data()[i]);
  }
  CHECK_THROWS_AS(raf::leaky_relu(pos, 0.0f), raf::ArgumentError);
  CHECK_THROWS_AS(raf::leaky_relu(pos, 1.0f), raf::ArgumentError);
}

TEST_CASE("rng replay is exact") {
  raf::Rng a(12345), b(12345);
  for (int i = 0; i < 10000; ++i) CHECK(a.next_u64() == b.next_u64());

  raf::Rng c(12345);
  raf::Rng d(54321);
  bool all_equal = true;
  for (int i = 0; i < 100; ++i) all_equal &= c.next_u64() == d.next_u64();
  CHECK_FALSE(all_equal);
}

TEST_CASE("rng derived draws stay in range") {
  raf::Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    const float f = rng.next_float();
    CHECK(f >= 0.0f);
    CHECK(f < 1.0f);
    const auto v = rng.next_int(-3, 5);
    CHECK(v >= -3);
    CHECK(v <= 5);
    const double r = rng.next_real(2.0, 4.0);
    CHECK(r >= 2.0);
    CHECK(r <= 4.0);
  }
  CHECK_THROWS_AS(rng.next_int(2, 1), raf::ArgumentError);
}
