#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "v2c/error.hpp"
#include "v2c/kernels.hpp"
#include "v2c/rng.hpp"
#include "v2c/tensor.hpp"

using namespace v2c;

TEST(Tensor, ConstructionValidatesShape) {
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m.at(1, 2), 6.0);
  EXPECT_EQ(m.row(1)[0], 4.0);
  EXPECT_EQ(shape_string(m.shape()), "[2x3]");
  Tensor t({2, 3, 4});
  t.at(1, 2, 3) = 9.0;
  EXPECT_EQ(t[23], 9.0);
}

TEST(Tensor, BitIdenticalDistinguishesSignedZero) {
  const Tensor a = Tensor::vector({0.0});
  const Tensor b = Tensor::vector({-0.0});
  EXPECT_EQ(a, b);
  EXPECT_FALSE(bit_identical(a, b));
  EXPECT_TRUE(bit_identical(a, a));
}

TEST(Rng, DeterministicAndRestorable) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
  const std::string saved = a.state();
  std::vector<double> first;
  for (int i = 0; i < 10; ++i) first.push_back(a.uniform());
  a.restore(saved);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.uniform(), first[i]);
}

TEST(Rng, UniformAndBelowRanges) {
  Rng r(7);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform(-0.1, 0.1);
    ASSERT_GE(u, -0.1);
    ASSERT_LT(u, 0.1);
    const auto k = r.below(5);
    ASSERT_LT(k, 5u);
    seen.insert(k);
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Rng, NormalMoments) {
  Rng r(8);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(2);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  auto w = v;
  r.shuffle(w);
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}

TEST(Rng, DerivedSeedsDiffer) {
  std::set<std::uint64_t> s;
  for (std::uint64_t stream = 0; stream < 16; ++stream) s.insert(derive_seed(1, stream));
  EXPECT_EQ(s.size(), 16u);
  EXPECT_EQ(derive_seed(5, 3), derive_seed(5, 3));
}

namespace {

std::vector<double> random_vec(Rng& r, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = r.uniform(-1, 1);
  return v;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(Kernels, ParallelMatchesSerialBitForBit) {
  Rng r(13);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t rows = 1 + r.below(200), cols = 1 + r.below(200);
    const auto W = random_vec(r, rows * cols), x = random_vec(r, cols), gy = random_vec(r, rows);
    auto y_s = random_vec(r, rows), y_p = y_s;
    kernels::serial::gemv(W, rows, cols, x, y_s);
    kernels::parallel::gemv(W, rows, cols, x, y_p);
    EXPECT_TRUE(same_bits(y_s, y_p));

    std::vector<double> gx_s(cols, 0.5), gx_p(cols, 0.5);
    kernels::serial::gemv_t(W, rows, cols, gy, gx_s);
    kernels::parallel::gemv_t(W, rows, cols, gy, gx_p);
    EXPECT_TRUE(same_bits(gx_s, gx_p));

    std::vector<double> gW_s(rows * cols, 0.25), gW_p = gW_s;
    kernels::serial::ger(gy, x, gW_s);
    kernels::parallel::ger(gy, x, gW_p);
    EXPECT_TRUE(same_bits(gW_s, gW_p));

    const kernels::ConvDims d{1 + r.below(40), 1 + r.below(40), 1 + r.below(40), 1 + 2 * r.below(3)};
    const auto X = random_vec(r, d.frames * d.in), K = random_vec(r, d.width * d.in * d.out),
               b = random_vec(r, d.out), gY = random_vec(r, d.frames * d.out);
    std::vector<double> Y_s(d.frames * d.out), Y_p(d.frames * d.out);
    kernels::serial::conv_forward(d, X, K, b, Y_s);
    kernels::parallel::conv_forward(d, X, K, b, Y_p);
    EXPECT_TRUE(same_bits(Y_s, Y_p));

    std::vector<double> gX_s(X.size()), gX_p(X.size());
    kernels::serial::conv_backward_input(d, K, gY, gX_s);
    kernels::parallel::conv_backward_input(d, K, gY, gX_p);
    EXPECT_TRUE(same_bits(gX_s, gX_p));

    std::vector<double> gK_s(K.size()), gK_p(K.size());
    kernels::serial::conv_backward_kernel(d, X, gY, gK_s);
    kernels::parallel::conv_backward_kernel(d, X, gY, gK_p);
    EXPECT_TRUE(same_bits(gK_s, gK_p));
  }
}

TEST(Kernels, SerialConvMatchesDirectFormula) {
  Rng r(17);
  const kernels::ConvDims d{5, 3, 2, 3};
  const auto X = random_vec(r, 15), K = random_vec(r, 18), b = random_vec(r, 2);
  std::vector<double> Y(10);
  kernels::serial::conv_forward(d, X, K, b, Y);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t o = 0; o < 2; ++o) {
      double expect = b[o];
      for (std::size_t j = 0; j < 3; ++j) {
        const long src = static_cast<long>(t + j) - 1;
        if (src < 0 || src >= 5) continue;
        for (std::size_t i = 0; i < 3; ++i) expect += X[src * 3 + i] * K[(j * 3 + i) * 2 + o];
      }
      EXPECT_NEAR(Y[t * 2 + o], expect, 1e-14);
    }
}

TEST(Kernels, ThreadSettingRoundTrips) {
  const int before = kernels::threads();
  kernels::set_threads(3);
  EXPECT_EQ(kernels::threads(), 3);
  kernels::set_threads(before);
}
