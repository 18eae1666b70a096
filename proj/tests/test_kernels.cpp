#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>
#include <vector>

#include "setfeat/kernels.hpp"
#include "setfeat/rng.hpp"

using namespace setfeat;
using kernels::Trans;

namespace {

template <class T>
std::vector<T> noise(std::size_t n, Rng& rng) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.normal());
  return v;
}

template <class T>
class KernelTyped : public ::testing::Test {};
using Precisions = ::testing::Types<float, double>;
TYPED_TEST_SUITE(KernelTyped, Precisions);

}  // namespace

TYPED_TEST(KernelTyped, GemmMatchesReferenceAllTransposes) {
  using T = TypeParam;
  Rng rng(3);
  const T tol = std::is_same_v<T, float> ? T(2e-4) : T(1e-11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = 1 + rng.below(70), n = 1 + rng.below(300), k = 1 + rng.below(90);
    const Trans ta = rng.below(2) ? Trans::yes : Trans::no, tb = rng.below(2) ? Trans::yes : Trans::no;
    const auto a = noise<T>(m * k, rng), b = noise<T>(k * n, rng);
    auto c1 = noise<T>(m * n, rng);
    auto c2 = c1;
    const std::size_t lda = ta == Trans::no ? k : m, ldb = tb == Trans::no ? n : k;
    const T alpha = T(0.7), beta = trial % 3 == 0 ? T(0) : T(1.3);
    kernels::gemm(ta, tb, m, n, k, alpha, a.data(), lda, b.data(), ldb, beta, c1.data(), n);
    kernels::reference::gemm(ta, tb, m, n, k, alpha, a.data(), lda, b.data(), ldb, beta, c2.data(), n);
    for (std::size_t i = 0; i < c1.size(); ++i) ASSERT_NEAR(c1[i], c2[i], tol * (1 + std::abs(c2[i])) * std::sqrt(T(k)));
  }
}

TEST(Kernels, GemmBetaZeroIgnoresGarbage) {
  std::vector<double> a{1, 2}, b{3, 4}, c{NAN, NAN, NAN, NAN};
  kernels::gemm(Trans::no, Trans::no, 2, 2, 1, 1.0, a.data(), 1, b.data(), 2, 0.0, c.data(), 2);
  EXPECT_EQ(c, (std::vector<double>{3, 4, 6, 8}));
}

TEST(Kernels, GemmIdenticalAcrossThreadCounts) {
  Rng rng(9);
  const std::size_t m = 97, n = 130, k = 211;
  const auto a = noise<float>(m * k, rng), b = noise<float>(k * n, rng);
  std::vector<float> c1(m * n), c2(m * n);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  kernels::gemm(Trans::no, Trans::yes, m, n, k, 1.0f, a.data(), k, b.data(), k, 0.0f, c1.data(), n);
  omp_set_num_threads(4);
  kernels::gemm(Trans::no, Trans::yes, m, n, k, 1.0f, a.data(), k, b.data(), k, 0.0f, c2.data(), n);
  omp_set_num_threads(saved);
  EXPECT_EQ(c1, c2);
}

TYPED_TEST(KernelTyped, ConvMatchesDirectReference) {
  using T = TypeParam;
  Rng rng(4);
  const T tol = std::is_same_v<T, float> ? T(1e-4) : T(1e-11);
  for (std::size_t kernel : {1u, 3u}) {
    const std::size_t n = 3, c = 5, h = 6, w = 7, o = 4;
    const auto x = noise<T>(n * c * h * w, rng), wt = noise<T>(o * c * kernel * kernel, rng), b = noise<T>(o, rng);
    std::vector<T> y1(n * o * h * w), y2(y1.size());
    kernels::conv2d_forward(x.data(), n, c, h, w, wt.data(), o, kernel, b.data(), y1.data());
    kernels::reference::conv2d_forward(x.data(), n, c, h, w, wt.data(), o, kernel, b.data(), y2.data());
    for (std::size_t i = 0; i < y1.size(); ++i) ASSERT_NEAR(y1[i], y2[i], tol * 10);
  }
}

TEST(Kernels, Im2colCol2imAreAdjoint) {
  // <im2col(x), y> == <x, col2im(y)> for all x, y
  Rng rng(5);
  const std::size_t c = 3, h = 5, w = 4, cols = c * 9 * h * w;
  const auto x = noise<double>(c * h * w, rng), y = noise<double>(cols, rng);
  std::vector<double> col(cols), back(c * h * w, 0.0);
  kernels::im2col3x3(x.data(), c, h, w, col.data());
  kernels::col2im3x3(y.data(), c, h, w, back.data());
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < cols; ++i) lhs += col[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(Kernels, MaxpoolMatchesReferenceAndBreaksTiesFirst) {
  std::vector<float> x{1, 1, 0, 2,  //
                       1, 0, 2, 2};
  std::vector<float> y(2), yr(2);
  std::vector<std::size_t> arg(2);
  kernels::maxpool2_forward(x.data(), 1, 2, 4, y.data(), arg.data());
  kernels::reference::maxpool2_forward(x.data(), 1, 2, 4, yr.data());
  EXPECT_EQ(y, yr);
  EXPECT_EQ(y, (std::vector<float>{1, 2}));
  EXPECT_EQ(arg, (std::vector<std::size_t>{0, 3}));
}
