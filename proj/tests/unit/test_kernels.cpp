#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "ssd/kernels/kernels.hpp"

using namespace ssd::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<Isa> simd_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::avx2, Isa::neon})
    if (isa_supported(isa)) out.push_back(isa);
  return out;
}

// Reference gemm in double, for the reduction kernels.
std::vector<double> ref_gemm(std::size_t m, std::size_t n, std::size_t k,
                             const std::vector<float>& a, const std::vector<float>& b,
                             bool ta, bool tb) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ta ? a[p * m + i] : a[i * k + p];
        const double bv = tb ? b[j * k + p] : b[p * n + j];
        s += av * bv;
      }
      c[i * n + j] = s;
    }
  return c;
}

}  // namespace

TEST(KernelIsa, NamesRoundTrip) {
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) EXPECT_EQ(parse_isa(isa_name(isa)), isa);
  EXPECT_THROW(parse_isa("sse9"), std::invalid_argument);
  EXPECT_TRUE(isa_supported(Isa::scalar));
}

TEST(KernelIsa, ScopedIsaRestores) {
  const Isa before = active_isa();
  {
    ScopedIsa pin(Isa::scalar);
    EXPECT_EQ(active_isa(), Isa::scalar);
  }
  EXPECT_EQ(active_isa(), before);
}

TEST(KernelIsa, UnsupportedIsaRejected) {
  for (Isa isa : {Isa::avx2, Isa::neon})
    if (!isa_supported(isa)) {
      EXPECT_THROW(set_isa(isa), std::invalid_argument);
    }
}

TEST(KernelContracts, SizeMismatchThrows) {
  std::vector<float> a(3), b(4);
  EXPECT_THROW(dot(a, b), std::invalid_argument);
  EXPECT_THROW(axpy(1.0f, a, b), std::invalid_argument);
  std::vector<float> c(5);
  EXPECT_THROW(gemm_nn(2, 2, 2, a, b, c, false), std::invalid_argument);
}

TEST(KernelScalar, MatchesDoubleReference) {
  ScopedIsa pin(Isa::scalar);
  const auto a = random_vec(37, 1), b = random_vec(37, 2);
  double want = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) want += static_cast<double>(a[i]) * b[i];
  EXPECT_NEAR(dot(a, b), want, 1e-5);

  const std::size_t m = 5, n = 7, k = 9;
  const auto ga = random_vec(m * k, 3), gb = random_vec(k * n, 4);
  std::vector<float> c(m * n);
  gemm_nn(m, n, k, ga, gb, c, false);
  const auto ref = ref_gemm(m, n, k, ga, gb, false, false);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], ref[i], 1e-5);
}

// Every SIMD kernel against the scalar reference. Elementwise kernels must be
// bit-identical; reductions agree to a few ulps of the accumulated magnitude.
class SimdEquivalence : public ::testing::TestWithParam<std::size_t> {};

TEST_P(SimdEquivalence, ElementwiseBitIdentical) {
  const std::size_t n = GetParam();
  for (Isa isa : simd_isas()) {
    SCOPED_TRACE(std::string(isa_name(isa)));
    const auto x = random_vec(n, 10), y0 = random_vec(n, 11), p0 = random_vec(n, 12);
    auto run = [&](Isa which) {
      ScopedIsa pin(which);
      std::vector<std::vector<float>> out;
      auto y = y0;
      axpy(0.37f, x, y);
      out.push_back(y);
      auto s = y0;
      scale(-1.7f, s);
      out.push_back(s);
      auto l = y0;
      lerp(l, x, 0.999f);
      out.push_back(l);
      std::vector<float> r(n), rb(n);
      relu(x, r);
      relu_backward(x, y0, rb);
      out.push_back(r);
      out.push_back(rb);
      auto p = p0;
      auto v = y0;
      sgd_momentum(p, x, v, 0.05f, 0.9f, 5e-4f);
      out.push_back(p);
      out.push_back(v);
      return out;
    };
    const auto ref = run(Isa::scalar);
    const auto got = run(isa);
    ASSERT_EQ(ref.size(), got.size());
    for (std::size_t t = 0; t < ref.size(); ++t) EXPECT_EQ(ref[t], got[t]) << "kernel #" << t;
  }
}

TEST_P(SimdEquivalence, DotWithinTolerance) {
  const std::size_t n = GetParam();
  for (Isa isa : simd_isas()) {
    const auto a = random_vec(n, 20), b = random_vec(n, 21);
    float ref, got;
    {
      ScopedIsa pin(Isa::scalar);
      ref = dot(a, b);
    }
    {
      ScopedIsa pin(isa);
      got = dot(a, b);
    }
    double mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
    EXPECT_NEAR(got, ref, 1e-6 * (mag + 1.0)) << isa_name(isa);
  }
}

INSTANTIATE_TEST_SUITE_P(Lengths, SimdEquivalence,
                         ::testing::Values(0, 1, 3, 7, 8, 9, 15, 16, 17, 31, 32, 33, 100, 1027));

struct GemmShape {
  std::size_t m, n, k;
};

class GemmEquivalence : public ::testing::TestWithParam<GemmShape> {};

TEST_P(GemmEquivalence, AllLayoutsMatchScalar) {
  const auto [m, n, k] = GetParam();
  const auto a = random_vec(m * k, 30), bnn = random_vec(k * n, 31), bnt = random_vec(n * k, 32);
  const auto atn = random_vec(k * m, 33);
  const auto c0 = random_vec(m * n, 34);
  for (Isa isa : simd_isas()) {
    SCOPED_TRACE(std::string(isa_name(isa)));
    for (bool acc : {false, true}) {
      auto run = [&](Isa which) {
        ScopedIsa pin(which);
        std::vector<std::vector<float>> out(3, c0);
        gemm_nn(m, n, k, a, bnn, out[0], acc);
        gemm_nt(m, n, k, a, bnt, out[1], acc);
        gemm_tn(m, n, k, atn, bnn, out[2], acc);
        return out;
      };
      const auto ref = run(Isa::scalar), got = run(isa);
      for (int layout = 0; layout < 3; ++layout)
        for (std::size_t i = 0; i < m * n; ++i)
          EXPECT_NEAR(got[layout][i], ref[layout][i], 1e-5 * (static_cast<double>(k) + 1.0))
              << "layout " << layout << " index " << i;
    }
  }
}

TEST_P(GemmEquivalence, ScalarMatchesDoubleOracle) {
  const auto [m, n, k] = GetParam();
  ScopedIsa pin(Isa::scalar);
  const auto a = random_vec(m * k, 40), b = random_vec(k * n, 41);
  std::vector<float> c(m * n);
  gemm_nn(m, n, k, a, b, c, false);
  const auto ref = ref_gemm(m, n, k, a, b, false, false);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], ref[i], 1e-5 * (k + 1.0));
}

INSTANTIATE_TEST_SUITE_P(Shapes, GemmEquivalence,
                         ::testing::Values(GemmShape{1, 1, 1}, GemmShape{3, 5, 7},
                                           GemmShape{16, 256, 27}, GemmShape{32, 64, 144},
                                           GemmShape{7, 33, 9}, GemmShape{64, 20, 64},
                                           GemmShape{2, 41, 288}));
