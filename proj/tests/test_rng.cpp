#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "qrk/rng.hpp"

namespace {

using qrk::Rng;
using qrk::RngHandle;

TEST(Rng, SameHandleSameSequence) {
  Rng a(RngHandle{42, 1});
  Rng b(RngHandle{42, 1});
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsDiffer) {
  Rng a(RngHandle{42, 1});
  Rng b(RngHandle{42, 2});
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.next_u64() == b.next_u64();
  EXPECT_EQ(equal, 0);
}

TEST(Rng, SplitMixReferenceValue) {
  // First output of the reference SplitMix64 generator seeded with 0.
  EXPECT_EQ(qrk::splitmix64(0), 0xe220a8397b1dcdafULL);
}

TEST(Rng, MixSeedIsOrderSensitive) {
  EXPECT_NE(qrk::mix_seed({1, 2}), qrk::mix_seed({2, 1}));
  EXPECT_EQ(qrk::mix_seed({1, 2, 3}), qrk::mix_seed({1, 2, 3}));
}

TEST(Rng, UniformIndexRangeAndBalance) {
  Rng rng(RngHandle{7, 0});
  std::vector<int> counts(7, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    const auto v = rng.uniform_index(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  // Chi-square with 6 degrees of freedom; 22.46 is the 0.999 quantile.
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - draws / 7.0) * (c - draws / 7.0) / (draws / 7.0);
  EXPECT_LT(chi2, 22.46);
}

TEST(Rng, UniformIndexOfOneIsZero) {
  Rng rng(RngHandle{3, 0});
  for (int i = 0; i < 10; ++i) EXPECT_EQ(rng.uniform_index(1), 0u);
}

TEST(Rng, Uniform01Bounds) {
  Rng rng(RngHandle{9, 0});
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  Rng rng(RngHandle{11, 0});
  const int N = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < N; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / N, 0.0, 4.0 / std::sqrt(N));
  EXPECT_NEAR(sq / N, 1.0, 4.0 * std::sqrt(2.0 / N));
}

}  // namespace
