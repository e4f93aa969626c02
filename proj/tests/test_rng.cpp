#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "bbmtraps/rng.hpp"

using namespace bbmtraps;

TEST(Rng, SameKeySameSequence) {
  RngStream a(42, {1, 2});
  RngStream b(42, {1, 2});
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(Rng, DistinctPathsDiffer) {
  std::set<std::uint64_t> keys;
  for (std::uint64_t i = 0; i < 10000; ++i) keys.insert(RngStream::derive(7, {1, i}));
  EXPECT_EQ(keys.size(), 10000u);
  EXPECT_NE(RngStream::derive(7, {1, 2}), RngStream::derive(7, {2, 1}));
}

TEST(Rng, SubstreamIsIndependentOfParentState) {
  RngStream a(3);
  const auto before = a.substream(StreamTag::kField).key();
  for (int i = 0; i < 10; ++i) a();
  EXPECT_EQ(a.substream(StreamTag::kField).key(), before);
}

TEST(Rng, UniformOpenInterval) {
  EXPECT_GT(to_unit_interval(0), 0.0);
  EXPECT_LT(to_unit_interval(~0ULL), 1.0);
  RngStream r(1);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += r.uniform();
  EXPECT_NEAR(sum / n, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Rng, ExponentialRate) {
  RngStream r(2);
  EXPECT_TRUE(std::isinf(r.exponential(0.0)));
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += r.exponential(2.0);
  EXPECT_NEAR(sum / n, 0.5, 4.0 * 0.5 / std::sqrt(n));
}
