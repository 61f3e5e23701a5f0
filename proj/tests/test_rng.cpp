#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "fedlion/rng.hpp"

using namespace fedlion;

// Known-answer vectors published with the Random123 library.
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}),
            (PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                          {0xffffffff, 0xffffffff}),
            (PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                          {0xa4093822, 0x299f31d0}),
            (PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(CounterRng, SameKeySameStream) {
  auto a = CounterRng::keyed(42, StreamTag::minibatch, {3});
  auto b = CounterRng::keyed(42, StreamTag::minibatch, {3});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
  EXPECT_EQ(a, b);
}

TEST(CounterRng, DistinctIdsDiverge) {
  auto a = CounterRng::keyed(42, StreamTag::minibatch, {3});
  auto b = CounterRng::keyed(42, StreamTag::minibatch, {4});
  auto c = CounterRng::keyed(42, StreamTag::sampling, {3});
  auto d = CounterRng::keyed(43, StreamTag::minibatch, {3});
  int same_b = 0, same_c = 0, same_d = 0;
  for (int i = 0; i < 64; ++i) {
    const auto x = a();
    same_b += x == b();
    same_c += x == c();
    same_d += x == d();
  }
  EXPECT_LT(same_b, 2);
  EXPECT_LT(same_c, 2);
  EXPECT_LT(same_d, 2);
}

TEST(CounterRng, IdOrderMatters) {
  EXPECT_NE(hash_ids({1, 2}), hash_ids({2, 1}));
  EXPECT_NE(hash_ids({0}), hash_ids({0, 0}));
}

TEST(CounterRng, DrawsCountWords) {
  auto r = CounterRng::keyed(1, StreamTag::data);
  EXPECT_EQ(r.draws(), 0u);
  r();
  r.next_u64();
  EXPECT_EQ(r.draws(), 3u);
}

TEST(CounterRng, UniformRange) {
  auto r = CounterRng::keyed(7, StreamTag::data);
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double o = r.uniform_open();
    ASSERT_GT(o, 0.0);
    ASSERT_LT(o, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 20000, 0.5, 0.01);
}

TEST(CounterRng, UniformIndexCoversRangeEvenly) {
  auto r = CounterRng::keyed(9, StreamTag::data);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[r.uniform_index(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  EXPECT_EQ(r.uniform_index(1), 0u);
}

TEST(CounterRng, NormalMoments) {
  auto r = CounterRng::keyed(13, StreamTag::data);
  const int n = 200000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s1 += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(CounterRng, GammaMean) {
  for (double shape : {0.3, 1.0, 4.5}) {
    auto r = CounterRng::keyed(17, StreamTag::data);
    const int n = 100000;
    double s = 0;
    for (int i = 0; i < n; ++i) {
      const double g = r.gamma(shape);
      ASSERT_GT(g, 0.0);
      s += g;
    }
    EXPECT_NEAR(s / n, shape, 0.03 * std::max(1.0, shape)) << shape;
  }
}
