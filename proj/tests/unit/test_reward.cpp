#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "crossflow/error.hpp"
#include "crossflow/reward.hpp"
#include "crossflow/rng.hpp"

using namespace crossflow;
using namespace crossflow::reward;

TEST(Reward, IndividualDelay) {
  EXPECT_EQ(individual_delay(13.89, 13.89), 0.0);
  EXPECT_EQ(individual_delay(0.0, 13.89), 1.0);
  EXPECT_DOUBLE_EQ(individual_delay(6.945, 13.89), 0.5);
}

TEST(Reward, TotalSquaredDelay) {
  const double vmax = 10.0;
  const std::vector<double> free_flow = {10.0, 10.0, 10.0};
  EXPECT_EQ(total_squared_delay(free_flow, vmax), 0.0);
  const std::vector<double> stopped = {0.0};
  EXPECT_EQ(total_squared_delay(stopped, vmax), 1.0);
  const std::vector<double> halves = {5.0, 5.0};
  EXPECT_DOUBLE_EQ(total_squared_delay(halves, vmax), 1.5);
  EXPECT_EQ(total_squared_delay({}, vmax), 0.0);
}

TEST(Reward, FavoursManyShortDelays) {
  // Same summed linear delay (1.0): one stopped car vs two at half speed.
  const std::vector<double> one = {0.0}, two = {5.0, 5.0};
  EXPECT_GT(total_squared_delay(two, 10.0), total_squared_delay(one, 10.0));
}

TEST(Reward, PermutationInvariantAndAdditive) {
  std::vector<double> a = {1.0, 4.0, 9.5}, b = {0.0, 7.0};
  std::vector<double> ab = a;
  ab.insert(ab.end(), b.begin(), b.end());
  EXPECT_DOUBLE_EQ(total_squared_delay(ab, 10.0), total_squared_delay(a, 10.0) + total_squared_delay(b, 10.0));
  std::reverse(ab.begin(), ab.end());
  EXPECT_DOUBLE_EQ(total_squared_delay(ab, 10.0), total_squared_delay(a, 10.0) + total_squared_delay(b, 10.0));
}

TEST(Reward, NormalizedReward) {
  RewardState st;
  EXPECT_EQ(st.tsd_max(), 1.0);
  EXPECT_EQ(st.reward(0.0), 1.0);
  EXPECT_EQ(st.reward(10.0), 0.0);
  EXPECT_EQ(st.tsd_max(), 10.0);
  EXPECT_DOUBLE_EQ(st.reward(4.0), 0.6);
  EXPECT_EQ(st.tsd_max(), 10.0);
  EXPECT_THROW(st.reward(-1.0), Error);
  st.set_tsd_max(0.2);
  EXPECT_EQ(st.tsd_max(), 1.0);
}

TEST(Reward, FuzzStaysInUnitIntervalAndMaxIsMonotone) {
  RngStream rng(99);
  RewardState st;
  double prev_max = st.tsd_max();
  for (int i = 0; i < 100000; ++i) {
    const int n = static_cast<int>(rng.uniform_int(60));
    std::vector<double> speeds(n);
    for (auto& v : speeds) v = rng.uniform(0.0, 13.89);
    const double tsd = total_squared_delay(speeds, 13.89);
    ASSERT_GE(tsd, 0.0);
    const double r = st.reward(tsd);
    ASSERT_GE(r, 0.0);
    ASSERT_LE(r, 1.0);
    ASSERT_GE(st.tsd_max(), prev_max);
    ASSERT_GE(st.tsd_max(), tsd);
    prev_max = st.tsd_max();
  }
}
