#include <gtest/gtest.h>

#include "medic/eval.h"
#include "oracles.h"

namespace medic {
namespace {

TEST(OscrPropertyTest, MatchesBruteForceAndPairwise) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto v = testing::random_outcomes(rng, 50);
    const double got = oscr(v).oscr;
    EXPECT_EQ(got, testing::oscr_bruteforce(v)) << "trial " << trial;
    EXPECT_EQ(got, testing::oscr_pairwise(v)) << "trial " << trial;
    EXPECT_GE(got, 0.0);
    EXPECT_LE(got, 1.0);
  }
}

TEST(OscrPropertyTest, UnitIffPerfectSeparation) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto v = testing::random_outcomes(rng, 12);
    double min_known = 2.0, max_unknown = -1.0;
    bool all_correct = true;
    for (const auto& o : v) {
      if (o.known) {
        min_known = std::min(min_known, o.score);
        all_correct = all_correct && o.correct;
      } else {
        max_unknown = std::max(max_unknown, o.score);
      }
    }
    const bool perfect = all_correct && min_known > max_unknown;
    EXPECT_EQ(oscr(v).oscr == 1.0, perfect);
  }
}

TEST(OscrPropertyTest, StrictlyIncreasingTransformInvariant) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto v = testing::random_outcomes(rng);
    auto w = v;
    for (auto& o : w) o.score = std::tanh(4.0 * o.score - 1.0) * 7.0 + 0.25;
    EXPECT_EQ(oscr(v).oscr, oscr(w).oscr);
  }
}

TEST(OscrPropertyTest, RatesNonIncreasing) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pts = oscr(testing::random_outcomes(rng)).curve.points;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      ASSERT_GE(pts[i - 1].ccr, pts[i].ccr);
      ASSERT_GE(pts[i - 1].fpr, pts[i].fpr);
      ASSERT_LE(pts[i].ccr, 1.0);
      ASSERT_LE(pts[i].fpr, 1.0);
    }
  }
}

}  // namespace
}  // namespace medic
