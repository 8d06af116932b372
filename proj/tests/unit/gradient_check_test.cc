#include <gtest/gtest.h>

#include "medic/losses.h"
#include "medic/model.h"
#include "medic/ops.h"
#include "oracles.h"

namespace medic {
namespace {

using testing::max_relative_error;
using testing::random_batch;
using testing::random_net;

struct Case {
  Objective objective;
  bool share;
  std::vector<std::size_t> hidden;
};

class GradientCheck : public ::testing::TestWithParam<Case> {};

TEST_P(GradientCheck, BackwardMatchesCentralDifferences) {
  const Case& c = GetParam();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const MedicNet net = random_net(seed, 4, c.hidden, 3, c.share);
    const Batch batch = random_batch(1000 + seed, 5, 4, 3);
    const LossGrad analytic = loss_and_grad(net, batch, c.objective);
    const GradVector numeric = finite_difference_grad(
        [&](const ParamVector& p) {
          return evaluate_loss(MedicNet{net.config, p}, batch, c.objective);
        },
        net.params, 1e-5);
    EXPECT_LT(max_relative_error(analytic.grad, numeric), 1e-4) << "seed " << seed;
    EXPECT_DOUBLE_EQ(analytic.loss, evaluate_loss(net, batch, c.objective));
  }
}

INSTANTIATE_TEST_SUITE_P(
    Losses, GradientCheck,
    ::testing::Values(Case{Objective::kCrossEntropy, false, {8}},
                      Case{Objective::kOneVsAll, false, {8}},
                      Case{Objective::kAll, false, {8}},
                      Case{Objective::kAll, true, {8}},
                      Case{Objective::kOneVsAll, true, {6, 5}},
                      Case{Objective::kAll, false, {6, 5}}));

TEST(GradientCheckTest, SharedRowsCollectBothPaths) {
  // The shared close-head row gets gradient from cross-entropy and from the
  // one-vs-all positive channel; dropping either path breaks the check.
  const MedicNet net = random_net(7, 4, {8}, 3, true);
  const Batch batch = random_batch(77, 5, 4, 3);
  const GradVector all = loss_and_grad(net, batch, Objective::kAll).grad;
  const GradVector ce = loss_and_grad(net, batch, Objective::kCrossEntropy).grad;
  const GradVector ova = loss_and_grad(net, batch, Objective::kOneVsAll).grad;
  const Matrix& w_all = all.at(segment::kCloseWeight);
  const Matrix& w_ce = ce.at(segment::kCloseWeight);
  const Matrix& w_ova = ova.at(segment::kCloseWeight);
  double ova_mass = 0.0;
  for (std::size_t i = 0; i < w_all.size(); ++i) {
    EXPECT_NEAR(w_all.data()[i], w_ce.data()[i] + w_ova.data()[i], 1e-14);
    ova_mass += std::abs(w_ova.data()[i]);
  }
  EXPECT_GT(ova_mass, 0.0);
}

}  // namespace
}  // namespace medic
