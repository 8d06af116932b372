#include <cmath>
#include <functional>
#include <sstream>

#include <gtest/gtest.h>

#include "medic/errors.h"
#include "medic/training.h"
#include "oracles.h"

namespace medic {
namespace {

using ScalarFn = std::function<double(double)>;

struct ScalarCell {
  ScalarFn f;
  ScalarFn df;
};

ParamVector scalar_param(double theta) {
  ParamVector p;
  p.add_segment("theta", Matrix{{theta}});
  return p;
}

double value_of(const ParamVector& p) { return p.at("theta")(0, 0); }

LossGrad scalar_loss(const ScalarCell& c, const ParamVector& p) {
  GradVector g;
  g.add_segment("theta", Matrix{{c.df(value_of(p))}});
  return {c.f(value_of(p)), std::move(g)};
}

CellObjective scalar_objective(ScalarCell f1, ScalarCell f2, ScalarCell g1, ScalarCell g2) {
  return [=](const ParamVector& p, QuadCell cell) {
    switch (cell) {
      case QuadCell::kF1: return scalar_loss(f1, p);
      case QuadCell::kF2: return scalar_loss(f2, p);
      case QuadCell::kG1: return scalar_loss(g1, p);
      case QuadCell::kG2: return scalar_loss(g2, p);
    }
    throw DataError("bad cell");
  };
}

const ScalarCell kZero{[](double) { return 0.0; }, [](double) { return 0.0; }};
const ScalarCell kSquare{[](double t) { return t * t; }, [](double t) { return 2 * t; }};
const ScalarCell kShifted{[](double t) { return (t - 1) * (t - 1); },
                          [](double t) { return 2 * (t - 1); }};

TrainConfig step_config(double alpha, double beta, double eta) {
  TrainConfig cfg;
  cfg.alpha = alpha;
  cfg.beta = beta;
  cfg.eta = eta;
  return cfg;
}

TEST(MedicStepTest, ScalarToy) {
  ParamVector theta = scalar_param(1.0);
  const StepReport r = medic_step(theta, scalar_objective(kSquare, kShifted, kZero, kZero),
                                  step_config(0.1, 1.0, 0.1));
  EXPECT_NEAR(value_of(theta), 0.84, 1e-12);
  EXPECT_NEAR(r.l1, 1.0, 1e-15);
  EXPECT_NEAR(r.l2, 0.04, 1e-15);
}

TEST(MldgStepTest, ScalarToyWithDomainPairing) {
  // The same arithmetic arrives through mldg when the surrogate cells are
  // placed on its meta-train (F1, F2) and meta-test (G1, G2) sides.
  ParamVector theta = scalar_param(1.0);
  mldg_step(theta, scalar_objective(kSquare, kZero, kShifted, kZero), step_config(0.1, 1.0, 0.1));
  EXPECT_NEAR(value_of(theta), 0.84, 1e-12);
}

class RealQuad : public ::testing::Test {
 protected:
  void SetUp() override {
    SyntheticConfig sc;
    sc.num_domains = 3;
    sc.num_classes = 5;
    sc.samples_per_class_per_domain = 20;
    sc.transforms = rotation_transforms(std::vector<double>{0, 20, 40});
    dataset_ = generate_synthetic(sc);
    protocol_ = make_protocol(dataset_, 2, 4);
    std::mt19937_64 rng(9);
    quad_ = sample_meta_quad(dataset_, protocol_, 4, rng);
    net_ = testing::random_net(9, 2, {8}, 4);
  }

  // One step on the sum of the given cells' losses.
  ParamVector joint_step(std::initializer_list<QuadCell> cells, double eta) const {
    const CellObjective obj = quad_objective(net_, quad_);
    ParamVector theta = net_.params;
    for (QuadCell c : cells) theta.add_scaled(-eta, obj(net_.params, c).grad);
    return theta;
  }

  static double max_abs_diff(const ParamVector& a, const ParamVector& b) {
    const auto x = a.flatten();
    const auto y = b.flatten();
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(x[i] - y[i]));
    return worst;
  }

  MultiDomainDataset dataset_;
  OpenSetProtocol protocol_;
  MetaQuad quad_;
  MedicNet net_;
};

TEST_F(RealQuad, ZeroAlphaIsJointStep) {
  MedicNet net = net_;
  medic_step(net, quad_, step_config(0.0, 1.0, 0.05));
  const ParamVector expected =
      joint_step({QuadCell::kF1, QuadCell::kF2, QuadCell::kG1, QuadCell::kG2}, 0.05);
  EXPECT_LT(max_abs_diff(net.params, expected), 1e-10);

  // erm averages over the union; with equal cell sizes that is the sum / 4.
  MedicNet erm = net_;
  erm_step(erm, quad_, step_config(0.01, 1.0, 0.2));
  EXPECT_LT(max_abs_diff(erm.params, expected), 1e-10);
}

TEST_F(RealQuad, ZeroBetaIsMetaTrainStep) {
  MedicNet medic = net_;
  medic_step(medic, quad_, step_config(0.1, 0.0, 0.05));
  EXPECT_LT(max_abs_diff(medic.params, joint_step({QuadCell::kF1, QuadCell::kG2}, 0.05)), 1e-12);

  MedicNet mldg = net_;
  mldg_step(mldg, quad_, step_config(0.1, 0.0, 0.05));
  EXPECT_LT(max_abs_diff(mldg.params, joint_step({QuadCell::kF1, QuadCell::kF2}, 0.05)), 1e-12);
}

TEST_F(RealQuad, MldgZeroAlpha) {
  MedicNet mldg = net_;
  mldg_step(mldg, quad_, step_config(0.0, 0.5, 0.05));
  const CellObjective obj = quad_objective(net_, quad_);
  ParamVector expected = net_.params;
  expected.add_scaled(-0.05, obj(net_.params, QuadCell::kF1).grad);
  expected.add_scaled(-0.05, obj(net_.params, QuadCell::kF2).grad);
  expected.add_scaled(-0.025, obj(net_.params, QuadCell::kG1).grad);
  expected.add_scaled(-0.025, obj(net_.params, QuadCell::kG2).grad);
  EXPECT_LT(max_abs_diff(mldg.params, expected), 1e-10);
}

TEST_F(RealQuad, ReportedLossesAreFinite) {
  MedicNet net = net_;
  const StepReport r = medic_step(net, quad_, TrainConfig{});
  EXPECT_TRUE(std::isfinite(r.l1));
  EXPECT_TRUE(std::isfinite(r.l2));
  EXPECT_GE(r.l1, 0.0);
  EXPECT_GE(r.l2, 0.0);
}

TEST_F(RealQuad, EmptyCellRejected) {
  MetaQuad broken = quad_;
  broken.g1 = Batch{Matrix(0, 2), {}, {}};
  MedicNet net = net_;
  EXPECT_THROW(medic_step(net, broken, TrainConfig{}), DataError);
}

TEST(ErmStepTest, ZeroEtaLeavesParameters) {
  ParamVector theta = scalar_param(1.0);
  erm_step(theta, [](const ParamVector& p) { return scalar_loss(kSquare, p); },
           step_config(0.1, 1.0, 0.0));
  EXPECT_EQ(value_of(theta), 1.0);
}

TEST(ErmStepTest, QuadraticStep) {
  ParamVector theta = scalar_param(1.0);
  const StepReport r = erm_step(
      theta, [](const ParamVector& p) { return scalar_loss(kSquare, p); }, step_config(0.1, 1.0, 0.1));
  EXPECT_NEAR(value_of(theta), 0.8, 1e-15);
  EXPECT_EQ(r.l1, 1.0);
}

TEST_F(RealQuad, ErmDescends) {
  MedicNet net = net_;
  const Batch parts[] = {quad_.f1, quad_.f2, quad_.g1, quad_.g2};
  const Batch all = concat(parts);
  const double before = total_loss(net, all);
  erm_step(net, quad_, step_config(0.01, 1.0, 1e-3));
  EXPECT_LT(total_loss(net, all), before);
}

TEST(DiagnosticTest, OrthogonalExample) {
  auto vec = [](double a, double b) {
    GradVector g;
    g.add_segment("w", Matrix{{a, b}});
    return g;
  };
  const GradDiagnostic d =
      diagnostic_from_gradients(vec(1, 0), vec(0, 1), vec(1, 0), vec(0, 1));
  EXPECT_EQ(d.dots, (std::array<double, 4>{0, 1, 1, 0}));
  EXPECT_EQ(d.l_reg, -2.0);
  EXPECT_EQ(d.cosines, (std::array<double, 4>{0, 1, 1, 0}));
}

TEST(DiagnosticTest, EqualVectors) {
  GradVector g;
  g.add_segment("w", Matrix{{0.3, -1.5, 2.0}});
  const double sq = 0.09 + 2.25 + 4.0;
  const GradDiagnostic d = diagnostic_from_gradients(g, g, g, g);
  EXPECT_NEAR(d.l_reg, -4.0 * sq, 1e-12);
  for (double c : d.cosines) EXPECT_NEAR(c, 1.0, 1e-15);
}

TEST_F(RealQuad, CosinesBoundedAndRegMatches) {
  const GradDiagnostic d = grad_matching_diagnostic(net_, quad_);
  double sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_GE(d.cosines[i], -1.0);
    EXPECT_LE(d.cosines[i], 1.0);
    sum += d.dots[i];
  }
  EXPECT_EQ(d.l_reg, -sum);
}

TEST_F(RealQuad, TaylorResidualZeroAlpha) {
  EXPECT_EQ(taylor_residual(net_, quad_, 0.0), 0.0);
}

TEST_F(RealQuad, TaylorResidualIsSecondOrder) {
  const double alphas[] = {1e-2, 5e-3, 2.5e-3};
  std::vector<double> r;
  for (double a : alphas) r.push_back(taylor_residual(net_, quad_, a));
  for (double v : r) EXPECT_GT(v, 0.0);
  // Least-squares slope in log-log space.
  double mx = 0, my = 0;
  for (int i = 0; i < 3; ++i) {
    mx += std::log(alphas[i]) / 3;
    my += std::log(r[i]) / 3;
  }
  double num = 0, den = 0;
  for (int i = 0; i < 3; ++i) {
    num += (std::log(alphas[i]) - mx) * (std::log(r[i]) - my);
    den += (std::log(alphas[i]) - mx) * (std::log(alphas[i]) - mx);
  }
  EXPECT_NEAR(num / den, 2.0, 0.3);
}

TEST(TaylorResidualTest, QuadraticClosedForm) {
  // Meta-train F1 = theta^2, meta-test F2 = (theta - 1)^2; at theta = 1 the
  // remainder is alpha^2 * (F1')^2 * L2'' / 2 = 4 alpha^2.
  const CellObjective obj = scalar_objective(kSquare, kShifted, kZero, kZero);
  for (double a : {0.1, 0.03, 0.5}) {
    EXPECT_NEAR(taylor_residual(scalar_param(1.0), obj, a), 4 * a * a, 1e-14);
  }
}

class TrainTest : public ::testing::Test {
 protected:
  void SetUp() override {
    SyntheticConfig sc;
    sc.num_domains = 3;
    sc.num_classes = 4;
    sc.samples_per_class_per_domain = 40;
    sc.cluster_std = 0.2;
    sc.transforms = rotation_transforms(std::vector<double>{0, 10, 60});
    dataset_ = generate_synthetic(sc);
    protocol_ = make_protocol(dataset_, 2, 3);
  }

  MedicNet fresh(std::uint64_t seed = 1) const { return init_model({2, {16}, 3, false, seed}); }

  MultiDomainDataset dataset_;
  OpenSetProtocol protocol_;
};

TEST_F(TrainTest, ZeroIterationsReturnsInitialNet) {
  TrainConfig cfg;
  cfg.iterations = 0;
  const TrainResult r = train(fresh(), dataset_, protocol_, cfg);
  EXPECT_EQ(r.final_net.params, fresh().params);
  EXPECT_EQ(r.best_net.params, fresh().params);
  EXPECT_EQ(r.best_iteration, 0u);
  EXPECT_TRUE(r.steps.empty());
}

TEST_F(TrainTest, Deterministic) {
  TrainConfig cfg;
  cfg.iterations = 60;
  cfg.checkpoint_every = 20;
  cfg.seed = 5;
  const TrainResult a = train(fresh(), dataset_, protocol_, cfg);
  const TrainResult b = train(fresh(), dataset_, protocol_, cfg);
  EXPECT_EQ(a.final_net.params, b.final_net.params);
  EXPECT_EQ(a.best_net.params, b.best_net.params);
  std::ostringstream sa, sb;
  write_steps_csv(a.steps, sa);
  write_steps_csv(b.steps, sb);
  EXPECT_EQ(sa.str(), sb.str());

  cfg.seed = 6;
  EXPECT_NE(train(fresh(), dataset_, protocol_, cfg).final_net.params, a.final_net.params);
}

TEST_F(TrainTest, MetaStrategiesNeedTwoSources) {
  SyntheticConfig sc;
  sc.num_domains = 3;
  sc.num_classes = 4;
  sc.samples_per_class_per_domain = 10;
  std::vector<LabeledSample> samples = generate_synthetic(sc).samples();
  std::erase_if(samples, [](const LabeledSample& s) { return s.domain_id == 1; });
  const MultiDomainDataset two(samples);
  const OpenSetProtocol p = make_protocol(two, 2, 3);
  TrainConfig cfg;
  cfg.iterations = 5;
  for (Strategy s : {Strategy::kMedic, Strategy::kMldg}) {
    cfg.strategy = s;
    EXPECT_THROW(train(fresh(), two, p, cfg), ConfigError);
  }
  cfg.strategy = Strategy::kErm;
  EXPECT_NO_THROW(train(fresh(), two, p, cfg));
}

TEST_F(TrainTest, SeparableTaskIsLearned) {
  for (Strategy s : {Strategy::kErm, Strategy::kMldg, Strategy::kMedic}) {
    TrainConfig cfg;
    cfg.strategy = s;
    cfg.iterations = 2000;
    cfg.checkpoint_every = 2000;
    cfg.seed = 3;
    const TrainResult r = train(fresh(), dataset_, protocol_, cfg);
    const Batch val = source_batch(dataset_, protocol_, Split::kValidation);
    double correct = 0;
    const Matrix logits = forward_close(r.final_net, val.x);
    for (std::size_t i = 0; i < val.size(); ++i) {
      const auto row = logits.row(i);
      correct += static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()) ==
                 val.labels[i];
    }
    EXPECT_GE(correct / static_cast<double>(val.size()), 0.95) << to_string(s);
    for (const StepReport& step : r.steps) {
      ASSERT_TRUE(std::isfinite(step.l1) && std::isfinite(step.l2));
    }
  }
}

TEST_F(TrainTest, StepsCsvHasDiagnosticColumns) {
  TrainConfig cfg;
  cfg.iterations = 4;
  cfg.diagnostic_every = 2;
  const TrainResult r = train(fresh(), dataset_, protocol_, cfg);
  std::ostringstream out;
  write_steps_csv(r.steps, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iteration,l1,l2,dot_f1f2,dot_f1g1,dot_g2f2,dot_g2g1,l_reg");
  int with_diag = 0, rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (!line.ends_with(",")) ++with_diag;
  }
  EXPECT_EQ(rows, 4);
  EXPECT_EQ(with_diag, 2);
}

TEST(StrategyTest, ParseRoundTrip) {
  for (Strategy s : {Strategy::kErm, Strategy::kMldg, Strategy::kMedic}) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  }
  EXPECT_THROW(parse_strategy("sgd"), ConfigError);
}

}  // namespace
}  // namespace medic
