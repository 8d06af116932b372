#include "medic/training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

#include "medic/errors.h"
#include "medic/eval.h"

namespace medic {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kErm: return "erm";
    case Strategy::kMldg: return "mldg";
    case Strategy::kMedic: return "medic";
  }
  return "?";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "erm") return Strategy::kErm;
  if (text == "mldg") return Strategy::kMldg;
  if (text == "medic") return Strategy::kMedic;
  throw ConfigError("unknown strategy '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("train: alpha must be > 0");
  if (!(eta > 0.0)) throw ConfigError("train: eta must be > 0");
  if (!(beta >= 0.0)) throw ConfigError("train: beta must be >= 0");
  if (batch_per_cell < 1) throw ConfigError("train: batch_per_cell must be >= 1");
}

namespace {

const Batch& cell_batch(const MetaQuad& quad, QuadCell cell) {
  switch (cell) {
    case QuadCell::kF1: return quad.f1;
    case QuadCell::kF2: return quad.f2;
    case QuadCell::kG1: return quad.g1;
    case QuadCell::kG2: return quad.g2;
  }
  throw DataError("invalid quad cell");
}

void require_finite_step(const StepReport& r) {
  if (!std::isfinite(r.l1) || !std::isfinite(r.l2)) {
    throw NumericError("non-finite loss at iteration " + std::to_string(r.iteration));
  }
}

// Sum of the losses and gradients of `cells` at theta.
LossGrad sum_cells(const ParamVector& theta, const CellObjective& objective,
                   std::span<const QuadCell> cells) {
  LossGrad total{0.0, GradVector::zeros_like(theta)};
  for (QuadCell cell : cells) {
    LossGrad part = objective(theta, cell);
    total.loss += part.loss;
    total.grad.add_scaled(1.0, part.grad);
  }
  return total;
}

constexpr QuadCell kMedicTrain[] = {QuadCell::kF1, QuadCell::kG2};
constexpr QuadCell kMedicTest[] = {QuadCell::kF2, QuadCell::kG1};
constexpr QuadCell kMldgTrain[] = {QuadCell::kF1, QuadCell::kF2};
constexpr QuadCell kMldgTest[] = {QuadCell::kG1, QuadCell::kG2};

}  // namespace

CellObjective quad_objective(const MedicNet& net, const MetaQuad& quad,
                             Objective objective) {
  return [config = net.config, &quad, objective](const ParamVector& params,
                                                 QuadCell cell) {
    const Batch& batch = cell_batch(quad, cell);
    if (batch.size() == 0) throw DataError("empty quad cell");
    MedicNet probe{config, params};
    return loss_and_grad(probe, batch, objective);
  };
}

StepReport meta_update(ParamVector& theta, const CellObjective& objective,
                       std::span<const QuadCell> meta_train,
                       std::span<const QuadCell> meta_test, double alpha,
                       double beta, double eta) {
  StepReport report;
  LossGrad train = sum_cells(theta, objective, meta_train);
  report.l1 = train.loss;

  const ParamVector adapted = param_axpy(-alpha, train.grad, theta);
  LossGrad test = sum_cells(adapted, objective, meta_test);
  report.l2 = test.loss;
  require_finite_step(report);

  // The meta-test gradient is taken at theta_hat and applied to theta.
  theta.add_scaled(-eta, train.grad);
  theta.add_scaled(-eta * beta, test.grad);
  return report;
}

StepReport medic_step(ParamVector& theta, const CellObjective& objective,
                      const TrainConfig& cfg) {
  return meta_update(theta, objective, kMedicTrain, kMedicTest, cfg.alpha, cfg.beta,
                     cfg.eta);
}

StepReport medic_step(MedicNet& net, const MetaQuad& quad, const TrainConfig& cfg) {
  return medic_step(net.params, quad_objective(net, quad, cfg.objective), cfg);
}

StepReport mldg_step(ParamVector& theta, const CellObjective& objective,
                     const TrainConfig& cfg) {
  return meta_update(theta, objective, kMldgTrain, kMldgTest, cfg.alpha, cfg.beta,
                     cfg.eta);
}

StepReport mldg_step(MedicNet& net, const MetaQuad& quad, const TrainConfig& cfg) {
  return mldg_step(net.params, quad_objective(net, quad, cfg.objective), cfg);
}

StepReport erm_step(ParamVector& theta, const PlainObjective& objective,
                    const TrainConfig& cfg) {
  StepReport report;
  LossGrad lg = objective(theta);
  report.l1 = lg.loss;
  require_finite_step(report);
  theta.add_scaled(-cfg.eta, lg.grad);
  return report;
}

StepReport erm_step(MedicNet& net, const MetaQuad& quad, const TrainConfig& cfg) {
  const Batch parts[] = {quad.f1, quad.f2, quad.g1, quad.g2};
  const Batch all = concat(parts);
  if (all.size() == 0) throw DataError("erm_step: empty quad");
  const ModelConfig config = net.config;
  return erm_step(
      net.params,
      [&](const ParamVector& params) {
        return loss_and_grad(MedicNet{config, params}, all, cfg.objective);
      },
      cfg);
}

GradDiagnostic diagnostic_from_gradients(const GradVector& f1, const GradVector& f2,
                                         const GradVector& g1, const GradVector& g2) {
  const std::array<std::pair<const GradVector*, const GradVector*>, 4> pairs = {
      std::pair{&f1, &f2}, {&f1, &g1}, {&g2, &f2}, {&g2, &g1}};
  GradDiagnostic d;
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& [a, b] = pairs[i];
    d.dots[i] = grad_dot(*a, *b);
    const double denom = grad_norm(*a) * grad_norm(*b);
    d.cosines[i] = denom > 0.0 ? std::clamp(d.dots[i] / denom, -1.0, 1.0) : 0.0;
    sum += d.dots[i];
  }
  d.l_reg = -sum;
  return d;
}

GradDiagnostic grad_matching_diagnostic(const MedicNet& net, const MetaQuad& quad,
                                        Objective objective) {
  const CellObjective cells = quad_objective(net, quad, objective);
  return diagnostic_from_gradients(cells(net.params, QuadCell::kF1).grad,
                                   cells(net.params, QuadCell::kF2).grad,
                                   cells(net.params, QuadCell::kG1).grad,
                                   cells(net.params, QuadCell::kG2).grad);
}

double taylor_residual(const ParamVector& theta, const CellObjective& objective,
                       double alpha) {
  if (alpha < 0.0) throw ConfigError("taylor_residual: alpha must be >= 0");
  const LossGrad train = sum_cells(theta, objective, kMedicTrain);
  const LossGrad test = sum_cells(theta, objective, kMedicTest);
  const ParamVector adapted = param_axpy(-alpha, train.grad, theta);
  const double exact = sum_cells(adapted, objective, kMedicTest).loss;
  const double linear = test.loss - alpha * grad_dot(train.grad, test.grad);
  return std::abs(exact - linear);
}

double taylor_residual(const MedicNet& net, const MetaQuad& quad, double alpha,
                       Objective objective) {
  return taylor_residual(net.params, quad_objective(net, quad, objective), alpha);
}

namespace {

std::mt19937_64 iteration_rng(std::uint64_t seed, std::size_t iteration) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(iteration),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(iteration) >> 32)};
  return std::mt19937_64(seq);
}

// ERM needs no domain split, so a single source domain fills both sides.
MetaQuad erm_quad(const MultiDomainDataset& dataset, const OpenSetProtocol& protocol,
                  std::size_t batch_per_cell, std::mt19937_64& rng) {
  if (protocol.source_domains.size() >= 2) {
    return sample_meta_quad(dataset, protocol, batch_per_cell, rng);
  }
  MetaQuad quad;
  std::vector<int> perm = protocol.known_classes;
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto half = static_cast<long>((perm.size() + 1) / 2);
  quad.split.s1 = quad.split.s2 = protocol.source_domains;
  quad.split.c1.assign(perm.begin(), perm.begin() + half);
  quad.split.c2.assign(perm.begin() + half, perm.end());
  std::sort(quad.split.c1.begin(), quad.split.c1.end());
  std::sort(quad.split.c2.begin(), quad.split.c2.end());
  const auto& d = protocol.source_domains;
  quad.f1 = sample_batch(dataset, protocol, d, quad.split.c1, batch_per_cell, rng);
  quad.f2 = sample_batch(dataset, protocol, d, quad.split.c2, batch_per_cell, rng);
  quad.g1 = sample_batch(dataset, protocol, d, quad.split.c1, batch_per_cell, rng);
  quad.g2 = sample_batch(dataset, protocol, d, quad.split.c2, batch_per_cell, rng);
  return quad;
}

}  // namespace

TrainResult train(MedicNet net, const MultiDomainDataset& dataset,
                  const OpenSetProtocol& protocol, const TrainConfig& cfg) {
  cfg.validate();
  if (cfg.strategy != Strategy::kErm && protocol.source_domains.size() < 2) {
    throw ConfigError(std::string(to_string(cfg.strategy)) +
                      " needs at least 2 source domains");
  }
  if (net.config.num_known != protocol.num_known()) {
    throw ConfigError("model num_known does not match protocol");
  }

  const Batch validation = source_batch(dataset, protocol, Split::kValidation);
  auto validation_accuracy = [&](const MedicNet& candidate) {
    return validation.size() == 0
               ? 0.0
               : close_set_accuracy(candidate, validation.x, validation.labels);
  };

  TrainResult result{net, net, 0, validation_accuracy(net), {}};
  result.steps.reserve(cfg.iterations);

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::mt19937_64 rng = iteration_rng(cfg.seed, it);
    const MetaQuad quad =
        cfg.strategy == Strategy::kErm
            ? erm_quad(dataset, protocol, cfg.batch_per_cell, rng)
            : sample_meta_quad(dataset, protocol, cfg.batch_per_cell, rng);

    std::optional<GradDiagnostic> diagnostic;
    if (cfg.diagnostic_every > 0 && it % cfg.diagnostic_every == 0) {
      diagnostic = grad_matching_diagnostic(net, quad, cfg.objective);
    }

    StepReport report;
    switch (cfg.strategy) {
      case Strategy::kErm: report = erm_step(net, quad, cfg); break;
      case Strategy::kMldg: report = mldg_step(net, quad, cfg); break;
      case Strategy::kMedic: report = medic_step(net, quad, cfg); break;
    }
    report.iteration = it;
    report.diagnostic = diagnostic;
    result.steps.push_back(report);

    const std::size_t done = it + 1;
    const bool checkpoint =
        (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0) ||
        done == cfg.iterations;
    if (checkpoint) {
      const double acc = validation_accuracy(net);
      if (acc > result.best_validation_accuracy) {
        result.best_validation_accuracy = acc;
        result.best_net = net;
        result.best_iteration = done;
      }
    }
  }
  result.final_net = std::move(net);
  return result;
}

void write_steps_csv(std::span<const StepReport> steps, std::ostream& out) {
  out << "iteration,l1,l2,dot_f1f2,dot_f1g1,dot_g2f2,dot_g2g1,l_reg\n";
  char buf[64];
  auto field = [&](double v) {
    std::snprintf(buf, sizeof(buf), ",%.17g", v);
    out << buf;
  };
  for (const StepReport& s : steps) {
    out << s.iteration;
    field(s.l1);
    field(s.l2);
    if (s.diagnostic) {
      for (double d : s.diagnostic->dots) field(d);
      field(s.diagnostic->l_reg);
    } else {
      out << ",,,,,";
    }
    out << "\n";
  }
}

}  // namespace medic
