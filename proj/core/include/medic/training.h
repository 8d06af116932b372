#ifndef MEDIC_TRAINING_H_
#define MEDIC_TRAINING_H_

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medic/data.h"
#include "medic/losses.h"
#include "medic/model.h"

namespace medic {

enum class Strategy { kErm, kMldg, kMedic };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);

struct TrainConfig {
  double alpha = 0.01;  // inner (meta-train) learning rate
  double beta = 1.0;    // meta-test weight
  double eta = 0.05;    // outer learning rate
  std::size_t iterations = 3000;
  std::size_t batch_per_cell = 16;
  Strategy strategy = Strategy::kMedic;
  std::uint64_t seed = 0;
  // Model selection period; 0 evaluates only the initial and final nets.
  std::size_t checkpoint_every = 250;
  Objective objective = Objective::kAll;
  // Attach a GradDiagnostic to every n-th StepReport; 0 disables.
  std::size_t diagnostic_every = 0;

  void validate() const;
};

// The four cells of a MetaQuad.
enum class QuadCell { kF1, kF2, kG1, kG2 };

// Gradient-matching terms at the current parameters, ordered
// (F1.F2, F1.G1, G2.F2, G2.G1). l_reg is the negated sum of the dots.
struct GradDiagnostic {
  std::array<double, 4> dots{};
  std::array<double, 4> cosines{};
  double l_reg = 0.0;
};

struct StepReport {
  std::size_t iteration = 0;
  double l1 = 0.0;  // meta-train loss (the full loss for ERM)
  double l2 = 0.0;  // meta-test loss at the adapted parameters (0 for ERM)
  std::optional<GradDiagnostic> diagnostic;
};

// Loss and gradient of a single cell at arbitrary parameters. Lets the update
// rules run on real quads or on injected surrogate losses.
using CellObjective = std::function<LossGrad(const ParamVector&, QuadCell)>;
using PlainObjective = std::function<LossGrad(const ParamVector&)>;

CellObjective quad_objective(const MedicNet& net, const MetaQuad& quad,
                             Objective objective = Objective::kAll);

// First-order meta update shared by MLDG and MEDIC:
//   L1 = sum of meta_train cells at theta
//   theta_hat = theta - alpha * grad L1
//   L2 = sum of meta_test cells at theta_hat
//   theta <- theta - eta * (grad L1 + beta * grad_{theta_hat} L2)
StepReport meta_update(ParamVector& theta, const CellObjective& objective,
                       std::span<const QuadCell> meta_train,
                       std::span<const QuadCell> meta_test, double alpha,
                       double beta, double eta);

// Meta-train (F1, G2), meta-test (F2, G1): domain-wise and class-wise
// matching at once.
StepReport medic_step(ParamVector& theta, const CellObjective& objective,
                      const TrainConfig& cfg);
StepReport medic_step(MedicNet& net, const MetaQuad& quad, const TrainConfig& cfg);

// Domain-only pairing: meta-train (F1, F2), meta-test (G1, G2).
StepReport mldg_step(ParamVector& theta, const CellObjective& objective,
                     const TrainConfig& cfg);
StepReport mldg_step(MedicNet& net, const MetaQuad& quad, const TrainConfig& cfg);

// Plain gradient step on the loss of the union of all four batches.
StepReport erm_step(ParamVector& theta, const PlainObjective& objective,
                    const TrainConfig& cfg);
StepReport erm_step(MedicNet& net, const MetaQuad& quad, const TrainConfig& cfg);

GradDiagnostic diagnostic_from_gradients(const GradVector& f1, const GradVector& f2,
                                         const GradVector& g1, const GradVector& g2);
GradDiagnostic grad_matching_diagnostic(const MedicNet& net, const MetaQuad& quad,
                                        Objective objective = Objective::kAll);

// |[F2 + G1](theta_hat) - ([F2 + G1](theta) - alpha (F1' + G2').(F2' + G1'))|
// with theta_hat = theta - alpha (F1' + G2'): the remainder of the first-order
// expansion of the meta-test loss.
double taylor_residual(const ParamVector& theta, const CellObjective& objective,
                       double alpha);
double taylor_residual(const MedicNet& net, const MetaQuad& quad, double alpha,
                       Objective objective = Objective::kAll);

struct TrainResult {
  MedicNet final_net;
  MedicNet best_net;
  std::size_t best_iteration = 0;
  double best_validation_accuracy = 0.0;
  std::vector<StepReport> steps;
};

// Runs cfg.iterations steps of cfg.strategy. Every checkpoint_every steps
// (and at the start and end) the close-set accuracy on the source validation
// split is measured and the best net retained, the earlier one on ties.
// Quads are drawn from an RNG seeded by (cfg.seed, iteration).
TrainResult train(MedicNet net, const MultiDomainDataset& dataset,
                  const OpenSetProtocol& protocol, const TrainConfig& cfg);

// iteration,l1,l2,dot_f1f2,dot_f1g1,dot_g2f2,dot_g2g1,l_reg; diagnostic
// columns are left empty for steps without one.
void write_steps_csv(std::span<const StepReport> steps, std::ostream& out);

}  // namespace medic

#endif  // MEDIC_TRAINING_H_
