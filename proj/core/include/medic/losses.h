#ifndef MEDIC_LOSSES_H_
#define MEDIC_LOSSES_H_

#include <cstddef>
#include <span>
#include <vector>

#include "medic/matrix.h"
#include "medic/model.h"
#include "medic/param_vector.h"

namespace medic {

// A minibatch: one feature row per sample plus its known-class index in
// [0, |C|).
struct Batch {
  Matrix x;
  std::vector<std::size_t> labels;
  // Dataset positions of the rows, when drawn from a dataset.
  std::vector<std::size_t> origin;

  std::size_t size() const { return labels.size(); }
};

// Concatenates batches row-wise.
Batch concat(std::span<const Batch> parts);

// Which training objective a loss evaluation uses. kAll is the open-set loss
// (cross-entropy + one-vs-all); kCrossEntropy trains the close head only.
enum class Objective { kCrossEntropy, kOneVsAll, kAll };

// Mean over the batch of -log softmax(logits)[label].
double ce_loss(const Matrix& logits, std::span<const std::size_t> labels);

// Mean over the batch of
//   -log p(y | x) - min_{j != y} log(1 - p(j | x)),
// where the min picks the hardest negative (largest p_j, lowest j on ties).
double ova_loss(const BinaryProbs& probs, std::span<const std::size_t> labels);

// Index of the hardest negative for a sample with label y.
std::size_t hardest_negative(std::span<const double> probs_row, std::size_t label);

// ce_loss + ova_loss on the same batch.
double total_loss(const MedicNet& net, const Batch& batch);

double evaluate_loss(const MedicNet& net, const Batch& batch, Objective objective);

struct LossGrad {
  double loss = 0.0;
  GradVector grad;
};

// Loss value and its exact reverse-mode gradient with respect to net.params.
LossGrad loss_and_grad(const MedicNet& net, const Batch& batch,
                       Objective objective = Objective::kAll);

}  // namespace medic

#endif  // MEDIC_LOSSES_H_
