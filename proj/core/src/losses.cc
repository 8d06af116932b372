#include "medic/losses.h"

#include <cmath>
#include <string>

#include "medic/errors.h"
#include "medic/ops.h"

namespace medic {

namespace {

void require_labels(std::span<const std::size_t> labels, std::size_t rows,
                    std::size_t classes, const char* who) {
  if (labels.empty()) throw DataError(std::string(who) + ": empty batch");
  if (labels.size() != rows) {
    throw DimensionError(std::string(who) + ": label count does not match rows");
  }
  for (std::size_t y : labels) {
    if (y >= classes) {
      throw DataError(std::string(who) + ": label " + std::to_string(y) +
                      " out of range for " + std::to_string(classes) + " classes");
    }
  }
}

void require_finite_loss(double value, const char* op) {
  if (!std::isfinite(value)) {
    throw NumericError(std::string("non-finite loss produced by ") + op);
  }
}

bool wants_ce(Objective o) { return o != Objective::kOneVsAll; }
bool wants_ova(Objective o) { return o != Objective::kCrossEntropy; }

}  // namespace

Batch concat(std::span<const Batch> parts) {
  std::size_t rows = 0;
  std::size_t cols = 0;
  for (const Batch& b : parts) {
    if (b.size() == 0) continue;
    if (cols != 0 && b.x.cols() != cols) throw DimensionError("concat: feature mismatch");
    cols = b.x.cols();
    rows += b.size();
  }
  Batch out{Matrix(rows, cols), {}, {}};
  out.labels.reserve(rows);
  std::size_t r = 0;
  for (const Batch& b : parts) {
    for (std::size_t i = 0; i < b.size(); ++i, ++r) {
      auto src = b.x.row(i);
      std::copy(src.begin(), src.end(), out.x.row(r).begin());
      out.labels.push_back(b.labels[i]);
      if (b.origin.size() == b.size()) out.origin.push_back(b.origin[i]);
    }
  }
  if (out.origin.size() != out.size()) out.origin.clear();
  return out;
}

double ce_loss(const Matrix& logits, std::span<const std::size_t> labels) {
  require_labels(labels, logits.rows(), logits.cols(), "ce_loss");
  const Matrix probs = softmax_rows(logits);
  double sum = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    sum += neg_log_clamped(probs(b, labels[b]));
  }
  return sum / static_cast<double>(labels.size());
}

std::size_t hardest_negative(std::span<const double> probs_row, std::size_t label) {
  std::size_t best = label == 0 ? 1 : 0;
  for (std::size_t j = 0; j < probs_row.size(); ++j) {
    if (j != label && probs_row[j] > probs_row[best]) best = j;
  }
  return best;
}

double ova_loss(const BinaryProbs& probs, std::span<const std::size_t> labels) {
  const Matrix& p = probs.values;
  if (p.cols() < 2) throw DimensionError("ova_loss: needs at least 2 classes");
  require_labels(labels, p.rows(), p.cols(), "ova_loss");
  double sum = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    auto row = p.row(b);
    const std::size_t y = labels[b];
    const std::size_t j = hardest_negative(row, y);
    sum += neg_log_clamped(row[y]) + neg_log_clamped(1.0 - row[j]);
  }
  return sum / static_cast<double>(labels.size());
}

double evaluate_loss(const MedicNet& net, const Batch& batch, Objective objective) {
  const ForwardCache cache = forward(net, batch.x);
  double value = 0.0;
  if (wants_ce(objective)) {
    const double ce = ce_loss(cache.close_logits, batch.labels);
    require_finite_loss(ce, "ce_loss");
    value += ce;
  }
  if (wants_ova(objective)) {
    const double ova = ova_loss(
        binary_probs_from_logits(cache.pos_logits, cache.neg_logits), batch.labels);
    require_finite_loss(ova, "ova_loss");
    value += ova;
  }
  return value;
}

double total_loss(const MedicNet& net, const Batch& batch) {
  return evaluate_loss(net, batch, Objective::kAll);
}

LossGrad loss_and_grad(const MedicNet& net, const Batch& batch, Objective objective) {
  const ForwardCache cache = forward(net, batch.x);
  const std::size_t n = batch.size();
  const std::size_t c = net.config.num_known;
  const double inv_n = 1.0 / static_cast<double>(n == 0 ? 1 : n);

  Matrix d_close(n, c);
  Matrix d_pos(n, c);
  Matrix d_neg(n, c);
  double value = 0.0;

  if (wants_ce(objective)) {
    require_labels(batch.labels, n, c, "ce_loss");
    const Matrix probs = softmax_rows(cache.close_logits);
    double sum = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t y = batch.labels[b];
      const double py = probs(b, y);
      sum += neg_log_clamped(py);
      // d(-log p_y)/dz_k = dL/dp_y * p_y * (delta_yk - p_k)
      const double scale = neg_log_clamped_derivative(py) * py * inv_n;
      for (std::size_t k = 0; k < c; ++k) {
        d_close(b, k) = scale * ((k == y ? 1.0 : 0.0) - probs(b, k));
      }
    }
    const double ce = sum / static_cast<double>(n);
    require_finite_loss(ce, "ce_loss");
    value += ce;
  }

  if (wants_ova(objective)) {
    require_labels(batch.labels, n, c, "ova_loss");
    const BinaryProbs binary = binary_probs_from_logits(cache.pos_logits, cache.neg_logits);
    double sum = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      auto row = binary.values.row(b);
      const std::size_t y = batch.labels[b];
      const std::size_t j = hardest_negative(row, y);
      const double py = row[y];
      const double pj = row[j];
      sum += neg_log_clamped(py) + neg_log_clamped(1.0 - pj);
      // dp/dpos = p(1-p), dp/dneg = -p(1-p)
      const double gy = neg_log_clamped_derivative(py) * py * (1.0 - py) * inv_n;
      const double gj = -neg_log_clamped_derivative(1.0 - pj) * pj * (1.0 - pj) * inv_n;
      d_pos(b, y) += gy;
      d_neg(b, y) -= gy;
      d_pos(b, j) += gj;
      d_neg(b, j) -= gj;
    }
    const double ova = sum / static_cast<double>(n);
    require_finite_loss(ova, "ova_loss");
    value += ova;
  }

  return {value, backward(net, cache, d_close, d_pos, d_neg)};
}

}  // namespace medic
