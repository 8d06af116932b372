#ifndef MEDIC_EVAL_H_
#define MEDIC_EVAL_H_

#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "medic/data.h"
#include "medic/model.h"

namespace medic {

// Which confidence decides known vs unknown: the close head's max softmax
// (kCls) or the positive channel of the one-vs-all sub-classifier picked by
// the close head (kBcls).
enum class ScoreMode { kCls, kBcls };

std::string_view to_string(ScoreMode mode);
ScoreMode parse_score_mode(std::string_view text);

// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> values);

double conf_cls(std::span<const double> close_probs);
double conf_bcls(std::span<const double> close_probs, std::span<const double> binary_probs);

struct ScoredPrediction {
  std::size_t predicted_class = 0;
  double conf_cls = 0.0;
  double conf_bcls = 0.0;
  std::optional<std::size_t> truth;  // nullopt for unknown-class samples

  double score(ScoreMode mode) const {
    return mode == ScoreMode::kCls ? conf_cls : conf_bcls;
  }
  bool is_known() const { return truth.has_value(); }
  bool correct() const { return truth && *truth == predicted_class; }
};

std::vector<ScoredPrediction> score_samples(
    const MedicNet& net, const Matrix& x,
    std::span<const std::optional<std::size_t>> truth);

// Known class with its score, or unknown (label empty) when score <= mu.
struct Prediction {
  std::optional<std::size_t> label;
  double score = 0.0;
};
std::vector<Prediction> predict(const MedicNet& net, const Matrix& x, ScoreMode mode,
                                double mu);

// Fraction of rows whose close-head argmax equals the label.
double close_set_accuracy(const MedicNet& net, const Matrix& x,
                          std::span<const std::size_t> labels);

// Mode-free view used by the threshold metrics.
struct ScoredOutcome {
  double score = 0.0;
  bool known = false;
  bool correct = false;  // only meaningful for known samples
};
std::vector<ScoredOutcome> outcomes(std::span<const ScoredPrediction> predictions,
                                    ScoreMode mode);

struct HScore {
  double acc_known = 0.0;    // knowns accepted (score > mu) and correctly classified
  double acc_unknown = 0.0;  // unknowns rejected (score <= mu)
  double h = 0.0;
};

double harmonic_mean(double a, double b);
HScore h_score(std::span<const ScoredOutcome> predictions, double mu);

struct HScoreSweep {
  std::vector<double> thresholds;
  std::vector<HScore> values;
  double best_threshold = 0.0;  // smallest maximiser
  double best_h = 0.0;
};

// `count` evenly spaced thresholds on [0, 1].
std::vector<double> default_threshold_grid(std::size_t count = 101);

HScoreSweep h_score_sweep(std::span<const ScoredOutcome> predictions,
                          std::span<const double> grid);

struct CurvePoint {
  double threshold = 0.0;
  double ccr = 0.0;  // correctly classified knowns with score > threshold / N_known
  double fpr = 0.0;  // unknowns with score > threshold / N_unknown
  double acc_known = 0.0;
  double acc_unknown = 0.0;
  double h_score = 0.0;
};

// Points in ascending threshold order: -inf, each distinct score, +inf.
struct RocCurve {
  std::vector<CurvePoint> points;
};

struct OscrResult {
  double oscr = 0.0;
  RocCurve curve;
};

// Area under the (FPR, CCR) curve traced by a threshold sweeping all distinct
// scores, by the trapezoidal rule. Accumulated in integer counts so the value
// is exact up to the final division.
OscrResult oscr(std::span<const ScoredOutcome> predictions);

struct EvalReport {
  ScoreMode mode = ScoreMode::kBcls;
  double acc = 0.0;
  double oscr = 0.0;
  HScoreSweep target_sweep;
  // Chosen on the source validation split, which has no unknown classes: the
  // grid threshold maximising acc_known * retained fraction. A proxy only.
  double best_source_threshold = 0.0;
  double h_at_best_source_threshold = 0.0;
  bool source_threshold_is_proxy = true;
  RocCurve curve;
};

EvalReport evaluate(const MedicNet& net, const OpenSetProtocol& protocol,
                    const MultiDomainDataset& dataset, ScoreMode mode,
                    std::span<const double> grid);

// threshold,ccr,fpr,acc_known,acc_unknown,h_score
void write_curve_csv(const RocCurve& curve, std::ostream& out);

}  // namespace medic

#endif  // MEDIC_EVAL_H_
