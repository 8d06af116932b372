#include "medic/eval.h"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "medic/errors.h"
#include "medic/ops.h"

namespace medic {

std::string_view to_string(ScoreMode mode) {
  return mode == ScoreMode::kCls ? "cls" : "bcls";
}

ScoreMode parse_score_mode(std::string_view text) {
  if (text == "cls") return ScoreMode::kCls;
  if (text == "bcls") return ScoreMode::kBcls;
  throw ConfigError("unknown score mode '" + std::string(text) + "'");
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double conf_cls(std::span<const double> close_probs) {
  return close_probs[argmax(close_probs)];
}

double conf_bcls(std::span<const double> close_probs,
                 std::span<const double> binary_probs) {
  return binary_probs[argmax(close_probs)];
}

std::vector<ScoredPrediction> score_samples(
    const MedicNet& net, const Matrix& x,
    std::span<const std::optional<std::size_t>> truth) {
  if (truth.size() != x.rows()) throw DimensionError("score_samples: truth count");
  const ForwardCache cache = forward(net, x);
  const Matrix close = softmax_rows(cache.close_logits);
  const BinaryProbs binary = binary_probs_from_logits(cache.pos_logits, cache.neg_logits);
  std::vector<ScoredPrediction> out(x.rows());
  for (std::size_t b = 0; b < x.rows(); ++b) {
    auto row = close.row(b);
    out[b].predicted_class = argmax(row);
    out[b].conf_cls = conf_cls(row);
    out[b].conf_bcls = conf_bcls(row, binary.values.row(b));
    out[b].truth = truth[b];
  }
  return out;
}

std::vector<Prediction> predict(const MedicNet& net, const Matrix& x, ScoreMode mode,
                                double mu) {
  std::vector<std::optional<std::size_t>> none(x.rows());
  std::vector<Prediction> out;
  out.reserve(x.rows());
  for (const ScoredPrediction& s : score_samples(net, x, none)) {
    const double score = s.score(mode);
    // Strictly larger than mu is known; ties are rejected.
    out.push_back({score > mu ? std::optional(s.predicted_class) : std::nullopt, score});
  }
  return out;
}

double close_set_accuracy(const MedicNet& net, const Matrix& x,
                          std::span<const std::size_t> labels) {
  if (labels.empty()) throw DataError("close_set_accuracy: empty sample set");
  if (labels.size() != x.rows()) throw DimensionError("close_set_accuracy: label count");
  const Matrix logits = forward_close(net, x);
  std::size_t correct = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (argmax(logits.row(b)) == labels[b]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::vector<ScoredOutcome> outcomes(std::span<const ScoredPrediction> predictions,
                                    ScoreMode mode) {
  std::vector<ScoredOutcome> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.push_back({p.score(mode), p.is_known(), p.correct()});
  return out;
}

double harmonic_mean(double a, double b) {
  return a + b > 0.0 ? 2.0 * a * b / (a + b) : 0.0;
}

namespace {

struct Populations {
  std::int64_t known = 0;
  std::int64_t unknown = 0;
};

Populations require_populations(std::span<const ScoredOutcome> predictions,
                                const char* who) {
  Populations p;
  for (const auto& o : predictions) (o.known ? p.known : p.unknown)++;
  if (p.known == 0 || p.unknown == 0) {
    throw DataError(std::string(who) + ": needs at least one known and one unknown sample");
  }
  return p;
}

HScore h_from_counts(std::int64_t accepted_correct, std::int64_t rejected_unknown,
                     const Populations& pop) {
  HScore s;
  s.acc_known = static_cast<double>(accepted_correct) / static_cast<double>(pop.known);
  s.acc_unknown = static_cast<double>(rejected_unknown) / static_cast<double>(pop.unknown);
  s.h = harmonic_mean(s.acc_known, s.acc_unknown);
  return s;
}

}  // namespace

HScore h_score(std::span<const ScoredOutcome> predictions, double mu) {
  const Populations pop = require_populations(predictions, "h_score");
  std::int64_t accepted_correct = 0;
  std::int64_t rejected_unknown = 0;
  for (const auto& o : predictions) {
    if (o.known) {
      if (o.correct && o.score > mu) ++accepted_correct;
    } else if (!(o.score > mu)) {
      ++rejected_unknown;
    }
  }
  return h_from_counts(accepted_correct, rejected_unknown, pop);
}

std::vector<double> default_threshold_grid(std::size_t count) {
  if (count < 1) throw ConfigError("threshold grid needs at least one point");
  if (count == 1) return {0.0};
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    grid[i] = static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return grid;
}

HScoreSweep h_score_sweep(std::span<const ScoredOutcome> predictions,
                          std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("h_score_sweep: empty grid");
  HScoreSweep sweep;
  sweep.thresholds.assign(grid.begin(), grid.end());
  sweep.best_h = -1.0;
  for (double mu : grid) {
    HScore s = h_score(predictions, mu);
    const bool better = s.h > sweep.best_h || (s.h == sweep.best_h && mu < sweep.best_threshold);
    if (better) {
      sweep.best_h = s.h;
      sweep.best_threshold = mu;
    }
    sweep.values.push_back(s);
  }
  return sweep;
}

OscrResult oscr(std::span<const ScoredOutcome> predictions) {
  const Populations pop = require_populations(predictions, "oscr");

  std::vector<ScoredOutcome> sorted(predictions.begin(), predictions.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredOutcome& a, const ScoredOutcome& b) { return a.score < b.score; });

  std::int64_t correct_total = 0;
  for (const auto& o : sorted) correct_total += (o.known && o.correct) ? 1 : 0;

  // Counts strictly above each threshold, ascending: -inf, distinct scores, +inf.
  struct Counts {
    double threshold;
    std::int64_t correct_above;
    std::int64_t unknown_above;
  };
  std::vector<Counts> counts;
  counts.push_back({-std::numeric_limits<double>::infinity(), correct_total, pop.unknown});
  std::int64_t correct_above = correct_total;
  std::int64_t unknown_above = pop.unknown;
  for (std::size_t i = 0; i < sorted.size();) {
    const double s = sorted[i].score;
    for (; i < sorted.size() && sorted[i].score == s; ++i) {
      if (!sorted[i].known) {
        --unknown_above;
      } else if (sorted[i].correct) {
        --correct_above;
      }
    }
    counts.push_back({s, correct_above, unknown_above});
  }
  counts.push_back({std::numeric_limits<double>::infinity(), 0, 0});

  OscrResult result;
  result.curve.points.reserve(counts.size());
  for (const Counts& c : counts) {
    CurvePoint p;
    p.threshold = c.threshold;
    HScore h = h_from_counts(c.correct_above, pop.unknown - c.unknown_above, pop);
    p.ccr = h.acc_known;
    p.fpr = static_cast<double>(c.unknown_above) / static_cast<double>(pop.unknown);
    p.acc_known = h.acc_known;
    p.acc_unknown = h.acc_unknown;
    p.h_score = h.h;
    result.curve.points.push_back(p);
  }

  // Twice the trapezoidal area, in units of 1 / (N_known * N_unknown).
  std::int64_t twice_area = 0;
  for (std::size_t i = 0; i + 1 < counts.size(); ++i) {
    const Counts& lo = counts[i + 1];  // higher threshold, smaller FPR
    const Counts& hi = counts[i];
    twice_area += (hi.unknown_above - lo.unknown_above) *
                  (hi.correct_above + lo.correct_above);
  }
  result.oscr = static_cast<double>(twice_area) /
                (2.0 * static_cast<double>(pop.known) * static_cast<double>(pop.unknown));
  return result;
}

EvalReport evaluate(const MedicNet& net, const OpenSetProtocol& protocol,
                    const MultiDomainDataset& dataset, ScoreMode mode,
                    std::span<const double> grid) {
  const TargetSet target = target_set(dataset, protocol);
  const std::vector<ScoredPrediction> scored = score_samples(net, target.x, target.truth);
  const std::vector<ScoredOutcome> scores = outcomes(scored, mode);

  EvalReport report;
  report.mode = mode;

  std::size_t known = 0;
  std::size_t correct = 0;
  for (const auto& s : scored) {
    if (s.is_known()) {
      ++known;
      correct += s.correct() ? 1 : 0;
    }
  }
  if (known == 0) throw DataError("evaluate: target domain has no known-class samples");
  report.acc = static_cast<double>(correct) / static_cast<double>(known);

  OscrResult o = oscr(scores);
  report.oscr = o.oscr;
  report.curve = std::move(o.curve);
  report.target_sweep = h_score_sweep(scores, grid);

  const Batch validation = source_batch(dataset, protocol, Split::kValidation);
  report.best_source_threshold = grid.front();
  if (validation.size() > 0) {
    std::vector<std::optional<std::size_t>> truth(validation.labels.begin(),
                                                  validation.labels.end());
    const auto val_scored = score_samples(net, validation.x, truth);
    const double n = static_cast<double>(val_scored.size());
    double best = -1.0;
    for (double mu : grid) {
      std::size_t retained = 0;
      std::size_t accepted_correct = 0;
      for (const auto& s : val_scored) {
        if (s.score(mode) > mu) {
          ++retained;
          accepted_correct += s.correct() ? 1 : 0;
        }
      }
      const double objective =
          (static_cast<double>(accepted_correct) / n) * (static_cast<double>(retained) / n);
      if (objective > best) {
        best = objective;
        report.best_source_threshold = mu;
      }
    }
  }
  report.h_at_best_source_threshold = h_score(scores, report.best_source_threshold).h;
  return report;
}

void write_curve_csv(const RocCurve& curve, std::ostream& out) {
  out << "threshold,ccr,fpr,acc_known,acc_unknown,h_score\n";
  char buf[256];
  for (const CurvePoint& p : curve.points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.threshold,
                  p.ccr, p.fpr, p.acc_known, p.acc_unknown, p.h_score);
    out << buf;
  }
}

}  // namespace medic
