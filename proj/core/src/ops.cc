#include "medic/ops.h"

#include <algorithm>
#include <cmath>

#include "medic/errors.h"

namespace medic {

Matrix affine(const Matrix& input, const Matrix& weight, const Matrix& bias) {
  const std::size_t batch = input.rows();
  const std::size_t d_in = input.cols();
  const std::size_t d_out = weight.rows();
  require_shape(weight, d_out, d_in, "affine weight");
  require_shape(bias, d_out, 1, "affine bias");

  Matrix out(batch, d_out);
  for (std::size_t b = 0; b < batch; ++b) {
    auto x = input.row(b);
    auto y = out.row(b);
    for (std::size_t j = 0; j < d_out; ++j) {
      auto w = weight.row(j);
      double acc = bias(j, 0);
      for (std::size_t k = 0; k < d_in; ++k) acc += x[k] * w[k];
      y[j] = acc;
    }
  }
  return out;
}

Matrix relu(const Matrix& input) {
  Matrix out = input;
  for (double& v : out.data()) v = std::max(v, 0.0);
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  if (logits.cols() == 0) throw DimensionError("softmax_rows: zero columns");
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    auto z = logits.row(b);
    auto p = out.row(b);
    const double m = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      p[k] = std::exp(z[k] - m);
      total += p[k];
    }
    for (double& v : p) v /= total;
  }
  return out;
}

AffineGrad affine_backward(const Matrix& input, const Matrix& weight,
                           const Matrix& d_out) {
  const std::size_t batch = input.rows();
  const std::size_t d_in = input.cols();
  const std::size_t d_outs = weight.rows();
  require_shape(d_out, batch, d_outs, "affine_backward upstream");

  AffineGrad g{Matrix(batch, d_in), Matrix(d_outs, d_in), Matrix(d_outs, 1)};
  for (std::size_t b = 0; b < batch; ++b) {
    auto x = input.row(b);
    auto dy = d_out.row(b);
    auto dx = g.d_input.row(b);
    for (std::size_t j = 0; j < d_outs; ++j) {
      const double upstream = dy[j];
      if (upstream == 0.0) continue;
      auto w = weight.row(j);
      auto dw = g.d_weight.row(j);
      for (std::size_t k = 0; k < d_in; ++k) {
        dx[k] += upstream * w[k];
        dw[k] += upstream * x[k];
      }
      g.d_bias(j, 0) += upstream;
    }
  }
  return g;
}

Matrix relu_backward(const Matrix& pre_activation, const Matrix& d_out) {
  require_shape(d_out, pre_activation.rows(), pre_activation.cols(),
                "relu_backward upstream");
  Matrix out = d_out;
  auto pre = pre_activation.data();
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(pre[i] > 0.0)) d[i] = 0.0;
  }
  return out;
}

double neg_log_clamped(double p) {
  return -std::log(std::clamp(p, kProbFloor, 1.0 - kProbFloor));
}

double neg_log_clamped_derivative(double p) {
  if (p < kProbFloor || p > 1.0 - kProbFloor) return 0.0;
  return -1.0 / p;
}

GradVector finite_difference_grad(const ScalarProgram& loss,
                                  const ParamVector& params, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("finite_difference_grad: epsilon must be > 0");
  GradVector grad = GradVector::zeros_like(params);
  ParamVector probe = params;
  for (std::size_t i = 0; i < params.scalar_count(); ++i) {
    const double original = params.scalar(i);
    probe.scalar(i) = original + epsilon;
    const double up = loss(probe);
    probe.scalar(i) = original - epsilon;
    const double down = loss(probe);
    probe.scalar(i) = original;
    grad.scalar(i) = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

}  // namespace medic
