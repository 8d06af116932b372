#ifndef MEDIC_OPS_H_
#define MEDIC_OPS_H_

#include <functional>

#include "medic/matrix.h"
#include "medic/param_vector.h"

namespace medic {

// Probabilities are clamped into [kProbFloor, 1 - kProbFloor] before any log.
inline constexpr double kProbFloor = 1e-12;

// out[b][j] = sum_k input[b][k] * weight[j][k] + bias[j].
// weight is d_out x d_in, bias is d_out x 1.
Matrix affine(const Matrix& input, const Matrix& weight, const Matrix& bias);

Matrix relu(const Matrix& input);

// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

// Gradients of an affine layer given the upstream gradient d_out (B x d_out).
struct AffineGrad {
  Matrix d_input;
  Matrix d_weight;
  Matrix d_bias;
};
AffineGrad affine_backward(const Matrix& input, const Matrix& weight,
                           const Matrix& d_out);

// Upstream gradient masked by the forward pre-activation; the subgradient at 0
// is taken as 0.
Matrix relu_backward(const Matrix& pre_activation, const Matrix& d_out);

// -log(clamp(p)) and its derivative w.r.t. p (zero where clamping is active).
double neg_log_clamped(double p);
double neg_log_clamped_derivative(double p);

using ScalarProgram = std::function<double(const ParamVector&)>;

// Central differences (L(theta + eps e_i) - L(theta - eps e_i)) / (2 eps) for
// every scalar parameter.
GradVector finite_difference_grad(const ScalarProgram& loss,
                                  const ParamVector& params,
                                  double epsilon = 1e-5);

}  // namespace medic

#endif  // MEDIC_OPS_H_
