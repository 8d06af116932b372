#include "medic/param_vector.h"

#include <cmath>

namespace medic {

ParamVector param_axpy(double alpha, const GradVector& g, const ParamVector& theta) {
  ParamVector out = theta;
  out.add_scaled(alpha, g);
  return out;
}

double grad_dot(const GradVector& a, const GradVector& b) {
  a.require_same_layout(b, "grad_dot");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.segments().size(); ++i) {
    auto x = a.segments()[i].values.data();
    auto y = b.segments()[i].values.data();
    for (std::size_t k = 0; k < x.size(); ++k) sum += x[k] * y[k];
  }
  return sum;
}

double grad_norm(const GradVector& g) { return std::sqrt(grad_dot(g, g)); }

}  // namespace medic
