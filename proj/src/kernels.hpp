#pragma once

// Unchecked scoring and gradient kernels shared by the trainer, the cache
// builder and the public scorer. Callers validate instances first.

#include <span>

#include "fmfm/model.hpp"

namespace fmfm::detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double logit(const FmModel& model, Instance inst);

// grad += g * dPhi/dtheta for every parameter touched by the instance.
void accumulate_gradient(const FmModel& model, Instance inst, double g, FmModel& grad);

}  // namespace fmfm::detail
