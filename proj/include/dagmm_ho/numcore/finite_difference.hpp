#pragma once

#include <cmath>
#include <concepts>
#include <string>

#include "dagmm_ho/numcore/error.hpp"
#include "dagmm_ho/numcore/matrix.hpp"

namespace dagmm_ho {

/// Central-difference gradient of a scalar function. Used as a test oracle.
template <typename F>
  requires std::invocable<F&, const Vector&>
Vector finite_difference_gradient(F&& f, const Vector& at, double step = 1e-5) {
  if (!(step > 0.0)) throw ParameterError("finite_difference_gradient: step must be positive");
  Vector p = at;
  Vector grad(at.size());
  for (std::size_t i = 0; i < at.size(); ++i) {
    p[i] = at[i] + step;
    const double up = f(p);
    p[i] = at[i] - step;
    const double down = f(p);
    p[i] = at[i];
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("finite_difference_gradient: non-finite value at component " + std::to_string(i));
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

}  // namespace dagmm_ho
