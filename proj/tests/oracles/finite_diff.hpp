#pragma once

// Central-difference gradient check over every parameter of a network.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "colorser/neural.hpp"

namespace oracle {

struct GradientCheck {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t checked = 0;
  /// Entries large enough to be judged by relative error.
  std::size_t relative_checked = 0;
  std::size_t failures = 0;
  std::string worst;
};

/// Relative error |a - n| / max(|a|, |n|) per entry; entries where both are
/// below abs_floor are judged by absolute error instead.
inline GradientCheck check_gradients(colorser::neural::MlpParams params, const colorser::neural::MlpParams& analytic,
                                     const std::function<double(const colorser::neural::MlpParams&)>& loss,
                                     double h = 1e-5, double rel_tol = 1e-4, double abs_floor = 1e-7) {
  GradientCheck out;
  auto tensors = params.tensors();
  const auto grads = analytic.tensors();
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (std::size_t i = 0; i < tensors[t].size(); ++i) {
      double& p = tensors[t][i];
      const double saved = p;
      p = saved + h;
      const double up = loss(params);
      p = saved - h;
      const double down = loss(params);
      p = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = grads[t][i];
      const double abs_err = std::abs(a - numeric);
      const double scale = std::max(std::abs(a), std::abs(numeric));
      ++out.checked;
      out.max_absolute_error = std::max(out.max_absolute_error, abs_err);
      if (scale < abs_floor) {
        // Both sides essentially zero: relative error is meaningless here.
        if (abs_err >= abs_floor) ++out.failures;
        continue;
      }
      ++out.relative_checked;
      const double rel = abs_err / scale;
      if (rel > out.max_relative_error) {
        out.max_relative_error = rel;
        out.worst = "tensor " + std::to_string(t) + " entry " + std::to_string(i);
      }
      if (rel >= rel_tol) ++out.failures;
    }
  }
  return out;
}

}  // namespace oracle
