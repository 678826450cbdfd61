#pragma once

#include <functional>
#include <string>

#include "avsync/nn/graph.hpp"

namespace avsync::nn {

// Evaluates the loss at the current parameter values. When `grads` is
// non-null it must also add the analytic gradient into it.
using LossFn = std::function<double(const ParamSet& params, Gradients* grads)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares the analytic gradient with central differences
// (f(x+h) - f(x-h)) / 2h on every coordinate; the error of a coordinate is
// |a - n| / max(1e-8, |a| + |n|). Parameters are restored afterwards.
GradCheckResult grad_check(const LossFn& loss, ParamSet& params, double h = 1e-5);

}  // namespace avsync::nn
