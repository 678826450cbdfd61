#include "avsync/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace avsync::nn {

GradCheckResult grad_check(const LossFn& loss, ParamSet& params, double h) {
  Gradients analytic = params.zero_gradients();
  loss(params, &analytic);

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Matrix& w = params[p].value;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double saved = w.data()[i];
      w.data()[i] = saved + h;
      const double up = loss(params, nullptr);
      w.data()[i] = saved - h;
      const double down = loss(params, nullptr);
      w.data()[i] = saved;

      const double a = analytic[p].data()[i];
      const double n = (up - down) / (2.0 * h);
      const double err = std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n));
      ++result.coordinates;
      if (err > result.max_relative_error || result.coordinates == 1) {
        result.max_relative_error = err;
        result.worst_param = params[p].name;
        result.worst_index = static_cast<std::size_t>(i);
        result.analytic = a;
        result.numeric = n;
      }
    }
  }
  return result;
}

}  // namespace avsync::nn
