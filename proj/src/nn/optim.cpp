#include "avsync/nn/optim.hpp"

#include <cmath>

#include "avsync/errors.hpp"

namespace avsync::nn {

AdamState AdamState::for_params(const ParamSet& params) {
  return {params.zero_gradients(), params.zero_gradients(), 0};
}

void adam_step(ParamSet& params, const Gradients& grads, AdamState& state,
               const AdamOptions& o) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw DimensionError("adam_step: parameter, gradient and state counts differ");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& w = params[i].value;
    const Matrix& g = grads[i];
    if (g.rows() != w.rows() || g.cols() != w.cols()) {
      throw DimensionError("adam_step: gradient " + shape_string(g) + " for parameter '" +
                           params[i].name + "' " + shape_string(w));
    }
    state.m[i] = o.beta1 * state.m[i] + (1.0 - o.beta1) * g;
    state.v[i] = o.beta2 * state.v[i] + (1.0 - o.beta2) * g.cwiseAbs2();
    w.array() -= o.lr * (state.m[i].array() / c1) / ((state.v[i].array() / c2).sqrt() + o.eps);
  }
}

}  // namespace avsync::nn
