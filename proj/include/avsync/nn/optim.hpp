#pragma once

#include <cstdint>

#include "avsync/nn/graph.hpp"

namespace avsync::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Gradients m;
  Gradients v;
  std::int64_t step = 0;

  static AdamState for_params(const ParamSet& params);
};

// One bias-corrected Adam update of every parameter from `grads`.
void adam_step(ParamSet& params, const Gradients& grads, AdamState& state,
               const AdamOptions& options = {});

}  // namespace avsync::nn
