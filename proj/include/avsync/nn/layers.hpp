#pragma once

#include <string>

#include "avsync/nn/graph.hpp"
#include "avsync/rng.hpp"

namespace avsync::nn {

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, std::size_t fan_in, Rng& rng);

// Indices of a weight/bias pair registered in a ParamSet.
struct LinearParams {
  std::size_t weight = 0;
  std::size_t bias = 0;

  static LinearParams create(ParamSet& params, const std::string& name, std::size_t din,
                             std::size_t dout, Rng& rng);
  Var apply(Graph& g, const ParamSet& params, Var x) const;
};

// Convolution weights stored as [kernel*din x dout].
struct ConvParams {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;

  static ConvParams create(ParamSet& params, const std::string& name, std::size_t din,
                           std::size_t dout, std::size_t kernel, std::size_t stride, Rng& rng);
  Var apply(Graph& g, const ParamSet& params, Var x) const;
};

// Sinusoidal positional encoding [T x d]:
//   PE[t][2i] = sin(t / 10000^(2i/d)),  PE[t][2i+1] = cos(t / 10000^(2i/d)).
// Throws DimensionError for odd d or T == 0.
Matrix sinusoidal_pe(std::size_t T, std::size_t d);

// Single-head attention with learned Query/Key/Value projections of width d.
// The key projection carries no bias: softmax is invariant to it.
struct AttentionParams {
  std::size_t w_query = 0, b_query = 0;
  std::size_t w_key = 0;
  std::size_t w_value = 0, b_value = 0;
  std::size_t width = 0;

  static AttentionParams create(ParamSet& params, const std::string& name, std::size_t d,
                                Rng& rng);
};

// softmax(Query(Y') Key(X')^T / sqrt(d)) Value(X') with X' = X + PE and
// Y' = Y + PE when pe_on, else X' = X and Y' = Y. Queries come from Y; keys
// and values from X. X and Y must both be [T x d].
Var attention(Graph& g, const ParamSet& params, const AttentionParams& p, Var x, Var y, bool pe_on);

}  // namespace avsync::nn
