#include "avsync/nn/layers.hpp"

#include <cmath>

#include "avsync/errors.hpp"
#include "avsync/nn/ops.hpp"

namespace avsync::nn {

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  return m;
}

LinearParams LinearParams::create(ParamSet& params, const std::string& name, std::size_t din,
                                  std::size_t dout, Rng& rng) {
  const auto in = static_cast<Eigen::Index>(din), out = static_cast<Eigen::Index>(dout);
  LinearParams p;
  p.weight = params.add(name + ".weight", uniform_init(in, out, din, rng));
  p.bias = params.add(name + ".bias", uniform_init(1, out, din, rng));
  return p;
}

Var LinearParams::apply(Graph& g, const ParamSet& params, Var x) const {
  return linear(g, x, g.param(params, weight), g.param(params, bias));
}

ConvParams ConvParams::create(ParamSet& params, const std::string& name, std::size_t din,
                              std::size_t dout, std::size_t kernel, std::size_t stride, Rng& rng) {
  const std::size_t fan_in = kernel * din;
  ConvParams p;
  p.weight = params.add(name + ".weight", uniform_init(static_cast<Eigen::Index>(fan_in),
                                                       static_cast<Eigen::Index>(dout), fan_in, rng));
  p.bias = params.add(name + ".bias", uniform_init(1, static_cast<Eigen::Index>(dout), fan_in, rng));
  p.kernel = kernel;
  p.stride = stride;
  return p;
}

Var ConvParams::apply(Graph& g, const ParamSet& params, Var x) const {
  return conv1d(g, x, g.param(params, weight), g.param(params, bias), kernel, stride);
}

Matrix sinusoidal_pe(std::size_t T, std::size_t d) {
  if (d == 0 || d % 2 != 0) throw DimensionError("positional encoding width must be even, got " + std::to_string(d));
  if (T == 0) throw DimensionError("positional encoding needs T >= 1");
  Matrix pe(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d / 2; ++i) {
    const double rate = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
    for (std::size_t t = 0; t < T; ++t) {
      const double angle = static_cast<double>(t) / rate;
      pe(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(2 * i)) = std::sin(angle);
      pe(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(2 * i + 1)) = std::cos(angle);
    }
  }
  return pe;
}

AttentionParams AttentionParams::create(ParamSet& params, const std::string& name, std::size_t d,
                                        Rng& rng) {
  const auto n = static_cast<Eigen::Index>(d);
  AttentionParams p;
  p.width = d;
  p.w_query = params.add(name + ".query.weight", uniform_init(n, n, d, rng));
  p.b_query = params.add(name + ".query.bias", uniform_init(1, n, d, rng));
  p.w_key = params.add(name + ".key.weight", uniform_init(n, n, d, rng));
  p.w_value = params.add(name + ".value.weight", uniform_init(n, n, d, rng));
  p.b_value = params.add(name + ".value.bias", uniform_init(1, n, d, rng));
  return p;
}

Var attention(Graph& g, const ParamSet& params, const AttentionParams& p, Var x, Var y, bool pe_on) {
  const Matrix& X = g.value(x);
  const Matrix& Y = g.value(y);
  const auto d = static_cast<Eigen::Index>(p.width);
  if (X.rows() != Y.rows() || X.cols() != d || Y.cols() != d) {
    throw DimensionError("attention: X " + shape_string(X) + " vs Y " + shape_string(Y) +
                         " at width " + std::to_string(d));
  }
  if (pe_on) {
    const Var pe = g.constant(sinusoidal_pe(static_cast<std::size_t>(X.rows()), p.width));
    x = add(g, x, pe);
    y = add(g, y, pe);
  }
  const Var query = linear(g, y, g.param(params, p.w_query), g.param(params, p.b_query));
  const Var key = matmul(g, x, g.param(params, p.w_key));
  const Var value = linear(g, x, g.param(params, p.w_value), g.param(params, p.b_value));
  const Var scores = scale(g, matmul_nt(g, query, key), 1.0 / std::sqrt(static_cast<double>(d)));
  return matmul(g, softmax_rows(g, scores), value);
}

}  // namespace avsync::nn
