#pragma once

#include <span>

#include "avsync/nn/graph.hpp"

namespace avsync::nn {

// Differentiable ops. Shape violations throw DimensionError naming both
// operands.

Var matmul(Graph& g, Var a, Var b);     // [m x k] * [k x n]
Var matmul_nt(Graph& g, Var a, Var b);  // [m x k] * [n x k]^T
Var add(Graph& g, Var a, Var b);
Var add_row(Graph& g, Var x, Var row);  // broadcast a [1 x n] row over x
Var scale(Graph& g, Var x, double factor);
Var relu(Graph& g, Var x);
Var sigmoid(Graph& g, Var x);
Var softmax_rows(Graph& g, Var x);
Var concat_cols(Graph& g, Var a, Var b);
Var slice_rows(Graph& g, Var x, std::size_t begin, std::size_t count);
Var mean_rows(Graph& g, Var x);  // [m x n] -> [1 x n]
Var gather_rows(Graph& g, Var x, std::span<const std::size_t> rows);
Var stack_rows(Graph& g, std::span<const Var> rows);  // vertical concatenation

// x * W + b with W [din x dout], b [1 x dout].
Var linear(Graph& g, Var x, Var w, Var b);

// 1-D convolution over rows of x [L x din]. W is [kernel*din x dout] with
// row index j*din + c for tap j and channel c; b is [1 x dout]. Input is
// zero-padded by (kernel-1)/2 rows on the left; output has ceil(L/stride)
// rows, row o reading input rows o*stride - pad + j. With stride 1 this is
// "same" padding.
Var conv1d(Graph& g, Var x, Var w, Var b, std::size_t kernel, std::size_t stride);

// Mean over frames of the numerically stable binary cross-entropy on logits
// z [T x 1]: max(z,0) - z*y + log(1 + exp(-|z|)). Returns [1 x 1].
Var bce_with_logits(Graph& g, Var logits, std::span<const double> targets);

// Cross-entropy on the product probability sigmoid(z_a) * sigmoid(z_v) for
// logits [T x 2] (column 0 audio, column 1 visual); mean over frames.
Var bce_product(Graph& g, Var logits, std::span<const double> targets);

// Value-level helpers shared with tests and metrics.
double stable_bce(double z, double y);
double sigmoid_value(double z);

}  // namespace avsync::nn
