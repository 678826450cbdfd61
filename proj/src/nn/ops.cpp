#include "avsync/nn/ops.hpp"

#include <cmath>

#include "avsync/errors.hpp"

namespace avsync::nn {
namespace {

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
  throw DimensionError(std::string(op) + ": " + shape_string(a) + " vs " + shape_string(b));
}

}  // namespace

double sigmoid_value(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double stable_bce(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

Var matmul(Graph& g, Var a, Var b) {
  const Matrix& A = g.value(a);
  const Matrix& B = g.value(b);
  if (A.cols() != B.rows()) shape_fail("matmul", A, B);
  return g.record(A * B, {a, b}, [a, b](Graph& g, Var self) {
    const Matrix& G = g.grad_ref(self);
    if (g.requires_grad(a)) g.grad_ref(a).noalias() += G * g.value(b).transpose();
    if (g.requires_grad(b)) g.grad_ref(b).noalias() += g.value(a).transpose() * G;
  });
}

Var matmul_nt(Graph& g, Var a, Var b) {
  const Matrix& A = g.value(a);
  const Matrix& B = g.value(b);
  if (A.cols() != B.cols()) shape_fail("matmul_nt", A, B);
  return g.record(A * B.transpose(), {a, b}, [a, b](Graph& g, Var self) {
    const Matrix& G = g.grad_ref(self);
    if (g.requires_grad(a)) g.grad_ref(a).noalias() += G * g.value(b);
    if (g.requires_grad(b)) g.grad_ref(b).noalias() += G.transpose() * g.value(a);
  });
}

Var add(Graph& g, Var a, Var b) {
  const Matrix& A = g.value(a);
  const Matrix& B = g.value(b);
  if (A.rows() != B.rows() || A.cols() != B.cols()) shape_fail("add", A, B);
  return g.record(A + B, {a, b}, [a, b](Graph& g, Var self) {
    const Matrix& G = g.grad_ref(self);
    if (g.requires_grad(a)) g.grad_ref(a) += G;
    if (g.requires_grad(b)) g.grad_ref(b) += G;
  });
}

Var add_row(Graph& g, Var x, Var row) {
  const Matrix& X = g.value(x);
  const Matrix& R = g.value(row);
  if (R.rows() != 1 || R.cols() != X.cols()) shape_fail("add_row", X, R);
  Matrix out = X;
  out.rowwise() += R.row(0);
  return g.record(std::move(out), {x, row}, [x, row](Graph& g, Var self) {
    const Matrix& G = g.grad_ref(self);
    if (g.requires_grad(x)) g.grad_ref(x) += G;
    if (g.requires_grad(row)) g.grad_ref(row) += G.colwise().sum();
  });
}

Var scale(Graph& g, Var x, double factor) {
  return g.record(g.value(x) * factor, {x}, [x, factor](Graph& g, Var self) {
    g.grad_ref(x) += factor * g.grad_ref(self);
  });
}

Var relu(Graph& g, Var x) {
  return g.record(g.value(x).cwiseMax(0.0), {x}, [x](Graph& g, Var self) {
    const Matrix& G = g.grad_ref(self);
    g.grad_ref(x) += (g.value(x).array() > 0.0).select(G, 0.0);
  });
}

Var sigmoid(Graph& g, Var x) {
  return g.record(g.value(x).unaryExpr(&sigmoid_value), {x}, [x](Graph& g, Var self) {
    const Matrix& y = g.value(self);
    g.grad_ref(x).array() += g.grad_ref(self).array() * y.array() * (1.0 - y.array());
  });
}

Var softmax_rows(Graph& g, Var x) {
  const Matrix& X = g.value(x);
  Matrix y(X.rows(), X.cols());
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    const double m = X.row(r).maxCoeff();
    y.row(r) = (X.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return g.record(std::move(y), {x}, [x](Graph& g, Var self) {
    const Matrix& Y = g.value(self);
    const Matrix& G = g.grad_ref(self);
    const Eigen::VectorXd dots = (G.array() * Y.array()).rowwise().sum();
    g.grad_ref(x).array() += Y.array() * (G.colwise() - dots).array();
  });
}

Var concat_cols(Graph& g, Var a, Var b) {
  const Matrix& A = g.value(a);
  const Matrix& B = g.value(b);
  if (A.rows() != B.rows()) shape_fail("concat_cols", A, B);
  Matrix out(A.rows(), A.cols() + B.cols());
  out << A, B;
  const auto ca = A.cols();
  return g.record(std::move(out), {a, b}, [a, b, ca](Graph& g, Var self) {
    const Matrix& G = g.grad_ref(self);
    if (g.requires_grad(a)) g.grad_ref(a) += G.leftCols(ca);
    if (g.requires_grad(b)) g.grad_ref(b) += G.rightCols(G.cols() - ca);
  });
}

Var slice_rows(Graph& g, Var x, std::size_t begin, std::size_t count) {
  const Matrix& X = g.value(x);
  if (begin + count > static_cast<std::size_t>(X.rows())) {
    throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") of " + shape_string(X));
  }
  const auto b = static_cast<Eigen::Index>(begin), n = static_cast<Eigen::Index>(count);
  return g.record(X.middleRows(b, n), {x}, [x, b, n](Graph& g, Var self) {
    g.grad_ref(x).middleRows(b, n) += g.grad_ref(self);
  });
}

Var mean_rows(Graph& g, Var x) {
  const Matrix& X = g.value(x);
  const auto n = static_cast<double>(X.rows());
  return g.record(X.colwise().mean(), {x}, [x, n](Graph& g, Var self) {
    g.grad_ref(x).rowwise() += g.grad_ref(self).row(0) / n;
  });
}

Var gather_rows(Graph& g, Var x, std::span<const std::size_t> rows) {
  const Matrix& X = g.value(x);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= static_cast<std::size_t>(X.rows())) {
      throw DimensionError("gather_rows: row " + std::to_string(idx[i]) + " of " + shape_string(X));
    }
    out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
  }
  return g.record(std::move(out), {x}, [x, idx = std::move(idx)](Graph& g, Var self) {
    const Matrix& G = g.grad_ref(self);
    Matrix& dx = g.grad_ref(x);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      dx.row(static_cast<Eigen::Index>(idx[i])) += G.row(static_cast<Eigen::Index>(i));
    }
  });
}

Var stack_rows(Graph& g, std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("stack_rows: nothing to stack");
  const Eigen::Index cols = g.value(parts[0]).cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    if (g.value(p).cols() != cols) shape_fail("stack_rows", g.value(parts[0]), g.value(p));
    rows += g.value(p).rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, g.value(p).rows()) = g.value(p);
    at += g.value(p).rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record(std::move(out), std::span<const Var>(inputs), [inputs](Graph& g, Var self) {
    const Matrix& G = g.grad_ref(self);
    Eigen::Index at = 0;
    for (Var p : inputs) {
      const Eigen::Index n = g.value(p).rows();
      if (g.requires_grad(p)) g.grad_ref(p) += G.middleRows(at, n);
      at += n;
    }
  });
}

Var linear(Graph& g, Var x, Var w, Var b) { return add_row(g, matmul(g, x, w), b); }

namespace {

// Rows of the strided, padded input laid out as [out_rows x kernel*din].
Matrix im2col(const Matrix& x, std::size_t kernel, std::size_t stride, std::size_t out_rows) {
  const auto L = static_cast<std::int64_t>(x.rows());
  const auto din = x.cols();
  const auto pad = static_cast<std::int64_t>((kernel - 1) / 2);
  Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(out_rows),
                             static_cast<Eigen::Index>(kernel) * din);
  for (std::size_t o = 0; o < out_rows; ++o) {
    for (std::size_t j = 0; j < kernel; ++j) {
      const std::int64_t r = static_cast<std::int64_t>(o * stride) - pad + static_cast<std::int64_t>(j);
      if (r < 0 || r >= L) continue;
      cols.block(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(j) * din, 1, din) = x.row(r);
    }
  }
  return cols;
}

}  // namespace

Var conv1d(Graph& g, Var x, Var w, Var b, std::size_t kernel, std::size_t stride) {
  const Matrix& X = g.value(x);
  const Matrix& W = g.value(w);
  const Matrix& B = g.value(b);
  if (kernel < 1 || stride < 1) throw DimensionError("conv1d: kernel and stride must be >= 1");
  if (W.rows() != static_cast<Eigen::Index>(kernel) * X.cols()) shape_fail("conv1d weight", X, W);
  if (B.rows() != 1 || B.cols() != W.cols()) shape_fail("conv1d bias", W, B);
  const std::size_t out_rows = (static_cast<std::size_t>(X.rows()) + stride - 1) / stride;
  Matrix out = im2col(X, kernel, stride, out_rows) * W;
  out.rowwise() += B.row(0);
  return g.record(std::move(out), {x, w, b}, [x, w, b, kernel, stride, out_rows](Graph& g, Var self) {
    const Matrix& G = g.grad_ref(self);
    const Matrix& X = g.value(x);
    if (g.requires_grad(w)) g.grad_ref(w).noalias() += im2col(X, kernel, stride, out_rows).transpose() * G;
    if (g.requires_grad(b)) g.grad_ref(b) += G.colwise().sum();
    if (g.requires_grad(x)) {
      const Matrix dcols = G * g.value(w).transpose();
      Matrix& dx = g.grad_ref(x);
      const auto L = static_cast<std::int64_t>(X.rows());
      const auto din = X.cols();
      const auto pad = static_cast<std::int64_t>((kernel - 1) / 2);
      for (std::size_t o = 0; o < out_rows; ++o) {
        for (std::size_t j = 0; j < kernel; ++j) {
          const std::int64_t r = static_cast<std::int64_t>(o * stride) - pad + static_cast<std::int64_t>(j);
          if (r < 0 || r >= L) continue;
          dx.row(r) += dcols.block(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(j) * din, 1, din);
        }
      }
    }
  });
}

Var bce_with_logits(Graph& g, Var logits, std::span<const double> targets) {
  const Matrix& Z = g.value(logits);
  if (Z.cols() != 1 || static_cast<std::size_t>(Z.rows()) != targets.size()) {
    throw DimensionError("bce_with_logits: logits " + shape_string(Z) + " vs " +
                         std::to_string(targets.size()) + " targets");
  }
  const auto T = static_cast<double>(targets.size());
  double loss = 0.0;
  for (Eigen::Index t = 0; t < Z.rows(); ++t) {
    if (!std::isfinite(Z(t, 0))) throw NumericError("bce_with_logits: non-finite logit");
    loss += stable_bce(Z(t, 0), targets[t]);
  }
  Matrix out(1, 1);
  out(0, 0) = loss / T;
  std::vector<double> y(targets.begin(), targets.end());
  return g.record(std::move(out), {logits}, [logits, y = std::move(y), T](Graph& g, Var self) {
    const double s = g.grad_ref(self)(0, 0) / T;
    const Matrix& Z = g.value(logits);
    Matrix& dz = g.grad_ref(logits);
    for (Eigen::Index t = 0; t < Z.rows(); ++t) dz(t, 0) += s * (sigmoid_value(Z(t, 0)) - y[t]);
  });
}

Var bce_product(Graph& g, Var logits, std::span<const double> targets) {
  const Matrix& Z = g.value(logits);
  if (Z.cols() != 2 || static_cast<std::size_t>(Z.rows()) != targets.size()) {
    throw DimensionError("bce_product: logits " + shape_string(Z) + " vs " +
                         std::to_string(targets.size()) + " targets");
  }
  const auto T = static_cast<double>(targets.size());
  double loss = 0.0;
  for (Eigen::Index t = 0; t < Z.rows(); ++t) {
    const double za = Z(t, 0), zv = Z(t, 1), y = targets[t];
    if (!std::isfinite(za) || !std::isfinite(zv)) throw NumericError("bce_product: non-finite logit");
    // log p = log pa + log pv; 1 - pa*pv = qa + pa*qv with q = 1 - p.
    const double log_p = -(stable_bce(za, 1.0) + stable_bce(zv, 1.0));
    const double one_minus = sigmoid_value(-za) + sigmoid_value(za) * sigmoid_value(-zv);
    loss += -y * log_p - (1.0 - y) * std::log(one_minus);
  }
  Matrix out(1, 1);
  out(0, 0) = loss / T;
  std::vector<double> y(targets.begin(), targets.end());
  return g.record(std::move(out), {logits}, [logits, y = std::move(y), T](Graph& g, Var self) {
    const double s = g.grad_ref(self)(0, 0) / T;
    const Matrix& Z = g.value(logits);
    Matrix& dz = g.grad_ref(logits);
    for (Eigen::Index t = 0; t < Z.rows(); ++t) {
      const double pa = sigmoid_value(Z(t, 0)), qa = sigmoid_value(-Z(t, 0));
      const double pv = sigmoid_value(Z(t, 1)), qv = sigmoid_value(-Z(t, 1));
      const double one_minus = qa + pa * qv;
      const double neg = (1.0 - y[t]) * pa * pv / one_minus;
      dz(t, 0) += s * (-y[t] * qa + neg * qa);
      dz(t, 1) += s * (-y[t] * qv + neg * qv);
    }
  });
}

}  // namespace avsync::nn
