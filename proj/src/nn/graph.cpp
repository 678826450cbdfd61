#include "avsync/nn/graph.hpp"

#include "avsync/errors.hpp"

namespace avsync::nn {

std::string shape_string(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

std::size_t ParamSet::add(std::string name, Matrix value) {
  if (index_.contains(name)) throw Error("duplicate parameter name '" + name + "'");
  const std::size_t i = params_.size();
  index_.emplace(name, i);
  Matrix grad = Matrix::Zero(value.rows(), value.cols());
  params_.push_back({std::move(name), std::move(value), std::move(grad)});
  return i;
}

std::size_t ParamSet::index_of(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw Error("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

bool ParamSet::contains(std::string_view name) const { return index_.contains(std::string(name)); }

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamSet::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

void ParamSet::set_grads(const Gradients& grads) {
  if (grads.size() != params_.size()) throw DimensionError("gradient count differs from params");
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].grad = grads[i];
}

Gradients ParamSet::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  return g;
}

void accumulate(Gradients& into, const Gradients& from) {
  if (into.size() != from.size()) throw DimensionError("gradient buffers differ in length");
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

Var Graph::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Graph::leaf(Matrix value) {
  Var v = constant(std::move(value));
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Graph::param(const ParamSet& params, std::size_t index) {
  Node n;
  n.ref = &params[index].value;
  n.requires_grad = true;
  n.param = static_cast<std::int32_t>(index);
  nodes_.push_back(std::move(n));
  return {static_cast<std::int32_t>(nodes_.size() - 1)};
}

Var Graph::record(Matrix value, std::span<const Var> parents, Backward backward) {
  Node n;
  n.owned = std::move(value);
  for (Var p : parents) n.requires_grad = n.requires_grad || nodes_[p.id].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {static_cast<std::int32_t>(nodes_.size() - 1)};
}

const Matrix& Graph::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.ref ? *n.ref : n.owned;
}

Matrix Graph::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (n.grad.size() != 0) return n.grad;
  const Matrix& x = value(v);
  return Matrix::Zero(x.rows(), x.cols());
}

Matrix& Graph::grad_ref(Var v) {
  Node& n = nodes_[v.id];
  if (n.grad.size() == 0) {
    const Matrix& x = value(v);
    n.grad = Matrix::Zero(x.rows(), x.cols());
  }
  return n.grad;
}

void Graph::backward(Var root) {
  const Matrix& r = value(root);
  if (r.rows() != 1 || r.cols() != 1) {
    throw DimensionError("backward from a non-scalar root " + shape_string(r));
  }
  const std::pair<Var, Matrix> seed{root, Matrix::Ones(1, 1)};
  backward(std::span(&seed, 1));
}

void Graph::backward(std::span<const std::pair<Var, Matrix>> seeds) {
  std::int32_t last = -1;
  for (const auto& [v, g] : seeds) {
    const Matrix& x = value(v);
    if (g.rows() != x.rows() || g.cols() != x.cols()) {
      throw DimensionError("seed gradient " + shape_string(g) + " for node " + shape_string(x));
    }
    grad_ref(v) += g;
    last = std::max(last, v.id);
  }
  for (std::int32_t i = last; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, Var{i});
  }
}

void Graph::collect(Gradients& grads) const {
  for (const Node& n : nodes_) {
    if (n.param >= 0 && n.grad.size() != 0) grads[n.param] += n.grad;
  }
}

}  // namespace avsync::nn
