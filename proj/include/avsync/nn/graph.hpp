#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace avsync::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_string(const Matrix& m);

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
};

// Gradient buffers aligned with a ParamSet, one matrix per parameter.
using Gradients = std::vector<Matrix>;

class ParamSet {
 public:
  std::size_t add(std::string name, Matrix value);

  std::size_t size() const { return params_.size(); }
  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  std::size_t index_of(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::size_t scalar_count() const;
  void zero_grad();
  void set_grads(const Gradients& grads);
  Gradients zero_gradients() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

void accumulate(Gradients& into, const Gradients& from);

// Handle to a node in a Graph.
struct Var {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
// insertion order is a valid backward order. Parameter leaves reference the
// ParamSet's storage; the ParamSet must outlive the graph and stay unmodified
// while it is alive.
class Graph {
 public:
  using Backward = std::function<void(Graph&, Var self)>;

  Var constant(Matrix value);
  Var leaf(Matrix value);  // differentiable input that is not a parameter
  Var param(const ParamSet& params, std::size_t index);

  // Appends an op result. `backward` reads grad(self) and accumulates into the
  // parents through grad_ref(). Skipped when no parent requires a gradient.
  Var record(Matrix value, std::span<const Var> parents, Backward backward);
  Var record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                  std::move(backward));
  }

  const Matrix& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool has_grad(Var v) const { return nodes_[v.id].grad.size() != 0; }
  // Zero matrix when nothing reached v.
  Matrix grad(Var v) const;
  // Accumulator for v's gradient, allocated on first use.
  Matrix& grad_ref(Var v);

  // Seeds d(root)/d(root) = 1 for a 1x1 root.
  void backward(Var root);
  void backward(std::span<const std::pair<Var, Matrix>> seeds);

  // Adds the gradients that reached parameter leaves into `grads`.
  void collect(Gradients& grads) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* ref = nullptr;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
    std::int32_t param = -1;
  };
  std::vector<Node> nodes_;
};

}  // namespace avsync::nn
