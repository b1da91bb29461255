#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "rdmd/tensor.hpp"

namespace rdmd {

class Graph;

// Handle to a node of a Graph. Cheap to copy; invalid after Graph::clear().
class Var {
 public:
  Var() = default;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

// Gradient accumulation buffers handed to each node's backward function.
class BackwardContext {
 public:
  const Tensor& value(std::size_t id) const;
  bool wants(std::size_t id) const;
  // Zero-initialized on first access.
  Tensor& grad(std::size_t id);

 private:
  friend class Graph;
  explicit BackwardContext(Graph& g) : graph_(g) {}
  Graph& graph_;
  std::vector<Tensor> grads_;
  std::vector<bool> touched_;
};

using BackwardFn = std::function<void(const Tensor& grad_out, BackwardContext& ctx)>;

// Gradients of a scalar root with respect to every gradient-flagged leaf.
class Gradients {
 public:
  const Tensor& operator[](Var leaf) const { return at(leaf.id()); }
  const Tensor& at(std::size_t leaf_id) const;
  bool contains(std::size_t leaf_id) const { return by_leaf_.contains(leaf_id); }
  std::size_t size() const { return by_leaf_.size(); }

 private:
  friend class Graph;
  std::unordered_map<std::size_t, Tensor> by_leaf_;
};

// Define-by-run tape. Nodes are appended in evaluation order, so the vector
// order is a topological order and backward is a single reverse sweep.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var param(const Tensor& value) { return leaf(value, true); }

  // Appends an op node. `backward` may be empty when no input needs a gradient.
  Var push(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  bool owns(Var v) const { return v.graph_ == this && v.id_ < nodes_.size(); }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar root. Clears the graph afterwards.
  Gradients backward(Var root);
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
  };
  std::vector<Node> nodes_;
};

// --- op set -----------------------------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);               // elementwise
Var scale(Var a, double s);
Var matmul(Var a, Var b);            // (n,k) x (k,m)
Var concat(Var a, Var b);            // along the last axis
Var leaky_relu(Var a, double slope = 0.01);
Var sum(Var a);
Var mean(Var a);
Var sum_of_squares(Var a);
Var add_bias(Var x, Var bias);       // (n,m) + (m) broadcast over rows

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double s, Var a) { return scale(a, s); }

// Value-only helpers shared by the ops and by inference paths.
Tensor matmul_values(const Tensor& a, const Tensor& b);

}  // namespace rdmd
