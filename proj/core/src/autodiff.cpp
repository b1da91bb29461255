#include "rdmd/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

namespace rdmd {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MatMap as_matrix(Tensor& t) {
  return MatMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void require_same_graph(const char* op, Var a, Var b) {
  if (&a.graph() != &b.graph()) throw std::invalid_argument(std::string(op) + ": operands from different graphs");
}

void require_same_shape(const char* op, Var a, Var b) {
  require_same_graph(op, a, b);
  if (a.shape() != b.shape()) throw ShapeError(op, a.shape(), b.shape());
}

}  // namespace

const Tensor& Var::value() const { return graph_->value(id_); }
bool Var::requires_grad() const { return graph_->requires_grad(id_); }

const Tensor& BackwardContext::value(std::size_t id) const { return graph_.value(id); }
bool BackwardContext::wants(std::size_t id) const { return graph_.requires_grad(id); }

Tensor& BackwardContext::grad(std::size_t id) {
  if (!touched_[id]) {
    grads_[id] = Tensor(graph_.value(id).shape());
    touched_[id] = true;
  }
  return grads_[id];
}

const Tensor& Gradients::at(std::size_t leaf_id) const {
  auto it = by_leaf_.find(leaf_id);
  if (it == by_leaf_.end()) throw std::out_of_range("Gradients: node " + std::to_string(leaf_id) + " is not a gradient leaf");
  return it->second;
}

Var Graph::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw std::invalid_argument("Graph::leaf: non-finite value");
  nodes_.push_back(Node{std::move(value), {}, {}, requires_grad, true});
  return Var(this, nodes_.size() - 1);
}

Var Graph::push(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  for (auto id : inputs) needs = needs || nodes_.at(id).requires_grad;
  nodes_.push_back(Node{std::move(value), std::move(inputs), needs ? std::move(backward) : BackwardFn{}, needs, false});
  return Var(this, nodes_.size() - 1);
}

Gradients Graph::backward(Var root) {
  if (!owns(root)) throw std::invalid_argument("backward: root is not a node of this graph");
  const Tensor& root_value = nodes_[root.id_].value;
  if (root_value.numel() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got shape " + shape_to_string(root_value.shape()));
  }

  BackwardContext ctx(*this);
  ctx.grads_.resize(root.id_ + 1);
  ctx.touched_.assign(root.id_ + 1, false);
  Gradients out;
  if (nodes_[root.id_].requires_grad) {
    ctx.grad(root.id_).fill(1.0);
    for (std::size_t i = root.id_ + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.requires_grad || !ctx.touched_[i]) continue;
      if (node.is_leaf) continue;
      node.backward(ctx.grads_[i], ctx);
    }
  }
  for (std::size_t i = 0; i <= root.id_; ++i) {
    const Node& node = nodes_[i];
    if (node.is_leaf && node.requires_grad) {
      out.by_leaf_.emplace(i, ctx.touched_[i] ? std::move(ctx.grads_[i]) : Tensor(node.value.shape()));
    }
  }
  clear();
  return out;
}

// --- op set -----------------------------------------------------------------

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) throw ShapeError("matmul", a.shape(), b.shape());
  Tensor out({a.rows(), b.cols()});
  as_matrix(out).noalias() = as_matrix(a) * as_matrix(b);
  return out;
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.graph().push(std::move(out), {ia, ib}, [ia, ib](const Tensor& g, BackwardContext& ctx) {
    for (auto id : {ia, ib}) {
      if (!ctx.wants(id)) continue;
      Tensor& dst = ctx.grad(id);
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape("subtract", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.graph().push(std::move(out), {ia, ib}, [ia, ib](const Tensor& g, BackwardContext& ctx) {
    if (ctx.wants(ia)) {
      Tensor& dst = ctx.grad(ia);
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
    }
    if (ctx.wants(ib)) {
      Tensor& dst = ctx.grad(ib);
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("multiply", a, b);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.graph().push(std::move(out), {ia, ib}, [ia, ib](const Tensor& g, BackwardContext& ctx) {
    const Tensor& av = ctx.value(ia);
    const Tensor& bv = ctx.value(ib);
    if (ctx.wants(ia)) {
      Tensor& dst = ctx.grad(ia);
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i] * bv[i];
    }
    if (ctx.wants(ib)) {
      Tensor& dst = ctx.grad(ib);
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  const auto ia = a.id();
  return a.graph().push(std::move(out), {ia}, [ia, s](const Tensor& g, BackwardContext& ctx) {
    Tensor& dst = ctx.grad(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += s * g[i];
  });
}

Var matmul(Var a, Var b) {
  require_same_graph("matmul", a, b);
  Tensor out = matmul_values(a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return a.graph().push(std::move(out), {ia, ib}, [ia, ib](const Tensor& g, BackwardContext& ctx) {
    if (ctx.wants(ia)) as_matrix(ctx.grad(ia)).noalias() += as_matrix(g) * as_matrix(ctx.value(ib)).transpose();
    if (ctx.wants(ib)) as_matrix(ctx.grad(ib)).noalias() += as_matrix(ctx.value(ia)).transpose() * as_matrix(g);
  });
}

Var concat(Var a, Var b) {
  require_same_graph("concat", a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.empty() || sa.size() != sb.size() || !std::equal(sa.begin(), sa.end() - 1, sb.begin())) {
    throw ShapeError("concat", sa, sb);
  }
  const std::size_t ca = sa.back(), cb = sb.back();
  const std::size_t outer = a.value().numel() / ca;
  Shape so = sa;
  so.back() = ca + cb;
  Tensor out(so);
  const double* pa = a.value().data();
  const double* pb = b.value().data();
  double* po = out.data();
  for (std::size_t r = 0; r < outer; ++r) {
    std::copy_n(pa + r * ca, ca, po + r * (ca + cb));
    std::copy_n(pb + r * cb, cb, po + r * (ca + cb) + ca);
  }
  const auto ia = a.id(), ib = b.id();
  return a.graph().push(std::move(out), {ia, ib}, [ia, ib, ca, cb, outer](const Tensor& g, BackwardContext& ctx) {
    const double* pg = g.data();
    if (ctx.wants(ia)) {
      double* d = ctx.grad(ia).data();
      for (std::size_t r = 0; r < outer; ++r)
        for (std::size_t c = 0; c < ca; ++c) d[r * ca + c] += pg[r * (ca + cb) + c];
    }
    if (ctx.wants(ib)) {
      double* d = ctx.grad(ib).data();
      for (std::size_t r = 0; r < outer; ++r)
        for (std::size_t c = 0; c < cb; ++c) d[r * cb + c] += pg[r * (ca + cb) + ca + c];
    }
  });
}

Var leaky_relu(Var a, double slope) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : slope * v;
  const auto ia = a.id();
  return a.graph().push(std::move(out), {ia}, [ia, slope](const Tensor& g, BackwardContext& ctx) {
    const Tensor& x = ctx.value(ia);
    Tensor& dst = ctx.grad(ia);
    for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += x[i] > 0.0 ? g[i] : slope * g[i];
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const auto ia = a.id();
  return a.graph().push(Tensor::scalar(s), {ia}, [ia](const Tensor& g, BackwardContext& ctx) {
    const double gv = g[0];
    for (auto& v : ctx.grad(ia).values()) v += gv;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().numel())); }

Var sum_of_squares(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v * v;
  const auto ia = a.id();
  return a.graph().push(Tensor::scalar(s), {ia}, [ia](const Tensor& g, BackwardContext& ctx) {
    const double gv = 2.0 * g[0];
    const Tensor& x = ctx.value(ia);
    Tensor& dst = ctx.grad(ia);
    for (std::size_t i = 0; i < x.numel(); ++i) dst[i] += gv * x[i];
  });
}

Var add_bias(Var x, Var bias) {
  require_same_graph("add_bias", x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (xv.rank() != 2 || bv.rank() != 1 || bv.dim(0) != xv.cols()) throw ShapeError("add_bias", xv.shape(), bv.shape());
  Tensor out = xv;
  const std::size_t n = xv.rows(), m = xv.cols();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out.data()[r * m + c] += bv[c];
  const auto ix = x.id(), ib = bias.id();
  return x.graph().push(std::move(out), {ix, ib}, [ix, ib, n, m](const Tensor& g, BackwardContext& ctx) {
    if (ctx.wants(ix)) {
      Tensor& dst = ctx.grad(ix);
      for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
    }
    if (ctx.wants(ib)) {
      Tensor& dst = ctx.grad(ib);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < m; ++c) dst[c] += g.data()[r * m + c];
    }
  });
}

}  // namespace rdmd
