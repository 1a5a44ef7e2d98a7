/*
 * Copyright 2026 The mvfusion Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Reverse-mode differentiation over a closed set of tensor primitives.
//
// A Graph is an append-only arena of nodes; creation order is a topological
// order, so backward is a single reverse sweep. Values are lightweight handles
// into the arena and are only meaningful together with the graph that
// produced them.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mvfusion/errors.hpp"
#include "mvfusion/tensor.hpp"

namespace mvfusion {

enum class Op : std::uint8_t {
  kLeaf,
  kMatMul,
  kAdd,
  kMul,
  kSigmoid,
  kTanh,
  kRelu,
  kSoftmax,
  kConcat,
  kSlice,
  kReduceMean,
  kReduceMax,
  kReduceProd,
  kScale,
  kReshape,
  kRsqrt,
  kBce,
};

inline const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kMatMul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kMul: return "mul";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kSoftmax: return "softmax";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kReduceMean: return "reduce_mean";
    case Op::kReduceMax: return "reduce_max";
    case Op::kReduceProd: return "reduce_prod";
    case Op::kScale: return "scale";
    case Op::kReshape: return "reshape";
    case Op::kRsqrt: return "rsqrt";
    case Op::kBce: return "bce";
  }
  return "?";
}

struct Value {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

namespace detail {

// C[M,N] += A[M,K] * B[K,N]
template <class T>
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const T* a,
             const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[K,N] += A[M,K]^T * B[M,N]
template <class T>
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const T* a,
             const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      T* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// Splits a shape around `axis` into (outer, axis length, inner).
struct AxisSplit {
  std::size_t outer, len, inner;
};

inline AxisSplit split_axis(const Shape& s, std::size_t axis) {
  return {s.span_size(0, axis), s[axis], s.span_size(axis + 1, s.rank())};
}

template <class T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

template <class T>
class Graph {
 public:
  struct Node {
    Op op = Op::kLeaf;
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<std::size_t> parents;
    std::size_t axis = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
    T scalar{};
    std::vector<T> aux;
    bool requires_grad = false;
    bool has_grad = false;
  };

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  std::size_t size() const { return nodes_.size(); }

  const Tensor<T>& value(Value v) const { return node(v).value; }
  const Shape& shape(Value v) const { return node(v).value.shape(); }
  Op op(Value v) const { return node(v).op; }
  bool requires_grad(Value v) const { return node(v).requires_grad; }

  // Gradient accumulated by backward; zeros when the node was never reached.
  Tensor<T> grad(Value v) const {
    const Node& n = node(v);
    if (!n.has_grad) return Tensor<T>(n.value.shape());
    return n.grad;
  }

  Value leaf(Tensor<T> data, bool requires_grad) {
    Node n;
    n.op = Op::kLeaf;
    n.value = std::move(data);
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }
  Value constant(Tensor<T> data) { return leaf(std::move(data), false); }
  Value parameter(Tensor<T> data) { return leaf(std::move(data), true); }

  Value matmul(Value a, Value b) {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (sa.rank() != 2 || sb.rank() != 2 || sa[1] != sb[0])
      throw ShapeError("matmul " + sa.str() + " x " + sb.str());
    Tensor<T> out(Shape{sa[0], sb[1]});
    detail::gemm_nn(sa[0], sa[1], sb[1], value(a).data(), value(b).data(),
                    out.data());
    return push_op(Op::kMatMul, std::move(out), {a.id, b.id});
  }

  // a + b where b's shape equals the trailing dimensions of a's shape.
  Value add(Value a, Value b) {
    check_broadcast(a, b, "add");
    Tensor<T> out = value(a);
    const Tensor<T>& vb = value(b);
    const std::size_t inner = vb.size();
    T* o = out.data();
    const T* pb = vb.data();
    for (std::size_t base = 0; base < out.size(); base += inner)
      for (std::size_t j = 0; j < inner; ++j) o[base + j] += pb[j];
    return push_op(Op::kAdd, std::move(out), {a.id, b.id});
  }

  Value sub(Value a, Value b) { return add(a, scale(b, T(-1))); }

  // Elementwise product with the same broadcasting rule as add.
  Value mul(Value a, Value b) {
    check_broadcast(a, b, "mul");
    Tensor<T> out = value(a);
    const Tensor<T>& vb = value(b);
    const std::size_t inner = vb.size();
    T* o = out.data();
    const T* pb = vb.data();
    for (std::size_t base = 0; base < out.size(); base += inner)
      for (std::size_t j = 0; j < inner; ++j) o[base + j] *= pb[j];
    return push_op(Op::kMul, std::move(out), {a.id, b.id});
  }

  Value sigmoid(Value x) {
    Tensor<T> out = value(x);
    for (T& v : out.values()) v = detail::stable_sigmoid(v);
    return push_op(Op::kSigmoid, std::move(out), {x.id});
  }

  Value tanh(Value x) {
    Tensor<T> out = value(x);
    for (T& v : out.values()) v = std::tanh(v);
    return push_op(Op::kTanh, std::move(out), {x.id});
  }

  Value relu(Value x) {
    Tensor<T> out = value(x);
    for (T& v : out.values()) v = v > T(0) ? v : T(0);
    return push_op(Op::kRelu, std::move(out), {x.id});
  }

  Value softmax(Value x, std::size_t axis) {
    const Shape& s = shape(x);
    check_axis(s, axis, "softmax");
    const auto [outer, len, inner] = detail::split_axis(s, axis);
    Tensor<T> out = value(x);
    T* o = out.data();
    for (std::size_t a = 0; a < outer; ++a)
      for (std::size_t c = 0; c < inner; ++c) {
        T* line = o + a * len * inner + c;
        T mx = line[0];
        for (std::size_t i = 1; i < len; ++i) mx = std::max(mx, line[i * inner]);
        T sum = 0;
        for (std::size_t i = 0; i < len; ++i) {
          line[i * inner] = std::exp(line[i * inner] - mx);
          sum += line[i * inner];
        }
        for (std::size_t i = 0; i < len; ++i) line[i * inner] /= sum;
      }
    Node n = make_node(Op::kSoftmax, std::move(out), {x.id});
    n.axis = axis;
    return push(std::move(n));
  }

  Value concat(std::span<const Value> xs, std::size_t axis) {
    if (xs.empty()) throw ShapeError("concat of zero inputs");
    const Shape& s0 = shape(xs[0]);
    check_axis(s0, axis, "concat");
    std::size_t total = 0;
    for (Value v : xs) {
      const Shape& s = shape(v);
      if (s.rank() != s0.rank()) throw ShapeError("concat rank mismatch");
      for (std::size_t i = 0; i < s.rank(); ++i)
        if (i != axis && s[i] != s0[i])
          throw ShapeError("concat " + s.str() + " with " + s0.str());
      total += s[axis];
    }
    const Shape out_shape = s0.with(axis, total);
    Tensor<T> out(out_shape);
    const std::size_t outer = out_shape.span_size(0, axis);
    const std::size_t inner = out_shape.span_size(axis + 1, out_shape.rank());
    std::size_t offset = 0;
    std::vector<std::size_t> parents;
    parents.reserve(xs.size());
    for (Value v : xs) {
      const Tensor<T>& in = value(v);
      const std::size_t chunk = in.shape()[axis] * inner;
      for (std::size_t a = 0; a < outer; ++a)
        std::copy_n(in.data() + a * chunk, chunk,
                    out.data() + a * total * inner + offset);
      offset += chunk;
      parents.push_back(v.id);
    }
    Node n = make_node(Op::kConcat, std::move(out), std::move(parents));
    n.axis = axis;
    return push(std::move(n));
  }

  Value concat(std::initializer_list<Value> xs, std::size_t axis) {
    return concat(std::span<const Value>(xs.begin(), xs.size()), axis);
  }

  Value slice(Value x, std::size_t axis, std::size_t begin, std::size_t end) {
    const Shape& s = shape(x);
    check_axis(s, axis, "slice");
    if (begin >= end || end > s[axis])
      throw ShapeError("slice [" + std::to_string(begin) + "," +
                       std::to_string(end) + ") of " + s.str());
    const auto [outer, len, inner] = detail::split_axis(s, axis);
    const std::size_t width = (end - begin) * inner;
    Tensor<T> out(s.with(axis, end - begin));
    const T* in = value(x).data();
    for (std::size_t a = 0; a < outer; ++a)
      std::copy_n(in + (a * len + begin) * inner, width, out.data() + a * width);
    Node n = make_node(Op::kSlice, std::move(out), {x.id});
    n.axis = axis;
    n.begin = begin;
    n.end = end;
    return push(std::move(n));
  }

  Value reduce_mean(Value x, std::size_t axis) {
    return reduce(Op::kReduceMean, x, axis);
  }
  Value reduce_max(Value x, std::size_t axis) {
    return reduce(Op::kReduceMax, x, axis);
  }
  Value reduce_prod(Value x, std::size_t axis) {
    return reduce(Op::kReduceProd, x, axis);
  }

  Value scale(Value x, T s) {
    Tensor<T> out = value(x);
    for (T& v : out.values()) v *= s;
    Node n = make_node(Op::kScale, std::move(out), {x.id});
    n.scalar = s;
    return push(std::move(n));
  }

  Value reshape(Value x, Shape s) {
    if (s.size() != shape(x).size())
      throw ShapeError("reshape " + shape(x).str() + " to " + s.str());
    return push_op(Op::kReshape, value(x).reshaped(s), {x.id});
  }

  // 1 / sqrt(x + eps), elementwise.
  Value rsqrt(Value x, T eps) {
    Tensor<T> out = value(x);
    for (T& v : out.values()) {
      if (!(v + eps > T(0))) throw NumericError("rsqrt of non-positive value");
      v = T(1) / std::sqrt(v + eps);
    }
    Node n = make_node(Op::kRsqrt, std::move(out), {x.id});
    n.scalar = eps;
    return push(std::move(n));
  }

  // Mean binary cross-entropy of probabilities p [B] against constant labels,
  // with p clamped to [eps, 1-eps]. Returns a scalar.
  Value bce(Value p, std::span<const T> labels, T eps) {
    const Tensor<T>& vp = value(p);
    if (vp.rank() != 1 || vp.size() != labels.size())
      throw ShapeError("bce probabilities " + vp.shape().str() + " vs " +
                       std::to_string(labels.size()) + " labels");
    if (vp.size() == 0) throw ShapeError("bce of empty batch");
    T total = 0;
    for (std::size_t i = 0; i < vp.size(); ++i) {
      const T q = std::clamp(vp[i], eps, T(1) - eps);
      total -= labels[i] * std::log(q) + (T(1) - labels[i]) * std::log(T(1) - q);
    }
    Node n = make_node(Op::kBce, Tensor<T>::scalar(total / T(vp.size())),
                       {p.id});
    n.scalar = eps;
    n.aux.assign(labels.begin(), labels.end());
    return push(std::move(n));
  }

  // Resets every stored gradient to zero.
  void zero_grad() {
    for (Node& n : nodes_) {
      n.grad = Tensor<T>();
      n.has_grad = false;
    }
  }

  // Accumulates d(root)/d(node) into every reachable leaf that requires
  // gradients. Interior adjoints are recomputed on every call; leaf gradients
  // accumulate across calls until zero_grad().
  void backward(Value root) {
    Node& r = node(root);
    if (r.value.size() != 1 || r.value.rank() != 0)
      throw ContractError("backward root must be a scalar, got " +
                          r.value.shape().str());
    for (Node& n : nodes_)
      if (n.op != Op::kLeaf && n.has_grad) {
        n.grad = Tensor<T>();
        n.has_grad = false;
      }
    if (!r.requires_grad) return;
    ensure_grad(r);
    r.grad[0] += T(1);
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.op == Op::kLeaf || !n.has_grad) continue;
      propagate(n);
    }
  }

 private:
  // deque keeps references returned by value() and grad() valid while
  // later operations append nodes.
  std::deque<Node> nodes_;

  Node& node(Value v) {
    if (v.id >= nodes_.size()) throw ContractError("value from another graph");
    return nodes_[v.id];
  }
  const Node& node(Value v) const {
    if (v.id >= nodes_.size()) throw ContractError("value from another graph");
    return nodes_[v.id];
  }

  Value push(Node n) {
    nodes_.push_back(std::move(n));
    return Value{nodes_.size() - 1};
  }

  Node make_node(Op op, Tensor<T> out, std::vector<std::size_t> parents) {
    Node n;
    n.op = op;
    n.value = std::move(out);
    n.parents = std::move(parents);
    for (std::size_t p : n.parents) n.requires_grad |= nodes_[p].requires_grad;
    return n;
  }

  Value push_op(Op op, Tensor<T> out, std::vector<std::size_t> parents) {
    return push(make_node(op, std::move(out), std::move(parents)));
  }

  static void check_axis(const Shape& s, std::size_t axis, const char* what) {
    if (axis >= s.rank())
      throw AxisError(std::string(what) + ": axis " + std::to_string(axis) +
                      " out of range for " + s.str());
  }

  void check_broadcast(Value a, Value b, const char* what) const {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (!sa.has_suffix(sb))
      throw ShapeError(std::string(what) + " " + sa.str() + " with " + sb.str());
  }

  Value reduce(Op op, Value x, std::size_t axis) {
    const Shape& s = shape(x);
    check_axis(s, axis, op_name(op));
    const auto [outer, len, inner] = detail::split_axis(s, axis);
    Tensor<T> out(s.without(axis));
    const T* in = value(x).data();
    T* o = out.data();
    for (std::size_t a = 0; a < outer; ++a)
      for (std::size_t c = 0; c < inner; ++c) {
        const T* line = in + a * len * inner + c;
        T acc = line[0];
        for (std::size_t i = 1; i < len; ++i) {
          const T v = line[i * inner];
          if (op == Op::kReduceMax)
            acc = v > acc ? v : acc;
          else if (op == Op::kReduceProd)
            acc *= v;
          else
            acc += v;
        }
        if (op == Op::kReduceMean) acc /= T(len);
        o[a * inner + c] = acc;
      }
    Node n = make_node(op, std::move(out), {x.id});
    n.axis = axis;
    return push(std::move(n));
  }

  static void ensure_grad(Node& n) {
    if (!n.has_grad) {
      n.grad = Tensor<T>(n.value.shape());
      n.has_grad = true;
    }
  }

  // Returns the parent's gradient buffer, or nullptr when it needs none.
  T* parent_grad(std::size_t id) {
    Node& p = nodes_[id];
    if (!p.requires_grad) return nullptr;
    ensure_grad(p);
    return p.grad.data();
  }

  void propagate(Node& n) {
    const T* g = n.grad.data();
    const std::size_t size = n.value.size();
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatMul: {
        const Tensor<T>& a = nodes_[n.parents[0]].value;
        const Tensor<T>& b = nodes_[n.parents[1]].value;
        const std::size_t m = a.shape()[0], k = a.shape()[1], cols = b.shape()[1];
        if (T* ga = parent_grad(n.parents[0])) {
          std::vector<T> bt(k * cols);
          for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < cols; ++j) bt[j * k + p] = b[p * cols + j];
          detail::gemm_nn(m, cols, k, g, bt.data(), ga);
        }
        if (T* gb = parent_grad(n.parents[1]))
          detail::gemm_tn(m, k, cols, a.data(), g, gb);
        break;
      }
      case Op::kAdd: {
        const std::size_t inner = nodes_[n.parents[1]].value.size();
        if (T* ga = parent_grad(n.parents[0]))
          for (std::size_t i = 0; i < size; ++i) ga[i] += g[i];
        if (T* gb = parent_grad(n.parents[1]))
          for (std::size_t base = 0; base < size; base += inner)
            for (std::size_t j = 0; j < inner; ++j) gb[j] += g[base + j];
        break;
      }
      case Op::kMul: {
        const Tensor<T>& a = nodes_[n.parents[0]].value;
        const Tensor<T>& b = nodes_[n.parents[1]].value;
        const std::size_t inner = b.size();
        if (T* ga = parent_grad(n.parents[0]))
          for (std::size_t base = 0; base < size; base += inner)
            for (std::size_t j = 0; j < inner; ++j)
              ga[base + j] += g[base + j] * b[j];
        if (T* gb = parent_grad(n.parents[1]))
          for (std::size_t base = 0; base < size; base += inner)
            for (std::size_t j = 0; j < inner; ++j)
              gb[j] += g[base + j] * a[base + j];
        break;
      }
      case Op::kSigmoid: {
        const T* y = n.value.data();
        if (T* gx = parent_grad(n.parents[0]))
          for (std::size_t i = 0; i < size; ++i)
            gx[i] += g[i] * y[i] * (T(1) - y[i]);
        break;
      }
      case Op::kTanh: {
        const T* y = n.value.data();
        if (T* gx = parent_grad(n.parents[0]))
          for (std::size_t i = 0; i < size; ++i)
            gx[i] += g[i] * (T(1) - y[i] * y[i]);
        break;
      }
      case Op::kRelu: {
        const T* x = nodes_[n.parents[0]].value.data();
        if (T* gx = parent_grad(n.parents[0]))
          for (std::size_t i = 0; i < size; ++i)
            if (x[i] > T(0)) gx[i] += g[i];
        break;
      }
      case Op::kSoftmax: {
        T* gx = parent_grad(n.parents[0]);
        if (!gx) break;
        const auto [outer, len, inner] = detail::split_axis(n.value.shape(), n.axis);
        const T* y = n.value.data();
        for (std::size_t a = 0; a < outer; ++a)
          for (std::size_t c = 0; c < inner; ++c) {
            const std::size_t base = a * len * inner + c;
            T dot = 0;
            for (std::size_t i = 0; i < len; ++i)
              dot += g[base + i * inner] * y[base + i * inner];
            for (std::size_t i = 0; i < len; ++i) {
              const std::size_t at = base + i * inner;
              gx[at] += y[at] * (g[at] - dot);
            }
          }
        break;
      }
      case Op::kConcat: {
        const Shape& s = n.value.shape();
        const std::size_t outer = s.span_size(0, n.axis);
        const std::size_t inner = s.span_size(n.axis + 1, s.rank());
        const std::size_t row = s[n.axis] * inner;
        std::size_t offset = 0;
        for (std::size_t pid : n.parents) {
          const std::size_t chunk = nodes_[pid].value.shape()[n.axis] * inner;
          if (T* gp = parent_grad(pid))
            for (std::size_t a = 0; a < outer; ++a)
              for (std::size_t j = 0; j < chunk; ++j)
                gp[a * chunk + j] += g[a * row + offset + j];
          offset += chunk;
        }
        break;
      }
      case Op::kSlice: {
        T* gx = parent_grad(n.parents[0]);
        if (!gx) break;
        const auto [outer, len, inner] =
            detail::split_axis(nodes_[n.parents[0]].value.shape(), n.axis);
        const std::size_t width = (n.end - n.begin) * inner;
        for (std::size_t a = 0; a < outer; ++a)
          for (std::size_t j = 0; j < width; ++j)
            gx[(a * len + n.begin) * inner + j] += g[a * width + j];
        break;
      }
      case Op::kReduceMean:
      case Op::kReduceMax:
      case Op::kReduceProd:
        propagate_reduce(n);
        break;
      case Op::kScale: {
        if (T* gx = parent_grad(n.parents[0]))
          for (std::size_t i = 0; i < size; ++i) gx[i] += g[i] * n.scalar;
        break;
      }
      case Op::kReshape: {
        if (T* gx = parent_grad(n.parents[0]))
          for (std::size_t i = 0; i < size; ++i) gx[i] += g[i];
        break;
      }
      case Op::kRsqrt: {
        const T* y = n.value.data();
        if (T* gx = parent_grad(n.parents[0]))
          for (std::size_t i = 0; i < size; ++i)
            gx[i] += g[i] * T(-0.5) * y[i] * y[i] * y[i];
        break;
      }
      case Op::kBce: {
        T* gp = parent_grad(n.parents[0]);
        if (!gp) break;
        const Tensor<T>& p = nodes_[n.parents[0]].value;
        const T eps = n.scalar;
        const T inv_b = T(1) / T(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (p[i] < eps || p[i] > T(1) - eps) continue;
          const T y = n.aux[i];
          gp[i] += g[0] * inv_b * (-y / p[i] + (T(1) - y) / (T(1) - p[i]));
        }
        break;
      }
    }
  }

  void propagate_reduce(Node& n) {
    T* gx = parent_grad(n.parents[0]);
    if (!gx) return;
    const Tensor<T>& x = nodes_[n.parents[0]].value;
    const auto [outer, len, inner] = detail::split_axis(x.shape(), n.axis);
    const T* in = x.data();
    const T* g = n.grad.data();
    const T* y = n.value.data();
    std::vector<T> prefix, suffix;
    for (std::size_t a = 0; a < outer; ++a)
      for (std::size_t c = 0; c < inner; ++c) {
        const std::size_t out_at = a * inner + c;
        const std::size_t base = a * len * inner + c;
        const T go = g[out_at];
        if (n.op == Op::kReduceMean) {
          for (std::size_t i = 0; i < len; ++i) gx[base + i * inner] += go / T(len);
        } else if (n.op == Op::kReduceMax) {
          // First maximizer receives the full gradient.
          std::size_t best = 0;
          for (std::size_t i = 1; i < len; ++i)
            if (in[base + i * inner] > in[base + best * inner]) best = i;
          gx[base + best * inner] += go;
        } else {
          bool has_zero = false;
          for (std::size_t i = 0; i < len; ++i)
            has_zero |= in[base + i * inner] == T(0);
          if (!has_zero) {
            for (std::size_t i = 0; i < len; ++i)
              gx[base + i * inner] += go * y[out_at] / in[base + i * inner];
            continue;
          }
          // Leave-one-out products without division.
          prefix.assign(len + 1, T(1));
          suffix.assign(len + 1, T(1));
          for (std::size_t i = 0; i < len; ++i)
            prefix[i + 1] = prefix[i] * in[base + i * inner];
          for (std::size_t i = len; i-- > 0;)
            suffix[i] = suffix[i + 1] * in[base + i * inner];
          for (std::size_t i = 0; i < len; ++i)
            gx[base + i * inner] += go * prefix[i] * suffix[i + 1];
        }
      }
  }
};

}  // namespace mvfusion
