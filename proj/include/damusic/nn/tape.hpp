#pragma once

// Reverse-mode automatic differentiation over real vectors.
//
// Every node holds a dense real array. Primitives append a node together with
// a closure that, given the node's gradient, accumulates into the gradients of
// its inputs. backward() replays closures in reverse insertion order and then
// adds the gradients of parameter leaves into the ParamStore.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "damusic/errors.hpp"
#include "damusic/linalg.hpp"
#include "damusic/nn/param_store.hpp"

namespace damusic::nn {

struct Var {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t id = npos;
  bool valid() const noexcept { return id != npos; }
};

class Tape {
 public:
  using Backward = std::function<void(Tape&)>;

  struct Diagnostics {
    std::size_t degenerate_eig_pairs = 0;
  };

  Var constant(RealVector value) { return push(std::move(value), nullptr); }

  /// Leaf bound to a stored parameter. Repeated calls return the same node.
  Var param(ParamStore& store, ParamId id) {
    if (store_ != nullptr && store_ != &store) throw InvalidInputError("Tape: parameters from two stores on one tape");
    store_ = &store;
    if (auto it = param_nodes_.find(id); it != param_nodes_.end()) return it->second;
    const Var v = push(store[id].value, nullptr);
    param_nodes_.emplace(id, v);
    return v;
  }

  /// Appends a primitive. `backward` may be empty for leaves.
  Var push(RealVector value, Backward backward) {
    nodes_.push_back(Node{std::move(value), {}, std::move(backward)});
    return Var{nodes_.size() - 1};
  }

  const RealVector& value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const {
    const auto& val = value(v);
    if (val.size() != 1) throw DimensionError("Tape::scalar: node is not a scalar");
    return val[0];
  }

  /// Gradient buffer of a node; valid during and after backward().
  RealVector& grad(Var v) { return nodes_.at(v.id).grad; }
  const RealVector& grad(Var v) const { return nodes_.at(v.id).grad; }

  std::size_t size() const noexcept { return nodes_.size(); }
  Diagnostics& diagnostics() noexcept { return diag_; }

  /// Propagates d(seed * loss) to every node and accumulates into parameter
  /// gradient buffers (+=, so several tapes may contribute to one batch).
  void backward(Var loss, double seed = 1.0) {
    if (value(loss).size() != 1) throw DimensionError("Tape::backward: loss must be a scalar");
    for (auto& n : nodes_) n.grad.assign(n.value.size(), 0.0);
    nodes_[loss.id].grad[0] = seed;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      if (nodes_[i].backward) nodes_[i].backward(*this);
    }
    if (store_ != nullptr) {
      for (const auto& [id, var] : param_nodes_) {
        auto& dst = (*store_)[id].grad;
        const auto& src = nodes_[var.id].grad;
        for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
      }
    }
  }

  void clear() {
    nodes_.clear();
    param_nodes_.clear();
    store_ = nullptr;
    diag_ = {};
  }

 private:
  struct Node {
    RealVector value;
    RealVector grad;
    Backward backward;
  };

  std::vector<Node> nodes_;
  std::unordered_map<ParamId, Var> param_nodes_;
  ParamStore* store_ = nullptr;
  Diagnostics diag_;
};

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

namespace detail {
inline void require_same_size(const RealVector& a, const RealVector& b, const char* op) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(op) + ": size mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}
}  // namespace detail

inline Var add(Tape& tape, Var a, Var b) {
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  detail::require_same_size(va, vb, "add");
  RealVector out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] + vb[i];
  Var y{tape.size()};
  return tape.push(std::move(out), [a, b, y](Tape& t) {
    const auto& g = t.grad(y);
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    auto& gb = t.grad(b);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
  });
}

inline Var sub(Tape& tape, Var a, Var b) {
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  detail::require_same_size(va, vb, "sub");
  RealVector out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] - vb[i];
  Var y{tape.size()};
  return tape.push(std::move(out), [a, b, y](Tape& t) {
    const auto& g = t.grad(y);
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    auto& gb = t.grad(b);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
  });
}

/// Elementwise product.
inline Var mul(Tape& tape, Var a, Var b) {
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  detail::require_same_size(va, vb, "mul");
  RealVector out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = va[i] * vb[i];
  Var y{tape.size()};
  return tape.push(std::move(out), [a, b, y](Tape& t) {
    const auto& g = t.grad(y);
    const auto& va = t.value(a);
    const auto& vb = t.value(b);
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    auto& gb = t.grad(b);
    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
  });
}

inline Var scale(Tape& tape, Var a, double c) {
  RealVector out = tape.value(a);
  for (auto& v : out) v *= c;
  Var y{tape.size()};
  return tape.push(std::move(out), [a, y, c](Tape& t) {
    const auto& g = t.grad(y);
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

inline Var sum(Tape& tape, Var a) {
  double acc = 0.0;
  for (double v : tape.value(a)) acc += v;
  Var y{tape.size()};
  return tape.push({acc}, [a, y](Tape& t) {
    const double g = t.grad(y)[0];
    for (auto& ga : t.grad(a)) ga += g;
  });
}

/// Dot product with a constant weight vector; handy for scalar test losses.
inline Var weighted_sum(Tape& tape, Var a, RealVector weights) {
  const auto& va = tape.value(a);
  detail::require_same_size(va, weights, "weighted_sum");
  double acc = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * weights[i];
  Var y{tape.size()};
  return tape.push({acc}, [a, y, w = std::move(weights)](Tape& t) {
    const double g = t.grad(y)[0];
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < w.size(); ++i) ga[i] += g * w[i];
  });
}

enum class Activation { identity, relu, tanh, sigmoid };

inline double activate(Activation act, double v) {
  switch (act) {
    case Activation::identity: return v;
    case Activation::relu: return v > 0.0 ? v : 0.0;
    case Activation::tanh: return std::tanh(v);
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-v));
  }
  return v;
}

/// Derivative expressed through the activation output y.
inline double activation_slope(Activation act, double y) {
  switch (act) {
    case Activation::identity: return 1.0;
    case Activation::relu: return y > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - y * y;
    case Activation::sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

inline Var apply(Tape& tape, Var a, Activation act) {
  RealVector out = tape.value(a);
  for (auto& v : out) v = activate(act, v);
  Var y{tape.size()};
  return tape.push(std::move(out), [a, y, act](Tape& t) {
    const auto& g = t.grad(y);
    const auto& vy = t.value(y);
    auto& ga = t.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * activation_slope(act, vy[i]);
  });
}

inline Var sigmoid(Tape& tape, Var a) { return apply(tape, a, Activation::sigmoid); }
inline Var tanh(Tape& tape, Var a) { return apply(tape, a, Activation::tanh); }
inline Var relu(Tape& tape, Var a) { return apply(tape, a, Activation::relu); }

/// act(sum_k W_k x_k + b), each W_k row-major (out x in_k). Fusing the terms
/// keeps GRU gates to one node each.
inline Var affine(Tape& tape, std::vector<std::pair<Var, Var>> terms, Var bias, Activation act = Activation::identity) {
  const auto& vb = tape.value(bias);
  const std::size_t rows = vb.size();
  RealVector out = vb;
  for (const auto& [w, x] : terms) {
    const auto& vw = tape.value(w);
    const auto& vx = tape.value(x);
    const std::size_t cols = vx.size();
    if (vw.size() != rows * cols) {
      throw DimensionError("affine: weight has " + std::to_string(vw.size()) + " entries, expected " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const double* wr = vw.data() + r * cols;
      double acc = 0.0;
      for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * vx[c];
      out[r] += acc;
    }
  }
  if (act != Activation::identity)
    for (auto& v : out) v = activate(act, v);
  Var y{tape.size()};
  return tape.push(std::move(out), [terms = std::move(terms), bias, y, act](Tape& t) {
    const auto& g = t.grad(y);
    const auto& vy = t.value(y);
    RealVector pre(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) pre[i] = g[i] * activation_slope(act, vy[i]);
    auto& gb = t.grad(bias);
    for (std::size_t i = 0; i < pre.size(); ++i) gb[i] += pre[i];
    const std::size_t rows = pre.size();
    for (const auto& [w, x] : terms) {
      const auto& vw = t.value(w);
      const auto& vx = t.value(x);
      const std::size_t cols = vx.size();
      auto& gw = t.grad(w);
      auto& gx = t.grad(x);
      for (std::size_t r = 0; r < rows; ++r) {
        const double pr = pre[r];
        if (pr == 0.0) continue;
        const double* wr = vw.data() + r * cols;
        double* gwr = gw.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
          gwr[c] += pr * vx[c];
          gx[c] += pr * wr[c];
        }
      }
    }
  });
}

}  // namespace damusic::nn
