#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "granorm/tensor.hpp"

namespace granorm {

class Tape;
class ParamStore;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  int id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  const Tensor& value() const;
  double item() const { return value().item(); }
  std::size_t size() const { return value().size(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Dynamic reverse-mode tape. Nodes are appended in evaluation order, so the
/// reverse of insertion order is a valid topological order for backward().
/// A tape built with `grad_enabled = false` records values only.
///
/// Single-threaded; separate tapes may read one ParamStore concurrently.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }
  /// Drops every node created after the tape held `count` nodes. Vars
  /// referring to dropped nodes become invalid.
  void truncate(std::size_t count);

  Var constant(Tensor value);
  /// Differentiable leaf owning its value (used by tests and gradient checks).
  Var leaf(Tensor value);
  /// Leaf referencing store parameter `index`; the store must outlive the tape.
  Var param(const ParamStore& store, std::size_t index);

  const Tensor& value(int id) const;
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be a single value.
  void backward(Var loss);

  /// Gradient of a node after backward(); zeros if it received none.
  Tensor grad(Var v) const;

  /// Parameter gradients aligned with `store`, zeros for unused entries.
  std::vector<Tensor> param_grads(const ParamStore& store) const;

  // Op-author interface.
  Var push(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var push(Tensor value, std::span<const Var> parents, BackwardFn fn);
  const Tensor& grad_ref(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  /// Accumulator for `id`, zero-initialized on first access. Null when the node
  /// does not require a gradient.
  Tensor* grad_acc(int id);

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    bool grad_ready = false;
    bool requires_grad = false;
    long param_index = -1;
    BackwardFn backward;
  };

  Var add_node(Node node);

  std::vector<Node> nodes_;
  bool grad_enabled_;
};

// Elementwise / arithmetic. Binary ops require equal shapes.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
/// `s` holds one value; returns s * v.
Var mul_scalar(Var s, Var v);

// Linear algebra.
Var matvec(Var a, Var x);   // [m x k] . [k] -> [m]
Var vecmat(Var x, Var a);   // [m] . [m x k] -> [k]
Var matmul(Var a, Var b);   // [m x k] . [k x n] -> [m x n]
Var dot(Var a, Var b);      // -> scalar

// Structure.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var stack_rows(std::span<const Var> rows);
Var row(Var table, std::size_t index);
Var slice(Var x, std::size_t offset, std::size_t length);
Var element(Var x, std::size_t index);
/// out[j] = x[index[j]], or 0 where index[j] < 0.
Var gather(Var x, std::span<const int> index);
/// out[g] = sum of x[i] with group[i] == g; negative groups are dropped.
Var segment_sum(Var x, std::span<const int> group, std::size_t groups);

// Nonlinearities.
Var tanh(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var log(Var x);
/// Softmax over the last dimension, shifted by the row maximum.
Var softmax(Var x);
Var log_softmax(Var x);
/// Elementwise max(x, c); the gradient is passed only where x > c.
Var max_with_constant(Var x, double c);

// Reductions.
Var sum(Var x);
Var mean(Var x);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator-(Var a) { return scale(a, -1.0); }

}  // namespace granorm
