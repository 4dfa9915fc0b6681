#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sentcomp/tensor.hpp"

namespace sentcomp::ad {

class Tape;

struct Node {
  Tensor value;
  Tensor grad;  // allocated iff requires_grad
  bool requires_grad = false;
  bool is_param = false;
  Tape* tape = nullptr;  // tape the op was recorded on; null for leaves
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents
};

using NodePtr = std::shared_ptr<Node>;

/// Value-semantics handle on a graph node.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : node_(std::move(n)) {}

  static Var constant(Tensor t);
  static Var scalar(real x) { return constant(Tensor::scalar(x)); }

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  real item() const;  // scalar value; throws on non-scalar
  const std::vector<int>& shape() const { return node_->value.shape; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Leaf with persistent gradient accumulator. Gradients add up across
/// backward calls until zero_grad.
Var make_param(Tensor init);

struct Parameter {
  std::string name;
  Var var;
  Tensor& value() const { return var.node()->value; }
  Tensor& grad() const { return var.node()->grad; }
};

void zero_grad(const std::vector<Parameter>& params);

/// Records executed ops for one forward pass. Construction makes the tape
/// active for the current thread; destruction restores the previous one.
/// Ops are recorded only when some input requires gradients.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Reverse sweep from a scalar loss recorded on this tape. Parameter
  /// gradients accumulate additively; intermediate gradients are reset on
  /// every call. `seed` is the adjoint of the loss itself.
  void backward(const Var& loss, real seed = real(1));

  size_t size() const { return ops_.size(); }

  static Tape* active();

 private:
  friend NodePtr record(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> bw);
  std::vector<NodePtr> ops_;
  Tape* prev_ = nullptr;
};

// ---- primitives -----------------------------------------------------------
// Shape rules are checked on entry; mismatches throw std::invalid_argument
// naming the op and both shapes.

Var matmul(const Var& a, const Var& b);          // [m,k]x[k,n], [m,k]x[k], [k]x[k,n]
Var add(const Var& a, const Var& b);             // same shape
Var add_rowwise(const Var& m, const Var& v);     // [r,c] + [c] broadcast over rows
Var mul(const Var& a, const Var& b);             // elementwise, same shape
Var scale(const Var& x, real k);
Var affine(const Var& x, real a, real b);        // a*x + b elementwise
Var dot(const Var& a, const Var& b);             // [n]·[n] -> scalar
Var concat(const std::vector<Var>& xs);          // rank-1 pieces -> rank-1
Var stack_rows(const std::vector<Var>& rows);    // n vectors [d] -> [n,d]
Var slice(const Var& x, int begin, int len);     // rank-1 range
Var tanh(const Var& x);
Var sigmoid(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var square(const Var& x);
Var softmax(const Var& x);                       // rank-1, max-subtracted
Var log_softmax(const Var& x);                   // rank-1, max-subtracted
Var lookup(const Var& table, int index);         // row of [v,d]; out of range throws
Var sum(const Var& x);                           // -> scalar
Var mean(const Var& x);                          // -> scalar
Var pick(const Var& x, int index);               // rank-1 element -> scalar
Var pick_sum(const Var& x, const std::vector<int>& indices);  // sum of elements -> scalar

/// Identity on values; gradients never flow upstream through the result.
Var stop_gradient(const Var& x);

/// Disables recording on the current thread while alive (evaluation mode),
/// even if a tape is active further up the stack.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* saved_;
};

// ---- gradient checking ----------------------------------------------------

struct FiniteDiffReport {
  struct Entry {
    std::string name;
    real max_rel_err = 0;
  };
  std::vector<Entry> entries;
  real max_rel_err = 0;
  bool passed = false;
};

/// Compares backward gradients of `f` against central differences for every
/// element of every parameter. `f` must build its graph from scratch on each
/// call and be deterministic (checked with two evaluations).
FiniteDiffReport finite_diff_check(const std::function<Var()>& f,
                                   const std::vector<Parameter>& params,
                                   real epsilon = real(1e-5),
                                   real tolerance = real(1e-4));

}  // namespace sentcomp::ad
