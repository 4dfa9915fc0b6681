#include "sentcomp/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace sentcomp::ad {

namespace {

thread_local Tape* g_active = nullptr;

void check_shapes(bool ok, const char* op, const Tensor& a, const Tensor& b) {
  if (!ok)
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                                shape_str(b));
}

void check_rank(const Var& x, int rank, const char* op) {
  if (x.value().rank() != rank)
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                " argument, got shape " + shape_str(x.value()));
}

}  // namespace

Tape* Tape::active() { return g_active; }

Tape::Tape() : prev_(g_active) { g_active = this; }

Tape::~Tape() { g_active = prev_; }

NoGradScope::NoGradScope() : saved_(g_active) { g_active = nullptr; }

NoGradScope::~NoGradScope() { g_active = saved_; }

NodePtr record(Tensor value, std::vector<NodePtr> parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  bool track = false;
  if (g_active) {
    for (const auto& p : parents) {
      if (p && p->requires_grad) {
        track = true;
        break;
      }
    }
  }
  if (track) {
    n->requires_grad = true;
    n->grad = Tensor::zeros(n->value.shape);
    n->parents = std::move(parents);
    n->backward_fn = std::move(bw);
    n->tape = g_active;
    g_active->ops_.push_back(n);
  }
  return n;
}

Var Var::constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  return Var(std::move(n));
}

real Var::item() const {
  if (!node_ || node_->value.numel() != 1)
    throw std::invalid_argument("item: tensor is not a scalar, shape " +
                                (node_ ? shape_str(node_->value) : std::string("<none>")));
  return node_->value.v[0];
}

Var make_param(Tensor init) {
  auto n = std::make_shared<Node>();
  n->value = std::move(init);
  n->requires_grad = true;
  n->is_param = true;
  n->grad = Tensor::zeros(n->value.shape);
  return Var(n);
}

void zero_grad(const std::vector<Parameter>& params) {
  for (const auto& p : params) p.grad().fill(0);
}

void Tape::backward(const Var& loss, real seed) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
  Node* ln = loss.node().get();
  if (ln->value.rank() != 0)
    throw std::invalid_argument("backward: loss must be a scalar, got shape " +
                                shape_str(ln->value));
  if (!ln->requires_grad) return;  // constant loss: all gradients are zero
  if (ln->is_param && !ln->tape) {
    ln->grad.v[0] += seed;  // the loss is a bare parameter
    return;
  }
  if (ln->tape != this)
    throw std::invalid_argument("backward: loss is not connected to this tape");
  for (auto& n : ops_)
    if (!n->is_param) n->grad.fill(0);
  ln->grad.v[0] = seed;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    Node& n = **it;
    if (n.backward_fn) n.backward_fn(n);
  }
}

// ---- primitives -----------------------------------------------------------

namespace {

// Adds into parent grad only when the parent participates in the sweep.
inline bool wants_grad(const NodePtr& p) { return p && p->requires_grad; }

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() == 2 && B.rank() == 2) {
    check_shapes(A.cols() == B.rows(), "matmul", A, B);
    int m = A.rows(), k = A.cols(), n = B.cols();
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < k; ++l) {
        real ail = A.at(i, l);
        if (ail == real(0)) continue;
        for (int j = 0; j < n; ++j) out.at(i, j) += ail * B.at(l, j);
      }
    return Var(record(std::move(out), {a.node(), b.node()}, [m, k, n](Node& self) {
      const Tensor& G = self.grad;
      const NodePtr& pa = self.parents[0];
      const NodePtr& pb = self.parents[1];
      if (wants_grad(pa)) {
        const Tensor& Bv = pb->value;
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) {
            real acc = 0;
            for (int j = 0; j < n; ++j) acc += G.at(i, j) * Bv.at(l, j);
            pa->grad.at(i, l) += acc;
          }
      }
      if (wants_grad(pb)) {
        const Tensor& Av = pa->value;
        for (int l = 0; l < k; ++l)
          for (int i = 0; i < m; ++i) {
            real ail = Av.at(i, l);
            if (ail == real(0)) continue;
            for (int j = 0; j < n; ++j) pb->grad.at(l, j) += ail * G.at(i, j);
          }
      }
    }));
  }
  if (A.rank() == 2 && B.rank() == 1) {
    check_shapes(A.cols() == B.rows(), "matmul", A, B);
    int m = A.rows(), k = A.cols();
    Tensor out = Tensor::zeros({m});
    for (int i = 0; i < m; ++i) {
      real acc = 0;
      for (int l = 0; l < k; ++l) acc += A.at(i, l) * B.at(l);
      out.at(i) = acc;
    }
    return Var(record(std::move(out), {a.node(), b.node()}, [m, k](Node& self) {
      const Tensor& g = self.grad;
      const NodePtr& pa = self.parents[0];
      const NodePtr& pb = self.parents[1];
      if (wants_grad(pa)) {
        for (int i = 0; i < m; ++i) {
          real gi = g.at(i);
          if (gi == real(0)) continue;
          for (int l = 0; l < k; ++l) pa->grad.at(i, l) += gi * pb->value.at(l);
        }
      }
      if (wants_grad(pb)) {
        for (int i = 0; i < m; ++i) {
          real gi = g.at(i);
          if (gi == real(0)) continue;
          for (int l = 0; l < k; ++l) pb->grad.at(l) += gi * pa->value.at(i, l);
        }
      }
    }));
  }
  if (A.rank() == 1 && B.rank() == 2) {
    check_shapes(A.rows() == B.rows(), "matmul", A, B);
    int k = B.rows(), n = B.cols();
    Tensor out = Tensor::zeros({n});
    for (int l = 0; l < k; ++l) {
      real al = A.at(l);
      if (al == real(0)) continue;
      for (int j = 0; j < n; ++j) out.at(j) += al * B.at(l, j);
    }
    return Var(record(std::move(out), {a.node(), b.node()}, [k, n](Node& self) {
      const Tensor& g = self.grad;
      const NodePtr& pa = self.parents[0];
      const NodePtr& pb = self.parents[1];
      if (wants_grad(pa)) {
        for (int l = 0; l < k; ++l) {
          real acc = 0;
          for (int j = 0; j < n; ++j) acc += pb->value.at(l, j) * g.at(j);
          pa->grad.at(l) += acc;
        }
      }
      if (wants_grad(pb)) {
        for (int l = 0; l < k; ++l) {
          real al = pa->value.at(l);
          if (al == real(0)) continue;
          for (int j = 0; j < n; ++j) pb->grad.at(l, j) += al * g.at(j);
        }
      }
    }));
  }
  check_shapes(false, "matmul", A, B);
  return {};
}

Var add(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  check_shapes(A.same_shape(B), "add", A, B);
  Tensor out = A;
  for (long i = 0; i < out.numel(); ++i) out.v[i] += B.v[i];
  return Var(record(std::move(out), {a.node(), b.node()}, [](Node& self) {
    for (int p = 0; p < 2; ++p) {
      const NodePtr& par = self.parents[p];
      if (!wants_grad(par)) continue;
      for (long i = 0; i < self.grad.numel(); ++i) par->grad.v[i] += self.grad.v[i];
    }
  }));
}

Var add_rowwise(const Var& m, const Var& v) {
  const Tensor& M = m.value();
  const Tensor& V = v.value();
  check_shapes(M.rank() == 2 && V.rank() == 1 && M.cols() == V.rows(), "add_rowwise", M, V);
  Tensor out = M;
  int r = M.rows(), c = M.cols();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at(i, j) += V.at(j);
  return Var(record(std::move(out), {m.node(), v.node()}, [r, c](Node& self) {
    const NodePtr& pm = self.parents[0];
    const NodePtr& pv = self.parents[1];
    if (wants_grad(pm))
      for (long i = 0; i < self.grad.numel(); ++i) pm->grad.v[i] += self.grad.v[i];
    if (wants_grad(pv))
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) pv->grad.at(j) += self.grad.at(i, j);
  }));
}

Var mul(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  check_shapes(A.same_shape(B), "mul", A, B);
  Tensor out = A;
  for (long i = 0; i < out.numel(); ++i) out.v[i] *= B.v[i];
  return Var(record(std::move(out), {a.node(), b.node()}, [](Node& self) {
    const NodePtr& pa = self.parents[0];
    const NodePtr& pb = self.parents[1];
    if (wants_grad(pa))
      for (long i = 0; i < self.grad.numel(); ++i) pa->grad.v[i] += self.grad.v[i] * pb->value.v[i];
    if (wants_grad(pb))
      for (long i = 0; i < self.grad.numel(); ++i) pb->grad.v[i] += self.grad.v[i] * pa->value.v[i];
  }));
}

Var scale(const Var& x, real k) { return affine(x, k, real(0)); }

Var affine(const Var& x, real a, real b) {
  Tensor out = x.value();
  for (long i = 0; i < out.numel(); ++i) out.v[i] = a * out.v[i] + b;
  return Var(record(std::move(out), {x.node()}, [a](Node& self) {
    const NodePtr& px = self.parents[0];
    if (!wants_grad(px)) return;
    for (long i = 0; i < self.grad.numel(); ++i) px->grad.v[i] += a * self.grad.v[i];
  }));
}

Var dot(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  check_shapes(A.rank() == 1 && B.rank() == 1 && A.rows() == B.rows(), "dot", A, B);
  real acc = 0;
  for (long i = 0; i < A.numel(); ++i) acc += A.v[i] * B.v[i];
  return Var(record(Tensor::scalar(acc), {a.node(), b.node()}, [](Node& self) {
    real g = self.grad.v[0];
    const NodePtr& pa = self.parents[0];
    const NodePtr& pb = self.parents[1];
    if (wants_grad(pa))
      for (long i = 0; i < pa->value.numel(); ++i) pa->grad.v[i] += g * pb->value.v[i];
    if (wants_grad(pb))
      for (long i = 0; i < pb->value.numel(); ++i) pb->grad.v[i] += g * pa->value.v[i];
  }));
}

Var concat(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat: empty input list");
  int total = 0;
  std::vector<NodePtr> parents;
  parents.reserve(xs.size());
  for (const auto& x : xs) {
    check_rank(x, 1, "concat");
    total += x.value().rows();
    parents.push_back(x.node());
  }
  Tensor out = Tensor::zeros({total});
  int off = 0;
  for (const auto& x : xs) {
    const Tensor& t = x.value();
    std::copy(t.v.begin(), t.v.end(), out.v.begin() + off);
    off += t.rows();
  }
  return Var(record(std::move(out), std::move(parents), [](Node& self) {
    int off = 0;
    for (const auto& p : self.parents) {
      int len = p->value.rows();
      if (wants_grad(p))
        for (int i = 0; i < len; ++i) p->grad.at(i) += self.grad.at(off + i);
      off += len;
    }
  }));
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: empty input list");
  check_rank(rows[0], 1, "stack_rows");
  int d = rows[0].value().rows();
  std::vector<NodePtr> parents;
  parents.reserve(rows.size());
  for (const auto& r : rows) {
    check_shapes(r.value().rank() == 1 && r.value().rows() == d, "stack_rows", rows[0].value(),
                 r.value());
    parents.push_back(r.node());
  }
  int n = static_cast<int>(rows.size());
  Tensor out = Tensor::zeros({n, d});
  for (int i = 0; i < n; ++i)
    std::copy(rows[i].value().v.begin(), rows[i].value().v.end(), out.v.begin() + i * d);
  return Var(record(std::move(out), std::move(parents), [d](Node& self) {
    for (size_t i = 0; i < self.parents.size(); ++i) {
      const NodePtr& p = self.parents[i];
      if (!wants_grad(p)) continue;
      for (int j = 0; j < d; ++j) p->grad.at(j) += self.grad.at(static_cast<int>(i), j);
    }
  }));
}

Var slice(const Var& x, int begin, int len) {
  check_rank(x, 1, "slice");
  const Tensor& X = x.value();
  if (begin < 0 || len < 0 || begin + len > X.rows())
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + "," +
                                std::to_string(begin + len) + ") out of bounds for shape " +
                                shape_str(X));
  Tensor out = Tensor::zeros({len});
  std::copy(X.v.begin() + begin, X.v.begin() + begin + len, out.v.begin());
  return Var(record(std::move(out), {x.node()}, [begin, len](Node& self) {
    const NodePtr& px = self.parents[0];
    if (!wants_grad(px)) return;
    for (int i = 0; i < len; ++i) px->grad.at(begin + i) += self.grad.at(i);
  }));
}

Var tanh(const Var& x) {
  Tensor out = x.value();
  for (long i = 0; i < out.numel(); ++i) out.v[i] = std::tanh(out.v[i]);
  return Var(record(std::move(out), {x.node()}, [](Node& self) {
    const NodePtr& px = self.parents[0];
    if (!wants_grad(px)) return;
    for (long i = 0; i < self.grad.numel(); ++i) {
      real y = self.value.v[i];
      px->grad.v[i] += self.grad.v[i] * (real(1) - y * y);
    }
  }));
}

Var sigmoid(const Var& x) {
  Tensor out = x.value();
  for (long i = 0; i < out.numel(); ++i) out.v[i] = real(1) / (real(1) + std::exp(-out.v[i]));
  return Var(record(std::move(out), {x.node()}, [](Node& self) {
    const NodePtr& px = self.parents[0];
    if (!wants_grad(px)) return;
    for (long i = 0; i < self.grad.numel(); ++i) {
      real y = self.value.v[i];
      px->grad.v[i] += self.grad.v[i] * y * (real(1) - y);
    }
  }));
}

Var exp(const Var& x) {
  Tensor out = x.value();
  for (long i = 0; i < out.numel(); ++i) out.v[i] = std::exp(out.v[i]);
  return Var(record(std::move(out), {x.node()}, [](Node& self) {
    const NodePtr& px = self.parents[0];
    if (!wants_grad(px)) return;
    for (long i = 0; i < self.grad.numel(); ++i) px->grad.v[i] += self.grad.v[i] * self.value.v[i];
  }));
}

Var log(const Var& x) {
  Tensor out = x.value();
  for (long i = 0; i < out.numel(); ++i) out.v[i] = std::log(out.v[i]);
  return Var(record(std::move(out), {x.node()}, [](Node& self) {
    const NodePtr& px = self.parents[0];
    if (!wants_grad(px)) return;
    for (long i = 0; i < self.grad.numel(); ++i)
      px->grad.v[i] += self.grad.v[i] / px->value.v[i];
  }));
}

Var square(const Var& x) {
  Tensor out = x.value();
  for (long i = 0; i < out.numel(); ++i) out.v[i] *= out.v[i];
  return Var(record(std::move(out), {x.node()}, [](Node& self) {
    const NodePtr& px = self.parents[0];
    if (!wants_grad(px)) return;
    for (long i = 0; i < self.grad.numel(); ++i)
      px->grad.v[i] += real(2) * px->value.v[i] * self.grad.v[i];
  }));
}

namespace {

// Max-subtracted softmax into `out`; returns nothing. Input rank-1.
void stable_softmax(const Tensor& x, Tensor& out) {
  real mx = *std::max_element(x.v.begin(), x.v.end());
  real z = 0;
  for (long i = 0; i < x.numel(); ++i) {
    out.v[i] = std::exp(x.v[i] - mx);
    z += out.v[i];
  }
  for (long i = 0; i < x.numel(); ++i) out.v[i] /= z;
}

}  // namespace

Var softmax(const Var& x) {
  check_rank(x, 1, "softmax");
  if (x.value().numel() == 0) throw std::invalid_argument("softmax: empty input");
  Tensor out = x.value();
  stable_softmax(x.value(), out);
  return Var(record(std::move(out), {x.node()}, [](Node& self) {
    const NodePtr& px = self.parents[0];
    if (!wants_grad(px)) return;
    real gy = 0;
    for (long i = 0; i < self.grad.numel(); ++i) gy += self.grad.v[i] * self.value.v[i];
    for (long i = 0; i < self.grad.numel(); ++i)
      px->grad.v[i] += self.value.v[i] * (self.grad.v[i] - gy);
  }));
}

Var log_softmax(const Var& x) {
  check_rank(x, 1, "log_softmax");
  if (x.value().numel() == 0) throw std::invalid_argument("log_softmax: empty input");
  const Tensor& X = x.value();
  Tensor out = X;
  real mx = *std::max_element(X.v.begin(), X.v.end());
  real z = 0;
  for (long i = 0; i < X.numel(); ++i) z += std::exp(X.v[i] - mx);
  real lz = mx + std::log(z);
  for (long i = 0; i < X.numel(); ++i) out.v[i] = X.v[i] - lz;
  return Var(record(std::move(out), {x.node()}, [](Node& self) {
    const NodePtr& px = self.parents[0];
    if (!wants_grad(px)) return;
    real gsum = 0;
    for (long i = 0; i < self.grad.numel(); ++i) gsum += self.grad.v[i];
    for (long i = 0; i < self.grad.numel(); ++i)
      px->grad.v[i] += self.grad.v[i] - std::exp(self.value.v[i]) * gsum;
  }));
}

Var lookup(const Var& table, int index) {
  const Tensor& T = table.value();
  check_rank(table, 2, "lookup");
  if (index < 0 || index >= T.rows())
    throw std::out_of_range("lookup: index " + std::to_string(index) + " out of range for table " +
                            shape_str(T));
  int d = T.cols();
  Tensor out = Tensor::zeros({d});
  std::copy(T.v.begin() + static_cast<long>(index) * d, T.v.begin() + static_cast<long>(index + 1) * d,
            out.v.begin());
  return Var(record(std::move(out), {table.node()}, [index, d](Node& self) {
    const NodePtr& pt = self.parents[0];
    if (!wants_grad(pt)) return;
    for (int j = 0; j < d; ++j) pt->grad.at(index, j) += self.grad.at(j);
  }));
}

Var sum(const Var& x) {
  real acc = 0;
  for (real e : x.value().v) acc += e;
  return Var(record(Tensor::scalar(acc), {x.node()}, [](Node& self) {
    const NodePtr& px = self.parents[0];
    if (!wants_grad(px)) return;
    real g = self.grad.v[0];
    for (long i = 0; i < px->value.numel(); ++i) px->grad.v[i] += g;
  }));
}

Var mean(const Var& x) {
  long n = x.value().numel();
  if (n == 0) throw std::invalid_argument("mean: empty input");
  real acc = 0;
  for (real e : x.value().v) acc += e;
  return Var(record(Tensor::scalar(acc / static_cast<real>(n)), {x.node()}, [n](Node& self) {
    const NodePtr& px = self.parents[0];
    if (!wants_grad(px)) return;
    real g = self.grad.v[0] / static_cast<real>(n);
    for (long i = 0; i < n; ++i) px->grad.v[i] += g;
  }));
}

Var pick(const Var& x, int index) {
  check_rank(x, 1, "pick");
  const Tensor& X = x.value();
  if (index < 0 || index >= X.rows())
    throw std::out_of_range("pick: index " + std::to_string(index) + " out of range for shape " +
                            shape_str(X));
  return Var(record(Tensor::scalar(X.at(index)), {x.node()}, [index](Node& self) {
    const NodePtr& px = self.parents[0];
    if (wants_grad(px)) px->grad.at(index) += self.grad.v[0];
  }));
}

Var pick_sum(const Var& x, const std::vector<int>& indices) {
  check_rank(x, 1, "pick_sum");
  if (indices.empty()) throw std::invalid_argument("pick_sum: empty index list");
  const Tensor& X = x.value();
  real acc = 0;
  for (int i : indices) {
    if (i < 0 || i >= X.rows())
      throw std::out_of_range("pick_sum: index " + std::to_string(i) + " out of range for shape " +
                              shape_str(X));
    acc += X.at(i);
  }
  return Var(record(Tensor::scalar(acc), {x.node()}, [indices](Node& self) {
    const NodePtr& px = self.parents[0];
    if (!wants_grad(px)) return;
    real g = self.grad.v[0];
    for (int i : indices) px->grad.at(i) += g;
  }));
}

Var stop_gradient(const Var& x) { return Var::constant(x.value()); }

// ---- gradient checking ----------------------------------------------------

FiniteDiffReport finite_diff_check(const std::function<Var()>& f,
                                   const std::vector<Parameter>& params, real epsilon,
                                   real tolerance) {
  if (!(epsilon > 0 && epsilon <= real(1e-2)))
    throw std::invalid_argument("finite_diff_check: epsilon must be in (0, 1e-2]");

  auto eval = [&]() -> real {
    NoGradScope no_grad;
    return f().item();
  };

  real v1 = eval();
  real v2 = eval();
  if (v1 != v2) throw std::runtime_error("finite_diff_check: f is not deterministic");

  zero_grad(params);
  std::vector<Tensor> analytic;
  {
    Tape tape;
    Var loss = f();
    tape.backward(loss);
  }
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p.grad());
  zero_grad(params);

  FiniteDiffReport report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& value = params[pi].value();
    real worst = 0;
    for (long i = 0; i < value.numel(); ++i) {
      real orig = value.v[i];
      value.v[i] = orig + epsilon;
      real fp = eval();
      value.v[i] = orig - epsilon;
      real fm = eval();
      value.v[i] = orig;
      real numeric = (fp - fm) / (2 * epsilon);
      real a = analytic[pi].v[i];
      // the guard keeps near-zero coordinates from amplifying central
      // difference round-off (about machine_eps*|f|/epsilon in absolute
      // terms) into spurious relative error; a real defect in a gradient
      // path shows up at the scale of the chain-rule terms, far above it
      real denom = std::max({std::fabs(a), std::fabs(numeric), real(1e-6)});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
    report.entries.push_back({params[pi].name, worst});
    report.max_rel_err = std::max(report.max_rel_err, worst);
  }
  report.passed = report.max_rel_err <= tolerance;
  return report;
}

}  // namespace sentcomp::ad
