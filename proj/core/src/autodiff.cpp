#include "granorm/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "granorm/error.hpp"
#include "granorm/param_store.hpp"

namespace granorm {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::add_node(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::truncate(std::size_t count) {
  if (count < nodes_.size()) nodes_.resize(count);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return add_node(std::move(n));
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_;
  return add_node(std::move(n));
}

Var Tape::param(const ParamStore& store, std::size_t index) {
  Node n;
  n.external = &store.value(index);
  n.requires_grad = grad_enabled_;
  n.param_index = static_cast<long>(index);
  return add_node(std::move(n));
}

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external != nullptr ? *n.external : n.value;
}

Var Tape::push(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Tape::push(Tensor value, std::span<const Var> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const Var& p : parents) {
      if (&p.tape() != this) throw Error("autodiff: mixing variables from different tapes");
      if (nodes_[static_cast<std::size_t>(p.id())].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
    if (n.requires_grad) n.backward = std::move(fn);
  }
  return add_node(std::move(n));
}

Tensor* Tape::grad_acc(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return nullptr;
  if (!n.grad_ready) {
    n.grad = Tensor(value(id).shape());
    n.grad_ready = true;
  }
  return &n.grad;
}

void Tape::backward(Var loss) {
  if (&loss.tape() != this) throw Error("backward: loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_string(loss.value().shape()));
  }
  if (!grad_enabled_) throw Error("backward on a tape built without gradients");
  Tensor* seed = grad_acc(loss.id());
  if (seed == nullptr) return;
  (*seed)[0] = 1.0;
  for (int id = loss.id(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_ready || !n.backward) continue;
    n.backward(*this, id);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[static_cast<std::size_t>(v.id())];
  if (n.grad_ready) return n.grad;
  return Tensor(value(v.id()).shape());
}

std::vector<Tensor> Tape::param_grads(const ParamStore& store) const {
  std::vector<Tensor> out;
  out.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) out.emplace_back(store.value(i).shape());
  for (const Node& n : nodes_) {
    if (n.param_index < 0 || !n.grad_ready) continue;
    Tensor& g = out[static_cast<std::size_t>(n.param_index)];
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
  }
  return out;
}

namespace {

void require_same(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.value().shape()) + " vs " +
                     shape_string(b.value().shape()));
  }
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_string(a.value().shape()));
  }
}

// Unary elementwise op with derivative expressed through (input, output).
template <typename F, typename D>
Var unary(Var x, F f, D dfdx) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return x.tape().push(std::move(out), {x}, [x, dfdx](Tape& t, int self) {
    Tensor* gx = t.grad_acc(x.id());
    if (gx == nullptr) return;
    const Tensor& g = t.grad_ref(self);
    const Tensor& xv = t.value(x.id());
    const Tensor& yv = t.value(self);
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return a.tape().push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    for (Var p : {a, b}) {
      if (Tensor* gp = t.grad_acc(p.id())) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gp)[i] += g[i];
      }
    }
  });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape().push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    if (Tensor* ga = t.grad_acc(a.id())) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    }
    if (Tensor* gb = t.grad_acc(b.id())) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same(a, b, "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape().push(std::move(out), {a, b}, [a, b](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& av = t.value(a.id());
    const Tensor& bv = t.value(b.id());
    if (Tensor* ga = t.grad_acc(a.id())) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (Tensor* gb = t.grad_acc(b.id())) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= c;
  return a.tape().push(std::move(out), {a}, [a, c](Tape& t, int self) {
    if (Tensor* ga = t.grad_acc(a.id())) {
      const Tensor& g = t.grad_ref(self);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += c * g[i];
    }
  });
}

Var add_scalar(Var a, double c) {
  Tensor out = a.value();
  for (auto& v : out.data()) v += c;
  return a.tape().push(std::move(out), {a}, [a](Tape& t, int self) {
    if (Tensor* ga = t.grad_acc(a.id())) {
      const Tensor& g = t.grad_ref(self);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    }
  });
}

Var mul_scalar(Var s, Var v) {
  if (s.value().size() != 1) throw ShapeError("mul_scalar: first operand must hold one value");
  double sv = s.value()[0];
  Tensor out = v.value();
  for (auto& x : out.data()) x *= sv;
  return v.tape().push(std::move(out), {s, v}, [s, v](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& vv = t.value(v.id());
    if (Tensor* gs = t.grad_acc(s.id())) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * vv[i];
      (*gs)[0] += acc;
    }
    if (Tensor* gv = t.grad_acc(v.id())) {
      double sv = t.value(s.id())[0];
      for (std::size_t i = 0; i < g.size(); ++i) (*gv)[i] += sv * g[i];
    }
  });
}

namespace {

// Four independent partial sums, so the compiler can vectorize the loop.
double dot_kernel(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    s0 += a[j] * b[j];
    s1 += a[j + 1] * b[j + 1];
    s2 += a[j + 2] * b[j + 2];
    s3 += a[j + 3] * b[j + 3];
  }
  for (; j < n; ++j) s0 += a[j] * b[j];
  return (s0 + s1) + (s2 + s3);
}

}  // namespace

Var matvec(Var a, Var x) {
  require_rank(a, 2, "matvec");
  require_rank(x, 1, "matvec");
  const Tensor& av = a.value();
  const Tensor& xv = x.value();
  const std::size_t m = av.shape()[0], k = av.shape()[1];
  if (xv.size() != k) {
    throw ShapeError("matvec: shape mismatch " + shape_string(av.shape()) + " . " + shape_string(xv.shape()));
  }
  Tensor out(Tensor::Shape{m});
  const double* A = av.ptr();
  const double* X = xv.ptr();
  for (std::size_t i = 0; i < m; ++i) out[i] = dot_kernel(A + i * k, X, k);
  return a.tape().push(std::move(out), {a, x}, [a, x, m, k](Tape& t, int self) {
    const double* G = t.grad_ref(self).ptr();
    if (Tensor* ga = t.grad_acc(a.id())) {
      const double* X = t.value(x.id()).ptr();
      double* GA = ga->ptr();
      for (std::size_t i = 0; i < m; ++i) {
        double gi = G[i];
        if (gi == 0.0) continue;
        double* r = GA + i * k;
        for (std::size_t j = 0; j < k; ++j) r[j] += gi * X[j];
      }
    }
    if (Tensor* gx = t.grad_acc(x.id())) {
      const double* A = t.value(a.id()).ptr();
      double* GX = gx->ptr();
      for (std::size_t i = 0; i < m; ++i) {
        double gi = G[i];
        if (gi == 0.0) continue;
        const double* r = A + i * k;
        for (std::size_t j = 0; j < k; ++j) GX[j] += gi * r[j];
      }
    }
  });
}

Var vecmat(Var x, Var a) {
  require_rank(a, 2, "vecmat");
  require_rank(x, 1, "vecmat");
  const Tensor& av = a.value();
  const Tensor& xv = x.value();
  const std::size_t m = av.shape()[0], k = av.shape()[1];
  if (xv.size() != m) {
    throw ShapeError("vecmat: shape mismatch " + shape_string(xv.shape()) + " . " + shape_string(av.shape()));
  }
  Tensor out(Tensor::Shape{k});
  for (std::size_t i = 0; i < m; ++i) {
    double xi = xv[i];
    const double* r = av.ptr() + i * k;
    for (std::size_t j = 0; j < k; ++j) out[j] += xi * r[j];
  }
  return a.tape().push(std::move(out), {x, a}, [a, x, m, k](Tape& t, int self) {
    const double* G = t.grad_ref(self).ptr();
    if (Tensor* gx = t.grad_acc(x.id())) {
      const double* A = t.value(a.id()).ptr();
      for (std::size_t i = 0; i < m; ++i) {
        const double* r = A + i * k;
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += r[j] * G[j];
        (*gx)[i] += acc;
      }
    }
    if (Tensor* ga = t.grad_acc(a.id())) {
      const Tensor& xv = t.value(x.id());
      double* GA = ga->ptr();
      for (std::size_t i = 0; i < m; ++i) {
        double xi = xv[i];
        double* r = GA + i * k;
        for (std::size_t j = 0; j < k; ++j) r[j] += xi * G[j];
      }
    }
  });
}

Var matmul(Var a, Var b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
  if (bv.shape()[0] != k) {
    throw ShapeError("matmul: shape mismatch " + shape_string(av.shape()) + " . " + shape_string(bv.shape()));
  }
  Tensor out(Tensor::Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  return a.tape().push(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    const Tensor& av = t.value(a.id());
    const Tensor& bv = t.value(b.id());
    if (Tensor* ga = t.grad_acc(a.id())) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * bv[p * n + j];
          (*ga)[i * k + p] += acc;
        }
      }
    }
    if (Tensor* gb = t.grad_acc(b.id())) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double aip = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) (*gb)[p * n + j] += aip * g[i * n + j];
        }
      }
    }
  });
}

Var dot(Var a, Var b) {
  if (a.value().size() != b.value().size()) {
    throw ShapeError("dot: shape mismatch " + shape_string(a.value().shape()) + " vs " +
                     shape_string(b.value().shape()));
  }
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  return a.tape().push(Tensor::scalar(acc), {a, b}, [a, b](Tape& t, int self) {
    double g = t.grad_ref(self)[0];
    const Tensor& av = t.value(a.id());
    const Tensor& bv = t.value(b.id());
    if (Tensor* ga = t.grad_acc(a.id())) {
      for (std::size_t i = 0; i < av.size(); ++i) (*ga)[i] += g * bv[i];
    }
    if (Tensor* gb = t.grad_acc(b.id())) {
      for (std::size_t i = 0; i < bv.size(); ++i) (*gb)[i] += g * av[i];
    }
  });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::size_t n = 0;
  for (const Var& p : parts) n += p.value().size();
  Tensor out(Tensor::Shape{n});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.data().begin(), v.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += v.size();
  }
  std::vector<Var> keep(parts.begin(), parts.end());
  return parts[0].tape().push(std::move(out), parts, [keep](Tape& t, int self) {
    const Tensor& g = t.grad_ref(self);
    std::size_t off = 0;
    for (const Var& p : keep) {
      std::size_t n = t.value(p.id()).size();
      if (Tensor* gp = t.grad_acc(p.id())) {
        for (std::size_t i = 0; i < n; ++i) (*gp)[i] += g[off + i];
      }
      off += n;
    }
  });
}

Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no inputs");
  const std::size_t d = rows[0].value().size();
  for (const Var& r : rows) {
    if (r.value().size() != d) throw ShapeError("stack_rows: rows of unequal length");
  }
  Var flat = concat(rows);
  Tensor out(Tensor::Shape{rows.size(), d}, std::vector<double>(flat.value().data().begin(), flat.value().data().end()));
  return flat.tape().push(std::move(out), {flat}, [flat](Tape& t, int self) {
    if (Tensor* gf = t.grad_acc(flat.id())) {
      const Tensor& g = t.grad_ref(self);
      for (std::size_t i = 0; i < g.size(); ++i) (*gf)[i] += g[i];
    }
  });
}

Var row(Var table, std::size_t index) {
  require_rank(table, 2, "row");
  const Tensor& tv = table.value();
  const std::size_t n = tv.shape()[0], d = tv.shape()[1];
  if (index >= n) throw ShapeError("row: index " + std::to_string(index) + " out of range for " + shape_string(tv.shape()));
  Tensor out(Tensor::Shape{d});
  std::copy(tv.ptr() + index * d, tv.ptr() + (index + 1) * d, out.ptr());
  return table.tape().push(std::move(out), {table}, [table, index, d](Tape& t, int self) {
    if (Tensor* gt = t.grad_acc(table.id())) {
      const Tensor& g = t.grad_ref(self);
      double* r = gt->ptr() + index * d;
      for (std::size_t j = 0; j < d; ++j) r[j] += g[j];
    }
  });
}

Var slice(Var x, std::size_t offset, std::size_t length) {
  const Tensor& xv = x.value();
  if (offset + length > xv.size()) throw ShapeError("slice: range exceeds " + shape_string(xv.shape()));
  Tensor out(Tensor::Shape{length});
  std::copy(xv.ptr() + offset, xv.ptr() + offset + length, out.ptr());
  return x.tape().push(std::move(out), {x}, [x, offset](Tape& t, int self) {
    if (Tensor* gx = t.grad_acc(x.id())) {
      const Tensor& g = t.grad_ref(self);
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[offset + i] += g[i];
    }
  });
}

Var element(Var x, std::size_t index) {
  const Tensor& xv = x.value();
  if (index >= xv.size()) throw ShapeError("element: index out of range for " + shape_string(xv.shape()));
  return x.tape().push(Tensor::scalar(xv[index]), {x}, [x, index](Tape& t, int self) {
    if (Tensor* gx = t.grad_acc(x.id())) (*gx)[index] += t.grad_ref(self)[0];
  });
}

Var gather(Var x, std::span<const int> index) {
  const Tensor& xv = x.value();
  Tensor out(Tensor::Shape{index.size()});
  for (std::size_t j = 0; j < index.size(); ++j) {
    if (index[j] < 0) continue;
    if (static_cast<std::size_t>(index[j]) >= xv.size()) throw ShapeError("gather: index out of range");
    out[j] = xv[static_cast<std::size_t>(index[j])];
  }
  std::vector<int> idx(index.begin(), index.end());
  return x.tape().push(std::move(out), {x}, [x, idx = std::move(idx)](Tape& t, int self) {
    if (Tensor* gx = t.grad_acc(x.id())) {
      const Tensor& g = t.grad_ref(self);
      for (std::size_t j = 0; j < idx.size(); ++j) {
        if (idx[j] >= 0) (*gx)[static_cast<std::size_t>(idx[j])] += g[j];
      }
    }
  });
}

Var segment_sum(Var x, std::span<const int> group, std::size_t groups) {
  const Tensor& xv = x.value();
  if (group.size() != xv.size()) throw ShapeError("segment_sum: group map length mismatch");
  Tensor out(Tensor::Shape{groups});
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (group[i] < 0) continue;
    if (static_cast<std::size_t>(group[i]) >= groups) throw ShapeError("segment_sum: group out of range");
    out[static_cast<std::size_t>(group[i])] += xv[i];
  }
  std::vector<int> grp(group.begin(), group.end());
  return x.tape().push(std::move(out), {x}, [x, grp = std::move(grp)](Tape& t, int self) {
    if (Tensor* gx = t.grad_acc(x.id())) {
      const Tensor& g = t.grad_ref(self);
      for (std::size_t i = 0; i < grp.size(); ++i) {
        if (grp[i] >= 0) (*gx)[i] += g[static_cast<std::size_t>(grp[i])];
      }
    }
  });
}

Var tanh(Var x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

namespace {

std::size_t last_dim(const Tensor& t) {
  if (t.rank() == 0) return 1;
  return t.shape().back();
}

}  // namespace

Var softmax(Var x) {
  const Tensor& xv = x.value();
  const std::size_t d = last_dim(xv);
  if (d == 0) throw ShapeError("softmax: empty input");
  Tensor out(xv.shape());
  for (std::size_t r = 0; r * d < xv.size(); ++r) {
    const double* in = xv.ptr() + r * d;
    double* o = out.ptr() + r * d;
    double mx = *std::max_element(in, in + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < d; ++j) o[j] /= z;
  }
  return x.tape().push(std::move(out), {x}, [x, d](Tape& t, int self) {
    Tensor* gx = t.grad_acc(x.id());
    if (gx == nullptr) return;
    const Tensor& g = t.grad_ref(self);
    const Tensor& y = t.value(self);
    for (std::size_t r = 0; r * d < y.size(); ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += g[r * d + j] * y[r * d + j];
      for (std::size_t j = 0; j < d; ++j) (*gx)[r * d + j] += y[r * d + j] * (g[r * d + j] - s);
    }
  });
}

Var log_softmax(Var x) {
  const Tensor& xv = x.value();
  const std::size_t d = last_dim(xv);
  if (d == 0) throw ShapeError("log_softmax: empty input");
  Tensor out(xv.shape());
  for (std::size_t r = 0; r * d < xv.size(); ++r) {
    const double* in = xv.ptr() + r * d;
    double* o = out.ptr() + r * d;
    double mx = *std::max_element(in, in + d);
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += std::exp(in[j] - mx);
    double lz = mx + std::log(z);
    for (std::size_t j = 0; j < d; ++j) o[j] = in[j] - lz;
  }
  return x.tape().push(std::move(out), {x}, [x, d](Tape& t, int self) {
    Tensor* gx = t.grad_acc(x.id());
    if (gx == nullptr) return;
    const Tensor& g = t.grad_ref(self);
    const Tensor& y = t.value(self);
    for (std::size_t r = 0; r * d < y.size(); ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += g[r * d + j];
      for (std::size_t j = 0; j < d; ++j) (*gx)[r * d + j] += g[r * d + j] - std::exp(y[r * d + j]) * s;
    }
  });
}

Var max_with_constant(Var x, double c) {
  return unary(
      x, [c](double v) { return v > c ? v : c; }, [c](double v, double) { return v > c ? 1.0 : 0.0; });
}

Var sum(Var x) {
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  return x.tape().push(Tensor::scalar(acc), {x}, [x](Tape& t, int self) {
    if (Tensor* gx = t.grad_acc(x.id())) {
      double g = t.grad_ref(self)[0];
      for (auto& v : gx->data()) v += g;
    }
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean: empty input");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

}  // namespace granorm
