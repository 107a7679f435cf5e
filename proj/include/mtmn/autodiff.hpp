// Copyright 2026 The MTMN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MTMN_AUTODIFF_HPP_
#define MTMN_AUTODIFF_HPP_

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mtmn/rng.hpp"
#include "mtmn/tensor.hpp"

namespace mtmn {

/// One vertex of the dynamic computation graph. Values are immutable after
/// construction; only the gradient buffer is written during backward.
struct Node {
  Tensor value;
  Tensor grad;  // same shape, zero-initialized
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;  // reads grad, accumulates into parents
  const char* op = "leaf";

  explicit Node(Tensor v, const char* tag = "leaf")
      : value(std::move(v)), grad(Tensor::zeros(value.shape())), op(tag) {}

  bool is_leaf() const { return parents.empty(); }
};

using Var = std::shared_ptr<Node>;

inline Var constant(Tensor value) { return std::make_shared<Node>(std::move(value), "const"); }

inline Var make_node(Tensor value, std::vector<Var> parents, const char* op,
                     std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>(std::move(value), op);
  n->parents = std::move(parents);
  n->backward_fn = std::move(backward_fn);
  return n;
}

/// Named trainable leaf. The name fixes checkpoint identity.
struct Param {
  std::string name;
  Var node;
  bool trainable = true;

  Tensor& value() { return node->value; }
  const Tensor& value() const { return node->value; }
  Tensor& grad() { return node->grad; }
  const Tensor& grad() const { return node->grad; }
};

/// Registry of parameters in a stable registration order. Order defines both
/// initialization-draw order and checkpoint layout.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init, bool trainable = true) {
    if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
    Param p{name, std::make_shared<Node>(std::move(init), "param"), trainable};
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return params_.back().node;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Param& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return params_[it->second];
  }
  const Param& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return params_[it->second];
  }

  std::vector<Param>& all() { return params_; }
  const std::vector<Param>& all() const { return params_; }
  std::size_t count() const { return params_.size(); }

  std::size_t scalar_count(bool trainable_only = false) const {
    std::size_t n = 0;
    for (const auto& p : params_)
      if (!trainable_only || p.trainable) n += p.value().size();
    return n;
  }

  void zero_grads() {
    for (auto& p : params_) p.grad().fill(0.0);
  }

 private:
  std::vector<Param> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<Node*> topo_order(Node* root) {
  std::vector<Node*> order;
  std::unordered_set<Node*> done;
  // Iterative DFS: graphs can be tens of thousands of nodes deep-ish.
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (!done.count(parent)) stack.emplace_back(parent, 0);
    } else {
      if (done.insert(node).second) order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children
}

}  // namespace detail

/// Reverse-mode accumulation from a scalar loss. Interior gradients are reset
/// per call; leaf gradients accumulate, so two calls without zeroing double
/// every parameter gradient.
inline void backward(const Var& loss) {
  if (loss->value.size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + shape_str(loss->value.shape()));
  }
  std::vector<Node*> order = detail::topo_order(loss.get());
  for (Node* n : order)
    if (!n->is_leaf()) n->grad.fill(0.0);
  loss->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------------------
// Elementwise and shape ops
// ---------------------------------------------------------------------------

inline Var add(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "add");
  Tensor out = a->value;
  const double* bv = b->value.data();
  double* ov = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) ov[i] += bv[i];
  return make_node(std::move(out), {a, b}, "add", [](Node& n) {
    for (int k = 0; k < 2; ++k) {
      double* pg = n.parents[k]->grad.data();
      const double* g = n.grad.data();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pg[i] += g[i];
    }
  });
}

inline Var add_many(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("add_many: empty input");
  Tensor out = parts[0]->value;
  for (std::size_t k = 1; k < parts.size(); ++k) {
    require_same_shape(out, parts[k]->value, "add_many");
    const double* v = parts[k]->value.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  return make_node(std::move(out), parts, "add_many", [](Node& n) {
    const double* g = n.grad.data();
    for (auto& p : n.parents) {
      double* pg = p->grad.data();
      for (std::size_t i = 0; i < n.grad.size(); ++i) pg[i] += g[i];
    }
  });
}

inline Var sub(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "sub");
  Tensor out = a->value;
  const double* bv = b->value.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_node(std::move(out), {a, b}, "sub", [](Node& n) {
    double* ag = n.parents[0]->grad.data();
    double* bg = n.parents[1]->grad.data();
    const double* g = n.grad.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      ag[i] += g[i];
      bg[i] -= g[i];
    }
  });
}

inline Var mul(const Var& a, const Var& b) {
  require_same_shape(a->value, b->value, "mul");
  Tensor out = a->value;
  const double* bv = b->value.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_node(std::move(out), {a, b}, "mul", [](Node& n) {
    double* ag = n.parents[0]->grad.data();
    double* bg = n.parents[1]->grad.data();
    const double* av = n.parents[0]->value.data();
    const double* bv = n.parents[1]->value.data();
    const double* g = n.grad.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      ag[i] += g[i] * bv[i];
      bg[i] += g[i] * av[i];
    }
  });
}

inline Var scale(const Var& a, double c) {
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return make_node(std::move(out), {a}, "scale", [c](Node& n) {
    double* pg = n.parents[0]->grad.data();
    const double* g = n.grad.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) pg[i] += c * g[i];
  });
}

inline Var tanh(const Var& a) {
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return make_node(std::move(out), {a}, "tanh", [](Node& n) {
    double* pg = n.parents[0]->grad.data();
    const double* y = n.value.data();
    const double* g = n.grad.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) pg[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

inline Var sigmoid(const Var& a) {
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  return make_node(std::move(out), {a}, "sigmoid", [](Node& n) {
    double* pg = n.parents[0]->grad.data();
    const double* y = n.value.data();
    const double* g = n.grad.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) pg[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

/// Concatenation of two rank-1 vectors.
inline Var concat(const Var& a, const Var& b) {
  if (a->value.rank() != 1 || b->value.rank() != 1) {
    throw ShapeError("concat: expects vectors, got " + shape_str(a->value.shape()) +
                     " and " + shape_str(b->value.shape()));
  }
  const std::size_t na = a->value.size(), nb = b->value.size();
  Tensor out({na + nb});
  for (std::size_t i = 0; i < na; ++i) out[i] = a->value[i];
  for (std::size_t i = 0; i < nb; ++i) out[na + i] = b->value[i];
  return make_node(std::move(out), {a, b}, "concat", [na, nb](Node& n) {
    double* ag = n.parents[0]->grad.data();
    double* bg = n.parents[1]->grad.data();
    const double* g = n.grad.data();
    for (std::size_t i = 0; i < na; ++i) ag[i] += g[i];
    for (std::size_t i = 0; i < nb; ++i) bg[i] += g[na + i];
  });
}

/// Stack [p x n] on top of [q x n] giving [(p+q) x n].
inline Var concat_rows(const Var& a, const Var& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1)) {
    throw ShapeError("concat_rows: incompatible shapes " + shape_str(av.shape()) +
                     " and " + shape_str(bv.shape()));
  }
  const std::size_t p = av.dim(0), q = bv.dim(0), n = av.dim(1);
  Tensor out({p + q, n});
  for (std::size_t i = 0; i < p * n; ++i) out[i] = av[i];
  for (std::size_t i = 0; i < q * n; ++i) out[p * n + i] = bv[i];
  return make_node(std::move(out), {a, b}, "concat_rows", [p, q, n](Node& node) {
    double* ag = node.parents[0]->grad.data();
    double* bg = node.parents[1]->grad.data();
    const double* g = node.grad.data();
    for (std::size_t i = 0; i < p * n; ++i) ag[i] += g[i];
    for (std::size_t i = 0; i < q * n; ++i) bg[i] += g[p * n + i];
  });
}

/// Assemble column vectors into a [d x n] matrix.
inline Var concat_cols(const std::vector<Var>& cols) {
  if (cols.empty()) throw ContractError("concat_cols: empty input");
  const std::size_t d = cols[0]->value.size();
  const std::size_t n = cols.size();
  Tensor out({d, n});
  for (std::size_t j = 0; j < n; ++j) {
    if (cols[j]->value.rank() != 1 || cols[j]->value.size() != d) {
      throw ShapeError("concat_cols: column " + std::to_string(j) + " has shape " +
                       shape_str(cols[j]->value.shape()));
    }
    for (std::size_t i = 0; i < d; ++i) out.at2(i, j) = cols[j]->value[i];
  }
  return make_node(std::move(out), cols, "concat_cols", [d, n](Node& node) {
    for (std::size_t j = 0; j < n; ++j) {
      double* cg = node.parents[j]->grad.data();
      for (std::size_t i = 0; i < d; ++i) cg[i] += node.grad.at2(i, j);
    }
  });
}

/// Stack row vectors into a [c x d] matrix.
inline Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ContractError("stack_rows: empty input");
  const std::size_t d = rows[0]->value.size();
  const std::size_t c = rows.size();
  Tensor out({c, d});
  for (std::size_t i = 0; i < c; ++i) {
    if (rows[i]->value.rank() != 1 || rows[i]->value.size() != d) {
      throw ShapeError("stack_rows: row " + std::to_string(i) + " has shape " +
                       shape_str(rows[i]->value.shape()));
    }
    for (std::size_t j = 0; j < d; ++j) out.at2(i, j) = rows[i]->value[j];
  }
  return make_node(std::move(out), rows, "stack_rows", [c, d](Node& node) {
    for (std::size_t i = 0; i < c; ++i) {
      double* rg = node.parents[i]->grad.data();
      for (std::size_t j = 0; j < d; ++j) rg[j] += node.grad.at2(i, j);
    }
  });
}

/// Stack [d x d] matrices into a [k x d x d] tensor.
inline Var stack_slices(const std::vector<Var>& slices) {
  if (slices.empty()) throw ContractError("stack_slices: empty input");
  const Shape& s0 = slices[0]->value.shape();
  if (s0.size() != 2) throw ShapeError("stack_slices: expects matrices");
  const std::size_t rows = s0[0], cols = s0[1], k = slices.size();
  Tensor out({k, rows, cols});
  const std::size_t stride = rows * cols;
  for (std::size_t s = 0; s < k; ++s) {
    require_same_shape(slices[s]->value, slices[0]->value, "stack_slices");
    for (std::size_t i = 0; i < stride; ++i) out[s * stride + i] = slices[s]->value[i];
  }
  return make_node(std::move(out), slices, "stack_slices", [k, stride](Node& node) {
    const double* g = node.grad.data();
    for (std::size_t s = 0; s < k; ++s) {
      double* sg = node.parents[s]->grad.data();
      for (std::size_t i = 0; i < stride; ++i) sg[i] += g[s * stride + i];
    }
  });
}

inline Var column(const Var& m, std::size_t j) {
  const Tensor& mv = m->value;
  if (mv.rank() != 2 || j >= mv.dim(1)) {
    throw ShapeError("column: index " + std::to_string(j) + " out of " + shape_str(mv.shape()));
  }
  const std::size_t d = mv.dim(0), n = mv.dim(1);
  Tensor out({d});
  for (std::size_t i = 0; i < d; ++i) out[i] = mv.at2(i, j);
  return make_node(std::move(out), {m}, "column", [d, n, j](Node& node) {
    double* mg = node.parents[0]->grad.data();
    for (std::size_t i = 0; i < d; ++i) mg[i * n + j] += node.grad[i];
  });
}

inline Var row(const Var& m, std::size_t i) {
  const Tensor& mv = m->value;
  if (mv.rank() != 2 || i >= mv.dim(0)) {
    throw ShapeError("row: index " + std::to_string(i) + " out of " + shape_str(mv.shape()));
  }
  const std::size_t n = mv.dim(1);
  Tensor out({n});
  for (std::size_t j = 0; j < n; ++j) out[j] = mv.at2(i, j);
  return make_node(std::move(out), {m}, "row", [n, i](Node& node) {
    double* mg = node.parents[0]->grad.data();
    for (std::size_t j = 0; j < n; ++j) mg[i * n + j] += node.grad[j];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

inline Var transpose_of(const Var& a) {
  const Tensor& av = a->value;
  if (av.rank() != 2) throw ShapeError("transpose: expects a matrix, got " + shape_str(av.shape()));
  const std::size_t p = av.dim(0), q = av.dim(1);
  Tensor out({q, p});
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < q; ++j) out.at2(j, i) = av.at2(i, j);
  return make_node(std::move(out), {a}, "transpose", [p, q](Node& n) {
    Tensor& ag = n.parents[0]->grad;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < q; ++j) ag.at2(i, j) += n.grad.at2(j, i);
  });
}

inline Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a->value;
  const Tensor& bv = b->value;
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(av.shape()) + " and " +
                     shape_str(bv.shape()));
  }
  const std::size_t p = av.dim(0), q = av.dim(1), r = bv.dim(1);
  Tensor out({p, r});
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < q; ++k) {
      const double aik = av.at2(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < r; ++j) out.at2(i, j) += aik * bv.at2(k, j);
    }
  return make_node(std::move(out), {a, b}, "matmul", [p, q, r](Node& n) {
    const Tensor& av = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    Tensor& ag = n.parents[0]->grad;
    Tensor& bg = n.parents[1]->grad;
    const Tensor& g = n.grad;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < r; ++j) {
        const double gij = g.at2(i, j);
        if (gij == 0.0) continue;
        for (std::size_t k = 0; k < q; ++k) {
          ag.at2(i, k) += gij * bv.at2(k, j);
          bg.at2(k, j) += gij * av.at2(i, k);
        }
      }
  });
}

/// [p x q] times [q] -> [p].
inline Var matvec(const Var& a, const Var& x) {
  const Tensor& av = a->value;
  const Tensor& xv = x->value;
  if (av.rank() != 2 || xv.rank() != 1 || av.dim(1) != xv.size()) {
    throw ShapeError("matvec: incompatible shapes " + shape_str(av.shape()) + " and " +
                     shape_str(xv.shape()));
  }
  const std::size_t p = av.dim(0), q = av.dim(1);
  Tensor out({p});
  for (std::size_t i = 0; i < p; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < q; ++k) acc += av.at2(i, k) * xv[k];
    out[i] = acc;
  }
  return make_node(std::move(out), {a, x}, "matvec", [p, q](Node& n) {
    const Tensor& av = n.parents[0]->value;
    const Tensor& xv = n.parents[1]->value;
    Tensor& ag = n.parents[0]->grad;
    Tensor& xg = n.parents[1]->grad;
    for (std::size_t i = 0; i < p; ++i) {
      const double gi = n.grad[i];
      if (gi == 0.0) continue;
      for (std::size_t k = 0; k < q; ++k) {
        ag.at2(i, k) += gi * xv[k];
        xg[k] += gi * av.at2(i, k);
      }
    }
  });
}

/// [p] against [p x n] -> [n], i.e. the row vector v'A.
inline Var vecmat(const Var& v, const Var& a) {
  const Tensor& vv = v->value;
  const Tensor& av = a->value;
  if (vv.rank() != 1 || av.rank() != 2 || vv.size() != av.dim(0)) {
    throw ShapeError("vecmat: incompatible shapes " + shape_str(vv.shape()) + " and " +
                     shape_str(av.shape()));
  }
  const std::size_t p = av.dim(0), n = av.dim(1);
  Tensor out({n});
  for (std::size_t i = 0; i < p; ++i) {
    const double vi = vv[i];
    if (vi == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) out[j] += vi * av.at2(i, j);
  }
  return make_node(std::move(out), {v, a}, "vecmat", [p, n](Node& node) {
    const Tensor& vv = node.parents[0]->value;
    const Tensor& av = node.parents[1]->value;
    Tensor& vg = node.parents[0]->grad;
    Tensor& ag = node.parents[1]->grad;
    for (std::size_t i = 0; i < p; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double gj = node.grad[j];
        acc += gj * av.at2(i, j);
        ag.at2(i, j) += vv[i] * gj;
      }
      vg[i] += acc;
    }
  });
}

/// out[k] = h' T[k] u for a stack of K bilinear interaction matrices.
inline Var bilinear(const Var& h, const Var& t, const Var& u) {
  const Tensor& hv = h->value;
  const Tensor& tv = t->value;
  const Tensor& uv = u->value;
  if (hv.rank() != 1 || uv.rank() != 1 || tv.rank() != 3 || tv.dim(1) != hv.size() ||
      tv.dim(2) != uv.size()) {
    throw ShapeError("bilinear: incompatible shapes h=" + shape_str(hv.shape()) +
                     " T=" + shape_str(tv.shape()) + " u=" + shape_str(uv.shape()));
  }
  const std::size_t K = tv.dim(0), d = tv.dim(1), e = tv.dim(2);
  Tensor out({K});
  for (std::size_t k = 0; k < K; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double hi = hv[i];
      if (hi == 0.0) continue;
      double inner = 0.0;
      for (std::size_t j = 0; j < e; ++j) inner += tv.at3(k, i, j) * uv[j];
      acc += hi * inner;
    }
    out[k] = acc;
  }
  return make_node(std::move(out), {h, t, u}, "bilinear", [K, d, e](Node& n) {
    const Tensor& hv = n.parents[0]->value;
    const Tensor& tv = n.parents[1]->value;
    const Tensor& uv = n.parents[2]->value;
    Tensor& hg = n.parents[0]->grad;
    Tensor& tg = n.parents[1]->grad;
    Tensor& ug = n.parents[2]->grad;
    for (std::size_t k = 0; k < K; ++k) {
      const double gk = n.grad[k];
      if (gk == 0.0) continue;
      for (std::size_t i = 0; i < d; ++i) {
        double row_u = 0.0;
        for (std::size_t j = 0; j < e; ++j) {
          row_u += tv.at3(k, i, j) * uv[j];
          tg.at3(k, i, j) += gk * hv[i] * uv[j];
          ug[j] += gk * hv[i] * tv.at3(k, i, j);
        }
        hg[i] += gk * row_u;
      }
    }
  });
}

/// Batched bilinear over the columns of H: out[k, j] = h_j' T[k] u.
/// Same math as bilinear() per column, one node for the whole sentence.
inline Var bilinear_cols(const Var& h_cols, const Var& t, const Var& u) {
  const Tensor& hv = h_cols->value;
  const Tensor& tv = t->value;
  const Tensor& uv = u->value;
  if (hv.rank() != 2 || uv.rank() != 1 || tv.rank() != 3 || tv.dim(1) != hv.dim(0) ||
      tv.dim(2) != uv.size()) {
    throw ShapeError("bilinear_cols: incompatible shapes H=" + shape_str(hv.shape()) +
                     " T=" + shape_str(tv.shape()) + " u=" + shape_str(uv.shape()));
  }
  const std::size_t K = tv.dim(0), d = tv.dim(1), e = tv.dim(2), n = hv.dim(1);
  // w[k,:] = T[k] u, reused by the backward pass.
  auto w = std::make_shared<Tensor>(Shape{K, d});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < e; ++j) acc += tv.at3(k, i, j) * uv[j];
      w->at2(k, i) = acc;
    }
  Tensor out({K, n});
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += hv.at2(i, j) * w->at2(k, i);
      out.at2(k, j) = acc;
    }
  return make_node(std::move(out), {h_cols, t, u}, "bilinear_cols", [K, d, e, n, w](Node& node) {
    const Tensor& hv = node.parents[0]->value;
    const Tensor& tv = node.parents[1]->value;
    const Tensor& uv = node.parents[2]->value;
    Tensor& hg = node.parents[0]->grad;
    Tensor& tg = node.parents[1]->grad;
    Tensor& ug = node.parents[2]->grad;
    const Tensor& g = node.grad;
    // a[k,i] = sum_j g[k,j] H[i,j]
    Tensor a({K, d});
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t j = 0; j < n; ++j) {
        const double gkj = g.at2(k, j);
        if (gkj == 0.0) continue;
        for (std::size_t i = 0; i < d; ++i) {
          a.at2(k, i) += gkj * hv.at2(i, j);
          hg.at2(i, j) += gkj * w->at2(k, i);
        }
      }
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < d; ++i) {
        const double aki = a.at2(k, i);
        if (aki == 0.0) continue;
        for (std::size_t j = 0; j < e; ++j) {
          tg.at3(k, i, j) += aki * uv[j];
          ug[j] += aki * tv.at3(k, i, j);
        }
      }
  });
}

// ---------------------------------------------------------------------------
// Softmax family
// ---------------------------------------------------------------------------

namespace detail {

inline void softmax_span(const double* x, double* y, std::size_t n, std::size_t stride) {
  double mx = x[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i * stride]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i * stride] = std::exp(x[i * stride] - mx);
    sum += y[i * stride];
  }
  for (std::size_t i = 0; i < n; ++i) y[i * stride] /= sum;
}

inline void softmax_span_backward(const double* y, const double* g, double* xg, std::size_t n,
                                  std::size_t stride) {
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += g[i * stride] * y[i * stride];
  for (std::size_t i = 0; i < n; ++i)
    xg[i * stride] += y[i * stride] * (g[i * stride] - dot);
}

}  // namespace detail

/// Max-shifted softmax over a vector.
inline Var softmax(const Var& x) {
  const Tensor& xv = x->value;
  if (xv.rank() != 1 || xv.size() == 0) {
    throw ContractError("softmax: requires a non-empty vector, got " + shape_str(xv.shape()));
  }
  Tensor out({xv.size()});
  detail::softmax_span(xv.data(), out.data(), xv.size(), 1);
  return make_node(std::move(out), {x}, "softmax", [](Node& n) {
    detail::softmax_span_backward(n.value.data(), n.grad.data(), n.parents[0]->grad.data(),
                                  n.value.size(), 1);
  });
}

/// Independent softmax over each row of a matrix.
inline Var softmax_rows(const Var& m) {
  const Tensor& mv = m->value;
  if (mv.rank() != 2 || mv.dim(1) == 0) {
    throw ContractError("softmax_rows: requires a matrix, got " + shape_str(mv.shape()));
  }
  const std::size_t rows = mv.dim(0), cols = mv.dim(1);
  Tensor out(mv.shape());
  for (std::size_t i = 0; i < rows; ++i)
    detail::softmax_span(mv.data() + i * cols, out.data() + i * cols, cols, 1);
  return make_node(std::move(out), {m}, "softmax_rows", [rows, cols](Node& n) {
    for (std::size_t i = 0; i < rows; ++i)
      detail::softmax_span_backward(n.value.data() + i * cols, n.grad.data() + i * cols,
                                    n.parents[0]->grad.data() + i * cols, cols, 1);
  });
}

/// Independent softmax over each column of a matrix.
inline Var softmax_cols(const Var& m) {
  const Tensor& mv = m->value;
  if (mv.rank() != 2 || mv.dim(0) == 0) {
    throw ContractError("softmax_cols: requires a matrix, got " + shape_str(mv.shape()));
  }
  const std::size_t rows = mv.dim(0), cols = mv.dim(1);
  Tensor out(mv.shape());
  for (std::size_t j = 0; j < cols; ++j)
    detail::softmax_span(mv.data() + j, out.data() + j, rows, cols);
  return make_node(std::move(out), {m}, "softmax_cols", [rows, cols](Node& n) {
    for (std::size_t j = 0; j < cols; ++j)
      detail::softmax_span_backward(n.value.data() + j, n.grad.data() + j,
                                    n.parents[0]->grad.data() + j, rows, cols);
  });
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

constexpr double kLogClamp = 1e-12;

namespace detail {

inline std::size_t onehot_index(const Tensor& target, const char* op) {
  std::size_t hot = target.size();
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 1.0 && hot == target.size()) {
      hot = i;
    } else if (target[i] != 0.0) {
      hot = target.size();
      break;
    }
  }
  if (hot == target.size()) throw ContractError(std::string(op) + ": target is not one-hot");
  return hot;
}

inline void check_probability(const Tensor& p, const char* op) {
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < -1e-12) throw ContractError(std::string(op) + ": negative probability entry");
    sum += p[i];
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw ContractError(std::string(op) + ": probabilities sum to " + std::to_string(sum));
}

}  // namespace detail

/// -log p[true index], with p clamped below at 1e-12 before the log.
inline Var cross_entropy(const Var& p, const Tensor& onehot) {
  require_same_shape(p->value, onehot, "cross_entropy");
  detail::check_probability(p->value, "cross_entropy");
  const std::size_t hot = detail::onehot_index(onehot, "cross_entropy");
  const double ph = std::max(p->value[hot], kLogClamp);
  Tensor out = Tensor::scalar(-std::log(ph));
  return make_node(std::move(out), {p}, "cross_entropy", [hot](Node& n) {
    const double ph = n.parents[0]->value[hot];
    if (ph >= kLogClamp) n.parents[0]->grad[hot] += -n.grad[0] / ph;
    // Below the clamp the loss is flat, so nothing flows.
  });
}

/// Column-wise cross entropy summed over all columns: each column of p is a
/// distribution, each column of targets a one-hot vector.
inline Var cross_entropy_cols(const Var& p, const Tensor& targets) {
  require_same_shape(p->value, targets, "cross_entropy_cols");
  const std::size_t rows = targets.dim(0), cols = targets.dim(1);
  auto hot = std::make_shared<std::vector<std::size_t>>(cols);
  double total = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    std::size_t h = rows;
    for (std::size_t i = 0; i < rows; ++i) {
      if (targets.at2(i, j) == 1.0 && h == rows) {
        h = i;
      } else if (targets.at2(i, j) != 0.0) {
        h = rows;
        break;
      }
    }
    if (h == rows)
      throw ContractError("cross_entropy_cols: column " + std::to_string(j) + " is not one-hot");
    (*hot)[j] = h;
    total += -std::log(std::max(p->value.at2(h, j), kLogClamp));
  }
  return make_node(Tensor::scalar(total), {p}, "cross_entropy_cols", [hot, cols](Node& n) {
    Tensor& pg = n.parents[0]->grad;
    const Tensor& pv = n.parents[0]->value;
    const double g = n.grad[0];
    for (std::size_t j = 0; j < cols; ++j) {
      const double ph = pv.at2((*hot)[j], j);
      if (ph >= kLogClamp) pg.at2((*hot)[j], j) += -g / ph;
    }
  });
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// Inverted dropout: kept units are scaled by 1/(1-rate) at train time so the
/// expected activation is unchanged; the mask is drawn once at node build.
inline Var dropout(const Var& x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<Tensor>(x->value.shape());
  Tensor out = x->value;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = rng.bernoulli(rate) ? 0.0 : keep_scale;
    (*mask)[i] = m;
    out[i] *= m;
  }
  return make_node(std::move(out), {x}, "dropout", [mask](Node& n) {
    double* pg = n.parents[0]->grad.data();
    const double* g = n.grad.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) pg[i] += g[i] * (*mask)[i];
  });
}

// ---------------------------------------------------------------------------
// Row gather for a trainable embedding matrix
// ---------------------------------------------------------------------------

/// out[:, j] = table[rows[j], :], as a [dim x n] matrix. A sentinel row index
/// of SIZE_MAX yields a zero column that never receives gradient.
inline Var embed_rows(const Var& table, std::vector<std::size_t> rows) {
  const Tensor& tv = table->value;
  if (tv.rank() != 2) throw ShapeError("embed_rows: table must be [vocab x dim]");
  const std::size_t dim = tv.dim(1), n = rows.size();
  if (n == 0) throw ContractError("embed_rows: empty index list");
  Tensor out({dim, n});
  for (std::size_t j = 0; j < n; ++j) {
    if (rows[j] == static_cast<std::size_t>(-1)) continue;
    if (rows[j] >= tv.dim(0)) throw ShapeError("embed_rows: row index out of range");
    for (std::size_t i = 0; i < dim; ++i) out.at2(i, j) = tv.at2(rows[j], i);
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(std::move(rows));
  return make_node(std::move(out), {table}, "embed_rows", [idx, dim, n](Node& node) {
    Tensor& tg = node.parents[0]->grad;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t r = (*idx)[j];
      if (r == static_cast<std::size_t>(-1)) continue;
      for (std::size_t i = 0; i < dim; ++i) tg.at2(r, i) += node.grad.at2(i, j);
    }
  });
}

}  // namespace mtmn

#endif  // MTMN_AUTODIFF_HPP_
