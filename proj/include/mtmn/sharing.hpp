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

#ifndef MTMN_SHARING_HPP_
#define MTMN_SHARING_HPP_

#include <string>
#include <vector>

#include "mtmn/autodiff.hpp"

namespace mtmn {

/// How the per-category interaction tensors are parameterized.
enum class TensorSharing {
  factored,      // each category combines m shared basis matrices
  independent,   // four full tensors per category
  single_shared  // one set of four tensors used by every category
};

inline const char* to_string(TensorSharing s) {
  switch (s) {
    case TensorSharing::factored: return "factored";
    case TensorSharing::independent: return "independent";
    case TensorSharing::single_shared: return "single-shared";
  }
  return "?";
}

inline TensorSharing tensor_sharing_from_string(const std::string& s) {
  if (s == "factored") return TensorSharing::factored;
  if (s == "independent") return TensorSharing::independent;
  if (s == "single-shared" || s == "single_shared") return TensorSharing::single_shared;
  throw ConfigError("unknown tensor_sharing value: " + s);
}

/// Ablation switches. Token-level prediction is always on; these gate the
/// three sharing/auxiliary components.
struct SharingConfig {
  TensorSharing tensor_sharing = TensorSharing::factored;
  bool feature_sharing = true;
  bool auxiliary_task = true;
};

/// Combines the m shared basis matrices with category c's factor row:
/// out = sum_i z[c, i] * basis[i, :, :], a [d x d] interaction matrix.
inline Var materialize_tensor(const Var& z, const Var& basis, std::size_t category) {
  const Tensor& zv = z->value;
  const Tensor& bv = basis->value;
  if (zv.rank() != 2 || bv.rank() != 3 || zv.dim(1) != bv.dim(0)) {
    throw ShapeError("materialize_tensor: incompatible shapes Z=" + shape_str(zv.shape()) +
                     " basis=" + shape_str(bv.shape()));
  }
  if (category >= zv.dim(0)) {
    throw ShapeError("materialize_tensor: category " + std::to_string(category) +
                     " out of range for Z=" + shape_str(zv.shape()));
  }
  const std::size_t m = bv.dim(0), rows = bv.dim(1), cols = bv.dim(2);
  const std::size_t stride = rows * cols;
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < m; ++i) {
    const double zi = zv.at2(category, i);
    if (zi == 0.0) continue;
    const double* slice = bv.data() + i * stride;
    for (std::size_t e = 0; e < stride; ++e) out[e] += zi * slice[e];
  }
  return make_node(std::move(out), {z, basis}, "materialize", [category, m, stride](Node& n) {
    const Tensor& zv = n.parents[0]->value;
    const Tensor& bv = n.parents[1]->value;
    Tensor& zg = n.parents[0]->grad;
    Tensor& bg = n.parents[1]->grad;
    const double* g = n.grad.data();
    for (std::size_t i = 0; i < m; ++i) {
      const double* slice = bv.data() + i * stride;
      double* gslice = bg.data() + i * stride;
      const double zi = zv.at2(category, i);
      double acc = 0.0;
      for (std::size_t e = 0; e < stride; ++e) {
        acc += g[e] * slice[e];
        gslice[e] += zi * g[e];
      }
      zg.at2(category, i) += acc;
    }
  });
}

/// Task similarity from the current prototypes. `prototypes` holds one
/// d-vector per category; the result row c is a distribution over source
/// tasks: S = row-softmax(U'U) with U the matrix of prototype columns.
inline Var task_similarity(const std::vector<Var>& prototypes) {
  Var u_rows = stack_rows(prototypes);  // [C x d], row c = u_c
  Var m = matmul(u_rows, transpose_of(u_rows));
  return softmax_rows(m);
}

/// Weighted sum of same-shaped tensors with weights taken from row
/// `category` of the similarity matrix: out = sum_c' S[category, c'] parts[c'].
inline Var mix_for_task(const Var& similarity, std::size_t category,
                        const std::vector<Var>& parts) {
  const Tensor& sv = similarity->value;
  if (sv.rank() != 2 || sv.dim(0) != sv.dim(1) || sv.dim(0) != parts.size()) {
    throw ShapeError("mix_for_task: similarity " + shape_str(sv.shape()) + " does not match " +
                     std::to_string(parts.size()) + " parts");
  }
  if (category >= parts.size()) throw ShapeError("mix_for_task: category out of range");
  const std::size_t c_count = parts.size();
  Tensor out(parts[0]->value.shape());
  for (std::size_t c = 0; c < c_count; ++c) {
    require_same_shape(parts[c]->value, out, "mix_for_task");
    const double w = sv.at2(category, c);
    const double* pv = parts[c]->value.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * pv[i];
  }
  std::vector<Var> deps;
  deps.reserve(c_count + 1);
  deps.push_back(similarity);
  for (const auto& p : parts) deps.push_back(p);
  return make_node(std::move(out), std::move(deps), "mix_for_task", [category, c_count](Node& n) {
    Tensor& sg = n.parents[0]->grad;
    const Tensor& sv = n.parents[0]->value;
    const double* g = n.grad.data();
    for (std::size_t c = 0; c < c_count; ++c) {
      const double* pv = n.parents[c + 1]->value.data();
      double* pg = n.parents[c + 1]->grad.data();
      const double w = sv.at2(category, c);
      double acc = 0.0;
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        acc += g[i] * pv[i];
        pg[i] += w * g[i];
      }
      sg.at2(category, c) += acc;
    }
  });
}

/// Blends every task's features with its related tasks' features. Works for
/// token features ([2K x n] each) and sentence summaries ([d] each) alike.
inline std::vector<Var> refine_features(const Var& similarity, const std::vector<Var>& per_task) {
  std::vector<Var> refined;
  refined.reserve(per_task.size());
  for (std::size_t c = 0; c < per_task.size(); ++c)
    refined.push_back(mix_for_task(similarity, c, per_task));
  return refined;
}

}  // namespace mtmn

#endif  // MTMN_SHARING_HPP_
