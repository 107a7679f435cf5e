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

#ifndef MTMN_GRU_HPP_
#define MTMN_GRU_HPP_

#include <string>
#include <vector>

#include "mtmn/autodiff.hpp"

namespace mtmn {

/// Gate parameters of a unidirectional GRU. Input weights are stored
/// [hidden x input] so that matvec(w, x) yields the hidden-sized preactivation.
struct GruParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Var w_z, u_z, b_z;  // update gate
  Var w_r, u_r, b_r;  // reset gate
  Var w_h, u_h, b_h;  // candidate state
};

/// Registers the nine gate tensors under `prefix.*`. Weights are drawn
/// uniform [-0.1, 0.1], biases start at zero.
inline GruParams make_gru(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                          std::size_t hidden_dim, Rng& rng) {
  auto weight = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-0.1, 0.1);
    return store.add(prefix + "." + name, std::move(t));
  };
  auto bias = [&](const std::string& name) {
    return store.add(prefix + "." + name, Tensor::zeros({hidden_dim}));
  };
  GruParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.w_z = weight("Wz", hidden_dim, input_dim);
  p.u_z = weight("Uz", hidden_dim, hidden_dim);
  p.b_z = bias("bz");
  p.w_r = weight("Wr", hidden_dim, input_dim);
  p.u_r = weight("Ur", hidden_dim, hidden_dim);
  p.b_r = bias("br");
  p.w_h = weight("Wh", hidden_dim, input_dim);
  p.u_h = weight("Uh", hidden_dim, hidden_dim);
  p.b_h = bias("bh");
  return p;
}

/// Optional record of gate activations, for inspection and tests.
struct GruTrace {
  std::vector<Tensor> z;  // update gates per step
  std::vector<Tensor> r;  // reset gates per step
};

/// Runs the GRU left to right over the columns of x_cols ([input x n]) from a
/// zero initial state and returns the state matrix [hidden x n]:
///   z_t = sigmoid(Wz x_t + Uz h_{t-1} + bz)
///   r_t = sigmoid(Wr x_t + Ur h_{t-1} + br)
///   hc  = tanh(Wh x_t + Uh (r_t * h_{t-1}) + bh)
///   h_t = (1 - z_t) * h_{t-1} + z_t * hc
inline Var gru_forward(const Var& x_cols, const GruParams& p, GruTrace* trace = nullptr) {
  const Tensor& xv = x_cols->value;
  if (xv.rank() != 2 || xv.dim(0) != p.input_dim) {
    throw ShapeError("gru_forward: input " + shape_str(xv.shape()) + " does not match input dim " +
                     std::to_string(p.input_dim));
  }
  const std::size_t n = xv.dim(1);
  Var h = constant(Tensor::zeros({p.hidden_dim}));
  Var ones = constant(Tensor::full({p.hidden_dim}, 1.0));
  std::vector<Var> states;
  states.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    Var x = column(x_cols, t);
    Var z = sigmoid(add(add(matvec(p.w_z, x), matvec(p.u_z, h)), p.b_z));
    Var r = sigmoid(add(add(matvec(p.w_r, x), matvec(p.u_r, h)), p.b_r));
    Var hc = tanh(add(add(matvec(p.w_h, x), matvec(p.u_h, mul(r, h))), p.b_h));
    h = add(mul(sub(ones, z), h), mul(z, hc));
    states.push_back(h);
    if (trace) {
      trace->z.push_back(z->value);
      trace->r.push_back(r->value);
    }
  }
  return concat_cols(states);
}

}  // namespace mtmn

#endif  // MTMN_GRU_HPP_
