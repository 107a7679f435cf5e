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

#ifndef MTMN_MEMORY_HPP_
#define MTMN_MEMORY_HPP_

#include "mtmn/autodiff.hpp"
#include "mtmn/gru.hpp"

namespace mtmn {

/// Token features of one category at one layer, before and after the feature
/// GRU sweep.
struct InteractionFeatures {
  Var pre_a;  // [2K x n] tanh of the stacked bilinear interactions, aspect channel
  Var pre_p;  // [2K x n] opinion channel
  Var a;      // [2K x n] after the aspect feature GRU
  Var p;      // [2K x n] after the opinion feature GRU
};

/// Couples every memory column with the category's prototype pair through the
/// four interaction tensors, then sweeps each channel with its feature GRU.
/// Column j of pre_a is tanh([h_j'Ga u_a : h_j'Da u_p]); the opinion channel
/// pairs Gp with u_a and Dp with u_p, so each channel sees both prototypes.
inline InteractionFeatures interact(const Var& memory, const Var& proto_a, const Var& proto_p,
                                    const Var& g_a, const Var& d_a, const Var& g_p, const Var& d_p,
                                    const GruParams& feat_gru_a, const GruParams& feat_gru_p) {
  InteractionFeatures out;
  out.pre_a = tanh(concat_rows(bilinear_cols(memory, g_a, proto_a),
                               bilinear_cols(memory, d_a, proto_p)));
  out.pre_p = tanh(concat_rows(bilinear_cols(memory, g_p, proto_a),
                               bilinear_cols(memory, d_p, proto_p)));
  out.a = gru_forward(out.pre_a, feat_gru_a);
  out.p = gru_forward(out.pre_p, feat_gru_p);
  return out;
}

struct Attention {
  Var scores;   // e [n]
  Var weights;  // softmax(e) [n]
};

/// Scores each token feature column against the channel's probe vector and
/// normalizes: e[j] = <v, r[:, j]>, weights = softmax(e).
inline Attention attend(const Var& features, const Var& v) {
  Attention out;
  out.scores = vecmat(v, features);
  out.weights = softmax(out.scores);
  return out;
}

/// Attention-weighted sum of the memory columns: o = sum_j weights[j] h_j.
inline Var summarize(const Var& memory, const Var& attention) {
  return matvec(memory, attention);
}

/// Next-layer prototype: u' = tanh(Q u) + o, where o is the (mixed) summary.
inline Var update_prototype(const Var& proto, const Var& summary, const Var& q) {
  return add(tanh(matvec(q, proto)), summary);
}

}  // namespace mtmn

#endif  // MTMN_MEMORY_HPP_
