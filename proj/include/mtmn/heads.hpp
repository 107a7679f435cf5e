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

#ifndef MTMN_HEADS_HPP_
#define MTMN_HEADS_HPP_

#include <utility>
#include <vector>

#include "mtmn/autodiff.hpp"

namespace mtmn {

/// Per-token label distributions for one channel: column j of the result is
/// softmax(W r[:, j]) over (B, I, O). W is [3 x 2K].
inline Var predict_token_labels(const Var& features, const Var& w) {
  return softmax_cols(matmul(w, features));
}

/// Sum of per-column cross entropies over every (category, channel) pair.
/// `predictions` and `targets` are indexed identically.
inline Var token_loss(const std::vector<Var>& predictions, const std::vector<Tensor>& targets) {
  if (predictions.size() != targets.size() || predictions.empty())
    throw ContractError("token_loss: prediction/target channel sets differ");
  std::vector<Var> parts;
  parts.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i)
    parts.push_back(cross_entropy_cols(predictions[i], targets[i]));
  return add_many(parts);
}

/// Sentence-level (absent, present) distribution for one category:
/// softmax(W_c [o_a : o_p]) with W_c [2 x 2d].
inline Var predict_sentence(const Var& summary_a, const Var& summary_p, const Var& w) {
  return softmax(matvec(w, concat(summary_a, summary_p)));
}

/// Sum of cross entropies over the per-category sentence distributions.
inline Var sentence_loss(const std::vector<Var>& predictions, const std::vector<Tensor>& targets) {
  if (predictions.size() != targets.size() || predictions.empty())
    throw ContractError("sentence_loss: prediction/target sets differ");
  std::vector<Var> parts;
  parts.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i)
    parts.push_back(cross_entropy(predictions[i], targets[i]));
  return add_many(parts);
}

/// Scalar summary of one sentence's objective.
struct LossReport {
  double token = 0.0;     // summed token-level cross entropy
  double sentence = 0.0;  // auxiliary sentence loss (0 when disabled)
  double lambda = 1.0;
  double total = 0.0;     // sentence + lambda * token
};

/// total = sentence_part + lambda * token_part; with the auxiliary task off
/// the sentence term is dropped entirely (not just zero-weighted).
inline std::pair<Var, LossReport> combined_loss(const Var& token_part, const Var& sentence_part,
                                                double lambda, bool auxiliary_enabled) {
  if (lambda < 0.0) throw ContractError("combined_loss: lambda must be non-negative");
  Var total = auxiliary_enabled ? add(sentence_part, scale(token_part, lambda))
                                : scale(token_part, lambda);
  LossReport report;
  report.token = token_part->value[0];
  report.sentence = auxiliary_enabled ? sentence_part->value[0] : 0.0;
  report.lambda = lambda;
  report.total = total->value[0];
  return {total, report};
}

}  // namespace mtmn

#endif  // MTMN_HEADS_HPP_
