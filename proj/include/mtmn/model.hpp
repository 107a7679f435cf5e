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

#ifndef MTMN_MODEL_HPP_
#define MTMN_MODEL_HPP_

#include <array>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "mtmn/autodiff.hpp"
#include "mtmn/corpus.hpp"
#include "mtmn/embedding.hpp"
#include "mtmn/gru.hpp"
#include "mtmn/heads.hpp"
#include "mtmn/memory.hpp"
#include "mtmn/sharing.hpp"

namespace mtmn {

struct ModelConfig {
  std::size_t embedding_dim = 150;  // token vector size D
  std::size_t hidden_dim = 50;      // memory column size d
  std::size_t interactions = 20;    // bilinear matrices per tensor, K
  std::size_t factor_rank = 5;      // shared basis count m
  std::size_t layers = 2;           // attention hops T
  double lambda = 1.0;              // token-loss weight in the objective
  double dropout_rate = 0.5;
  bool train_embeddings = false;
  SharingConfig sharing;
};

/// Per-(category, channel) intermediates of one layer, kept for inspection
/// and reused by the loss heads on the final layer.
struct ChannelState {
  Var interactions_pre;  // [2K x n] before the feature GRU
  Var features_raw;      // [2K x n] after the feature GRU; input to mixing
  Var features;          // [2K x n] refined features (dropout-masked in training)
  Var scores;            // attention logits [n]
  Var attention;         // attention weights [n]
  Var summary;           // o [d]
  Var summary_mixed;     // o-tilde [d]
};

struct LayerState {
  Var similarity_a;  // [C x C]; null when feature sharing is off
  Var similarity_p;
  std::vector<ChannelState> aspect;   // [C]
  std::vector<ChannelState> opinion;  // [C]
  std::vector<Var> next_prototype_a;  // [C]; empty on the final layer
  std::vector<Var> next_prototype_p;
};

struct ForwardTrace {
  std::size_t length = 0;
  Var input;   // [D x n] (after input dropout in training)
  Var memory;  // H [d x n], fixed across layers
  std::vector<LayerState> layers;
  std::vector<Var> token_probs_a;  // per category, [3 x n] over (B, I, O)
  std::vector<Var> token_probs_p;
  std::vector<Var> sentence_probs;  // per category, [2]; empty with auxiliary off
  Var loss;                         // scalar node; null when no gold was given
  LossReport report;
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;  // dropout mask source; required when training with dropout
  /// Testing hook: run the mixing path with S forced to the identity. Used to
  /// show that disabling feature sharing equals mixing with identity weights.
  bool identity_similarity = false;
};

/// The full multi-task memory network: shared GRU memory, per-category
/// interaction tensors (factored, independent or single-shared), context-aware
/// feature mixing across categories, token label heads and the sentence-level
/// auxiliary head.
class Model {
 public:
  Model(ModelConfig cfg, std::vector<std::string> categories, const EmbeddingTable& table,
        std::uint64_t seed)
      : cfg_(std::move(cfg)), categories_(std::move(categories)), table_(&table), seed_(seed) {
    if (categories_.empty()) throw ContractError("model: category list is empty");
    if (table.dimension() != cfg_.embedding_dim)
      throw ShapeError("model: embedding table dimension " + std::to_string(table.dimension()) +
                       " does not match configured " + std::to_string(cfg_.embedding_dim));
    if (cfg_.layers == 0) throw ContractError("model: needs at least one layer");
    if (cfg_.sharing.tensor_sharing == TensorSharing::factored && cfg_.factor_rank == 0)
      throw ContractError("model: factor rank must be positive");
    Rng rng(seed);
    build_params(rng);
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::string>& categories() const { return categories_; }
  std::size_t category_count() const { return categories_.size(); }
  const EmbeddingTable& embeddings() const { return *table_; }
  std::uint64_t seed() const { return seed_; }

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }

  void zero_grads() { params_.zero_grads(); }

  ForwardTrace forward(const std::vector<std::string>& tokens, const GoldChannels* gold = nullptr,
                       const ForwardOptions& opt = {}) {
    if (tokens.empty()) throw ContractError("forward: empty sentence");
    const std::size_t c_count = categories_.size();
    const std::size_t n = tokens.size();
    if (gold && (gold->aspect.size() != c_count || gold->length != n))
      throw ShapeError("forward: gold channels do not match sentence/category layout");
    const bool drop = opt.training && cfg_.dropout_rate > 0.0;
    if (drop && !opt.rng) throw ContractError("forward: training with dropout needs an rng");

    ForwardTrace trace;
    trace.length = n;

    // Token embeddings, the first dropout site.
    Var x;
    if (embed_matrix_) {
      std::vector<std::size_t> rows(n);
      for (std::size_t j = 0; j < n; ++j) rows[j] = table_->row_of(tokens[j]);
      x = embed_rows(embed_matrix_, std::move(rows));
    } else {
      x = constant(table_->embed(tokens));
    }
    if (drop) x = dropout(x, cfg_.dropout_rate, *opt.rng);
    trace.input = x;

    // The memory is computed once and reused by every layer.
    trace.memory = gru_forward(x, encoder_);

    const auto tensors = interaction_tensors();
    std::vector<Var> proto_a = proto_a_;
    std::vector<Var> proto_p = proto_p_;

    for (std::size_t layer = 0; layer < cfg_.layers; ++layer) {
      LayerState state;
      if (opt.identity_similarity) {
        state.similarity_a = constant(Tensor::identity(c_count));
        state.similarity_p = constant(Tensor::identity(c_count));
      } else if (cfg_.sharing.feature_sharing) {
        state.similarity_a = task_similarity(proto_a);
        state.similarity_p = task_similarity(proto_p);
      }

      std::vector<Var> raw_a(c_count), raw_p(c_count);
      state.aspect.resize(c_count);
      state.opinion.resize(c_count);
      for (std::size_t c = 0; c < c_count; ++c) {
        InteractionFeatures feats =
            interact(trace.memory, proto_a[c], proto_p[c], tensors[kGa][c], tensors[kDa][c],
                     tensors[kGp][c], tensors[kDp][c], feat_gru_a_, feat_gru_p_);
        state.aspect[c].interactions_pre = feats.pre_a;
        state.opinion[c].interactions_pre = feats.pre_p;
        state.aspect[c].features_raw = feats.a;
        state.opinion[c].features_raw = feats.p;
        raw_a[c] = feats.a;
        raw_p[c] = feats.p;
      }

      std::vector<Var> mixed_a =
          state.similarity_a ? refine_features(state.similarity_a, raw_a) : raw_a;
      std::vector<Var> mixed_p =
          state.similarity_p ? refine_features(state.similarity_p, raw_p) : raw_p;
      if (drop) {
        // Second dropout site: the refined features feeding attention and,
        // on the final layer, the label heads.
        for (auto& f : mixed_a) f = dropout(f, cfg_.dropout_rate, *opt.rng);
        for (auto& f : mixed_p) f = dropout(f, cfg_.dropout_rate, *opt.rng);
      }

      std::vector<Var> summaries_a(c_count), summaries_p(c_count);
      for (std::size_t c = 0; c < c_count; ++c) {
        state.aspect[c].features = mixed_a[c];
        state.opinion[c].features = mixed_p[c];
        Attention att_a = attend(mixed_a[c], v_a_);
        Attention att_p = attend(mixed_p[c], v_p_);
        state.aspect[c].scores = att_a.scores;
        state.opinion[c].scores = att_p.scores;
        state.aspect[c].attention = att_a.weights;
        state.opinion[c].attention = att_p.weights;
        summaries_a[c] = summarize(trace.memory, att_a.weights);
        summaries_p[c] = summarize(trace.memory, att_p.weights);
        state.aspect[c].summary = summaries_a[c];
        state.opinion[c].summary = summaries_p[c];
      }

      std::vector<Var> mixed_sum_a =
          state.similarity_a ? refine_features(state.similarity_a, summaries_a) : summaries_a;
      std::vector<Var> mixed_sum_p =
          state.similarity_p ? refine_features(state.similarity_p, summaries_p) : summaries_p;
      for (std::size_t c = 0; c < c_count; ++c) {
        state.aspect[c].summary_mixed = mixed_sum_a[c];
        state.opinion[c].summary_mixed = mixed_sum_p[c];
      }

      if (layer + 1 < cfg_.layers) {
        state.next_prototype_a.resize(c_count);
        state.next_prototype_p.resize(c_count);
        for (std::size_t c = 0; c < c_count; ++c) {
          state.next_prototype_a[c] = update_prototype(proto_a[c], mixed_sum_a[c], q_a_);
          state.next_prototype_p[c] = update_prototype(proto_p[c], mixed_sum_p[c], q_p_);
        }
        proto_a = state.next_prototype_a;
        proto_p = state.next_prototype_p;
      }
      trace.layers.push_back(std::move(state));
    }

    // Label heads read the final layer's refined features and summaries.
    const LayerState& last = trace.layers.back();
    trace.token_probs_a.resize(c_count);
    trace.token_probs_p.resize(c_count);
    for (std::size_t c = 0; c < c_count; ++c) {
      trace.token_probs_a[c] = predict_token_labels(last.aspect[c].features, w_tok_a_);
      trace.token_probs_p[c] = predict_token_labels(last.opinion[c].features, w_tok_p_);
    }
    if (cfg_.sharing.auxiliary_task) {
      trace.sentence_probs.resize(c_count);
      for (std::size_t c = 0; c < c_count; ++c)
        trace.sentence_probs[c] = predict_sentence(last.aspect[c].summary_mixed,
                                                   last.opinion[c].summary_mixed, w_sent_[c]);
    }

    if (gold) {
      std::vector<Var> preds;
      std::vector<Tensor> targets;
      preds.reserve(2 * c_count);
      targets.reserve(2 * c_count);
      for (std::size_t c = 0; c < c_count; ++c) {
        preds.push_back(trace.token_probs_a[c]);
        targets.push_back(gold->onehot(c, TermKind::aspect));
        preds.push_back(trace.token_probs_p[c]);
        targets.push_back(gold->onehot(c, TermKind::opinion));
      }
      Var tok = token_loss(preds, targets);
      Var sen;
      if (cfg_.sharing.auxiliary_task) {
        std::vector<Tensor> sent_targets;
        sent_targets.reserve(c_count);
        for (std::size_t c = 0; c < c_count; ++c) sent_targets.push_back(gold->sentence_onehot(c));
        sen = sentence_loss(trace.sentence_probs, sent_targets);
      }
      auto [total, report] = combined_loss(tok, sen, cfg_.lambda, cfg_.sharing.auxiliary_task);
      trace.loss = total;
      trace.report = report;
    }
    return trace;
  }

  /// Loss-only forward used by gradient checking and training diagnostics.
  double loss_value(const std::vector<std::string>& tokens, const GoldChannels& gold) {
    return forward(tokens, &gold).report.total;
  }

 private:
  enum Family { kGa = 0, kGp = 1, kDa = 2, kDp = 3 };
  static constexpr const char* kFamilyName[4] = {"Ga", "Gp", "Da", "Dp"};

  static std::string index_tag(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%02zu", prefix, i);
    return buf;
  }

  void build_params(Rng& rng) {
    const std::size_t d = cfg_.hidden_dim;
    const std::size_t k2 = 2 * cfg_.interactions;
    const std::size_t c_count = categories_.size();
    auto uniform_tensor = [&](Shape shape, double bound) {
      Tensor t(std::move(shape));
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
      return t;
    };

    encoder_ = make_gru(params_, "encoder", cfg_.embedding_dim, d, rng);
    feat_gru_a_ = make_gru(params_, "feature_gru.a", k2, k2, rng);
    feat_gru_p_ = make_gru(params_, "feature_gru.p", k2, k2, rng);

    v_a_ = params_.add("attention.v_a", uniform_tensor({k2}, 0.1));
    v_p_ = params_.add("attention.v_p", uniform_tensor({k2}, 0.1));
    q_a_ = params_.add("attention.Q_a", uniform_tensor({d, d}, 0.1));
    q_p_ = params_.add("attention.Q_p", uniform_tensor({d, d}, 0.1));
    w_tok_a_ = params_.add("head.token.W_a", uniform_tensor({3, k2}, 0.1));
    w_tok_p_ = params_.add("head.token.W_p", uniform_tensor({3, k2}, 0.1));

    const std::size_t K = cfg_.interactions;
    const std::size_t m = cfg_.factor_rank;
    switch (cfg_.sharing.tensor_sharing) {
      case TensorSharing::factored: {
        // Basis magnitudes shrink with rank so the combined tensors stay
        // comparable across different m.
        const double basis_bound = 0.1 / std::sqrt(static_cast<double>(m));
        for (int f = 0; f < 4; ++f) {
          factored_[f].z.reserve(K);
          factored_[f].basis.reserve(K);
          for (std::size_t k = 0; k < K; ++k) {
            const std::string base =
                std::string("tensor.") + kFamilyName[f] + "." + index_tag("k", k);
            factored_[f].z.push_back(params_.add(base + ".Z", uniform_tensor({c_count, m}, 0.1)));
            factored_[f].basis.push_back(
                params_.add(base + ".basis", uniform_tensor({m, d, d}, basis_bound)));
          }
        }
        break;
      }
      case TensorSharing::independent:
        for (int f = 0; f < 4; ++f) {
          independent_[f].reserve(c_count);
          for (std::size_t c = 0; c < c_count; ++c)
            independent_[f].push_back(
                params_.add(std::string("tensor.") + kFamilyName[f] + "." + index_tag("c", c),
                            uniform_tensor({K, d, d}, 0.1)));
        }
        break;
      case TensorSharing::single_shared:
        for (int f = 0; f < 4; ++f)
          shared_[f] = params_.add(std::string("tensor.") + kFamilyName[f] + ".shared",
                                   uniform_tensor({K, d, d}, 0.1));
        break;
    }

    proto_a_.reserve(c_count);
    proto_p_.reserve(c_count);
    for (std::size_t c = 0; c < c_count; ++c)
      proto_a_.push_back(params_.add("prototype.a." + index_tag("c", c), uniform_tensor({d}, 0.1)));
    for (std::size_t c = 0; c < c_count; ++c)
      proto_p_.push_back(params_.add("prototype.p." + index_tag("c", c), uniform_tensor({d}, 0.1)));

    w_sent_.reserve(c_count);
    for (std::size_t c = 0; c < c_count; ++c)
      w_sent_.push_back(
          params_.add("head.sentence." + index_tag("c", c), uniform_tensor({2, 2 * d}, 0.1)));

    if (cfg_.train_embeddings)
      embed_matrix_ = params_.add("embeddings", table_->as_matrix());
  }

  /// Per-family, per-category interaction tensors for one sentence graph.
  /// Factored tensors are rebuilt from their factors on every call so that
  /// factor gradients flow; the other modes return the parameter nodes.
  std::array<std::vector<Var>, 4> interaction_tensors() const {
    const std::size_t c_count = categories_.size();
    std::array<std::vector<Var>, 4> out;
    for (int f = 0; f < 4; ++f) {
      out[f].resize(c_count);
      for (std::size_t c = 0; c < c_count; ++c) {
        switch (cfg_.sharing.tensor_sharing) {
          case TensorSharing::factored: {
            std::vector<Var> slices;
            slices.reserve(cfg_.interactions);
            for (std::size_t k = 0; k < cfg_.interactions; ++k)
              slices.push_back(materialize_tensor(factored_[f].z[k], factored_[f].basis[k], c));
            out[f][c] = stack_slices(slices);
            break;
          }
          case TensorSharing::independent:
            out[f][c] = independent_[f][c];
            break;
          case TensorSharing::single_shared:
            out[f][c] = shared_[f];
            break;
        }
      }
    }
    return out;
  }

  ModelConfig cfg_;
  std::vector<std::string> categories_;
  const EmbeddingTable* table_;
  std::uint64_t seed_;
  ParamStore params_;

  GruParams encoder_, feat_gru_a_, feat_gru_p_;
  Var v_a_, v_p_, q_a_, q_p_, w_tok_a_, w_tok_p_;
  std::vector<Var> proto_a_, proto_p_, w_sent_;
  struct FactoredFamily {
    std::vector<Var> z;      // per k: [C x m]
    std::vector<Var> basis;  // per k: [m x d x d]
  };
  std::array<FactoredFamily, 4> factored_;
  std::array<std::vector<Var>, 4> independent_;
  std::array<Var, 4> shared_;
  Var embed_matrix_;  // only in train_embeddings mode
};

}  // namespace mtmn

#endif  // MTMN_MODEL_HPP_
