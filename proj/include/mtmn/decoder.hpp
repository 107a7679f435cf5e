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

#ifndef MTMN_DECODER_HPP_
#define MTMN_DECODER_HPP_

#include <array>
#include <string>
#include <vector>

#include "mtmn/corpus.hpp"
#include "mtmn/model.hpp"

namespace mtmn {

/// Five-way token label for one category after merging the two channels.
enum class CategoryLabel { BA, IA, BP, IP, O };

struct CategoryDecision {
  CategoryLabel label = CategoryLabel::O;
  double prob = 0.0;  // winning probability backing the decision
};

namespace detail {

/// Argmax over (B, I, O) probabilities; ties go to the lowest index.
inline std::size_t argmax3(const std::array<double, 3>& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (p[i] > p[best]) best = i;
  return best;
}

inline void check_channel(const std::array<double, 3>& p, const char* which) {
  double sum = 0.0;
  for (double v : p) {
    if (v < -1e-12) throw ContractError(std::string(which) + ": negative probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw ContractError(std::string(which) + ": probabilities sum to " + std::to_string(sum));
}

}  // namespace detail

/// Merges the aspect and opinion channel predictions for one token and one
/// category. If both channels say O the token is O; if exactly one says O the
/// other channel's label wins; if neither says O the higher-probability
/// channel wins, with ties going to the aspect channel.
inline CategoryDecision decide_category_label(const std::array<double, 3>& aspect_probs,
                                              const std::array<double, 3>& opinion_probs) {
  detail::check_channel(aspect_probs, "decide: aspect channel");
  detail::check_channel(opinion_probs, "decide: opinion channel");
  const std::size_t ia = detail::argmax3(aspect_probs);
  const std::size_t ip = detail::argmax3(opinion_probs);
  const double pa = aspect_probs[ia];
  const double pp = opinion_probs[ip];
  const bool a_is_o = ia == 2;
  const bool p_is_o = ip == 2;
  CategoryDecision out;
  if (a_is_o && p_is_o) {
    out.label = CategoryLabel::O;
    out.prob = std::max(pa, pp);
  } else if (p_is_o) {
    out.label = ia == 0 ? CategoryLabel::BA : CategoryLabel::IA;
    out.prob = pa;
  } else if (a_is_o) {
    out.label = ip == 0 ? CategoryLabel::BP : CategoryLabel::IP;
    out.prob = pp;
  } else if (pa >= pp) {
    out.label = ia == 0 ? CategoryLabel::BA : CategoryLabel::IA;
    out.prob = pa;
  } else {
    out.label = ip == 0 ? CategoryLabel::BP : CategoryLabel::IP;
    out.prob = pp;
  }
  return out;
}

/// All non-O decisions across categories for one token (multi-label: a token
/// may carry labels under several categories at once).
inline std::vector<std::pair<std::size_t, CategoryLabel>> integrate_categories(
    const std::vector<CategoryDecision>& per_category) {
  std::vector<std::pair<std::size_t, CategoryLabel>> out;
  for (std::size_t c = 0; c < per_category.size(); ++c)
    if (per_category[c].label != CategoryLabel::O) out.emplace_back(c, per_category[c].label);
  return out;
}

/// A decoded term: an inclusive span of one kind under one category.
struct TermSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  TermKind kind = TermKind::aspect;
  std::size_t category = 0;

  bool operator==(const TermSpan& o) const {
    return start == o.start && end == o.end && kind == o.kind && category == o.category;
  }
  bool operator<(const TermSpan& o) const {
    return std::tie(start, end, kind, category) < std::tie(o.start, o.end, o.kind, o.category);
  }
};

/// Maximal B(I)* runs become spans. An I with no live span to extend (after O
/// or at the sentence start) is repaired to B and opens its own span.
inline std::vector<std::pair<std::size_t, std::size_t>> extract_spans(
    const std::vector<Bio>& labels) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  bool open = false;
  std::size_t start = 0;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    switch (labels[j]) {
      case Bio::B:
        if (open) spans.emplace_back(start, j - 1);
        start = j;
        open = true;
        break;
      case Bio::I:
        if (!open) {  // orphan I: treat as B
          start = j;
          open = true;
        }
        break;
      case Bio::O:
        if (open) {
          spans.emplace_back(start, j - 1);
          open = false;
        }
        break;
    }
  }
  if (open) spans.emplace_back(start, labels.size() - 1);
  return spans;
}

namespace detail {

inline std::array<double, 3> column3(const Tensor& probs, std::size_t j) {
  return {probs.at2(0, j), probs.at2(1, j), probs.at2(2, j)};
}

}  // namespace detail

/// Decodes one sentence's channel probabilities into term spans: pick a
/// five-way label per (token, category), then read channel-wise BIO runs.
inline std::vector<TermSpan> decode_spans(const std::vector<Tensor>& token_probs_a,
                                          const std::vector<Tensor>& token_probs_p) {
  if (token_probs_a.size() != token_probs_p.size())
    throw ShapeError("decode_spans: channel lists differ in category count");
  std::vector<TermSpan> spans;
  for (std::size_t c = 0; c < token_probs_a.size(); ++c) {
    const Tensor& ya = token_probs_a[c];
    const Tensor& yp = token_probs_p[c];
    require_same_shape(ya, yp, "decode_spans");
    const std::size_t n = ya.dim(1);
    std::vector<Bio> aspect_labels(n, Bio::O), opinion_labels(n, Bio::O);
    for (std::size_t j = 0; j < n; ++j) {
      const CategoryDecision d =
          decide_category_label(detail::column3(ya, j), detail::column3(yp, j));
      switch (d.label) {
        case CategoryLabel::BA: aspect_labels[j] = Bio::B; break;
        case CategoryLabel::IA: aspect_labels[j] = Bio::I; break;
        case CategoryLabel::BP: opinion_labels[j] = Bio::B; break;
        case CategoryLabel::IP: opinion_labels[j] = Bio::I; break;
        case CategoryLabel::O: break;
      }
    }
    for (const auto& [s, e] : extract_spans(aspect_labels))
      spans.push_back({s, e, TermKind::aspect, c});
    for (const auto& [s, e] : extract_spans(opinion_labels))
      spans.push_back({s, e, TermKind::opinion, c});
  }
  return spans;
}

/// Gold spans straight from the encoded BIO channels (round-trip identity
/// with encode_gold on valid annotations).
inline std::vector<TermSpan> spans_from_gold(const GoldChannels& gold) {
  std::vector<TermSpan> spans;
  for (std::size_t c = 0; c < gold.aspect.size(); ++c) {
    for (const auto& [s, e] : extract_spans(gold.aspect[c]))
      spans.push_back({s, e, TermKind::aspect, c});
    for (const auto& [s, e] : extract_spans(gold.opinion[c]))
      spans.push_back({s, e, TermKind::opinion, c});
  }
  return spans;
}

/// Runs the model on one sentence (no dropout) and decodes the predictions.
inline std::vector<TermSpan> tag_sentence(Model& model, const std::vector<std::string>& tokens) {
  ForwardTrace trace = model.forward(tokens);
  std::vector<Tensor> ya, yp;
  ya.reserve(trace.token_probs_a.size());
  yp.reserve(trace.token_probs_p.size());
  for (const auto& t : trace.token_probs_a) ya.push_back(t->value);
  for (const auto& t : trace.token_probs_p) yp.push_back(t->value);
  return decode_spans(ya, yp);
}

}  // namespace mtmn

#endif  // MTMN_DECODER_HPP_
