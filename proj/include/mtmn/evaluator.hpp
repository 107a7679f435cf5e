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

#ifndef MTMN_EVALUATOR_HPP_
#define MTMN_EVALUATOR_HPP_

#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtmn/decoder.hpp"

namespace mtmn {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t correct = 0;
};

namespace detail {

inline Prf prf_from_counts(std::size_t correct, std::size_t predicted, std::size_t gold) {
  Prf out;
  out.correct = correct;
  out.predicted = predicted;
  out.gold = gold;
  out.precision = predicted ? static_cast<double>(correct) / predicted : 0.0;
  out.recall = gold ? static_cast<double>(correct) / gold : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

}  // namespace detail

/// Exact-match scoring of one sentence pair: a predicted span counts iff
/// (span, kind, category) matches a gold span; ignore_category drops the
/// category component from the match.
inline Prf f1_exact(const std::vector<TermSpan>& pred, const std::vector<TermSpan>& gold,
                    bool ignore_category = false) {
  using Key = std::tuple<std::size_t, std::size_t, TermKind, std::size_t>;
  auto keyset = [&](const std::vector<TermSpan>& spans) {
    std::set<Key> keys;
    for (const auto& s : spans)
      keys.insert({s.start, s.end, s.kind, ignore_category ? 0 : s.category});
    return keys;
  };
  const std::set<Key> p = keyset(pred);
  const std::set<Key> g = keyset(gold);
  std::size_t correct = 0;
  for (const auto& k : p) correct += g.count(k);
  return detail::prf_from_counts(correct, p.size(), g.size());
}

/// Category-stripped view: a (span, kind) appears once iff it carries at
/// least one category.
inline std::vector<TermSpan> accumulate_agnostic(const std::vector<TermSpan>& spans) {
  std::set<std::tuple<std::size_t, std::size_t, TermKind>> seen;
  std::vector<TermSpan> out;
  for (const auto& s : spans) {
    if (seen.insert({s.start, s.end, s.kind}).second) out.push_back({s.start, s.end, s.kind, 0});
  }
  return out;
}

/// Scores for the four metric families plus per-category breakdowns of the
/// category-specific ones. All scores are micro-averaged over the corpus.
struct EvalReport {
  Prf asc;  // category-specific aspect spans
  Prf opc;  // category-specific opinion spans
  Prf as;   // category-agnostic aspect spans
  Prf op;   // category-agnostic opinion spans
  std::vector<std::string> categories;
  std::vector<Prf> asc_by_category;
  std::vector<Prf> opc_by_category;
};

/// Micro-averaged exact-match scoring over per-sentence (pred, gold) pairs.
inline EvalReport score_spans(
    const std::vector<std::pair<std::vector<TermSpan>, std::vector<TermSpan>>>& pairs,
    const std::vector<std::string>& categories) {
  using Key = std::tuple<std::size_t, std::size_t, TermKind, std::size_t>;
  const std::size_t c_count = categories.size();
  struct Counts {
    std::size_t correct = 0, predicted = 0, gold = 0;
  };
  Counts specific[2], agnostic[2];
  std::vector<Counts> per_cat_a(c_count), per_cat_p(c_count);

  for (const auto& [pred, gold] : pairs) {
    std::set<Key> pk, gk;
    for (const auto& s : pred) pk.insert({s.start, s.end, s.kind, s.category});
    for (const auto& s : gold) gk.insert({s.start, s.end, s.kind, s.category});
    for (const auto& k : pk) {
      const int kind = std::get<2>(k) == TermKind::aspect ? 0 : 1;
      const std::size_t c = std::get<3>(k);
      specific[kind].predicted++;
      if (c < c_count) (kind == 0 ? per_cat_a : per_cat_p)[c].predicted++;
      if (gk.count(k)) {
        specific[kind].correct++;
        if (c < c_count) (kind == 0 ? per_cat_a : per_cat_p)[c].correct++;
      }
    }
    for (const auto& k : gk) {
      const int kind = std::get<2>(k) == TermKind::aspect ? 0 : 1;
      const std::size_t c = std::get<3>(k);
      specific[kind].gold++;
      if (c < c_count) (kind == 0 ? per_cat_a : per_cat_p)[c].gold++;
    }

    std::set<std::tuple<std::size_t, std::size_t, TermKind>> pa, ga;
    for (const auto& s : pred) pa.insert({s.start, s.end, s.kind});
    for (const auto& s : gold) ga.insert({s.start, s.end, s.kind});
    for (const auto& k : pa) {
      const int kind = std::get<2>(k) == TermKind::aspect ? 0 : 1;
      agnostic[kind].predicted++;
      if (ga.count(k)) agnostic[kind].correct++;
    }
    for (const auto& k : ga)
      agnostic[std::get<2>(k) == TermKind::aspect ? 0 : 1].gold++;
  }

  EvalReport report;
  report.categories = categories;
  report.asc = detail::prf_from_counts(specific[0].correct, specific[0].predicted, specific[0].gold);
  report.opc = detail::prf_from_counts(specific[1].correct, specific[1].predicted, specific[1].gold);
  report.as = detail::prf_from_counts(agnostic[0].correct, agnostic[0].predicted, agnostic[0].gold);
  report.op = detail::prf_from_counts(agnostic[1].correct, agnostic[1].predicted, agnostic[1].gold);
  for (std::size_t c = 0; c < c_count; ++c) {
    report.asc_by_category.push_back(
        detail::prf_from_counts(per_cat_a[c].correct, per_cat_a[c].predicted, per_cat_a[c].gold));
    report.opc_by_category.push_back(
        detail::prf_from_counts(per_cat_p[c].correct, per_cat_p[c].predicted, per_cat_p[c].gold));
  }
  return report;
}

/// Decodes every sentence with dropout off and scores against the gold
/// annotations. Deterministic for a fixed (model, corpus).
inline EvalReport evaluate(Model& model, const Corpus& corpus) {
  if (corpus.categories != model.categories())
    throw ShapeError("evaluate: corpus category set does not match the model's");
  std::vector<std::pair<std::vector<TermSpan>, std::vector<TermSpan>>> pairs;
  pairs.reserve(corpus.sentences.size());
  for (const auto& s : corpus.sentences) {
    std::vector<TermSpan> gold;
    gold.reserve(s.annotations.size());
    for (const auto& a : s.annotations) gold.push_back({a.start, a.end, a.kind, a.category});
    pairs.emplace_back(tag_sentence(model, s.tokens), std::move(gold));
  }
  return score_spans(pairs, corpus.categories);
}

// ---------------------------------------------------------------------------
// Report formatting
// ---------------------------------------------------------------------------

namespace detail {

inline std::string prf_row(const std::string& label, const Prf& p) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-24s %8.4f %8.4f %8.4f %8zu %8zu %8zu\n", label.c_str(),
                p.precision, p.recall, p.f1, p.predicted, p.gold, p.correct);
  return buf;
}

}  // namespace detail

inline std::string format_report_text(const EvalReport& r) {
  std::string out;
  out += "family                          P        R       F1     pred     gold  correct\n";
  out += detail::prf_row("ASC (aspect+category)", r.asc);
  out += detail::prf_row("OPC (opinion+category)", r.opc);
  out += detail::prf_row("AS  (aspect)", r.as);
  out += detail::prf_row("OP  (opinion)", r.op);
  out += "\nper-category ASC / OPC\n";
  for (std::size_t c = 0; c < r.categories.size(); ++c) {
    out += detail::prf_row("ASC " + r.categories[c], r.asc_by_category[c]);
    out += detail::prf_row("OPC " + r.categories[c], r.opc_by_category[c]);
  }
  return out;
}

inline nlohmann::json prf_json(const Prf& p) {
  return {{"precision", p.precision}, {"recall", p.recall},       {"f1", p.f1},
          {"predicted", p.predicted}, {"gold", p.gold},           {"correct", p.correct}};
}

inline nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json j;
  j["ASC"] = prf_json(r.asc);
  j["OPC"] = prf_json(r.opc);
  j["AS"] = prf_json(r.as);
  j["OP"] = prf_json(r.op);
  j["per_category"] = nlohmann::json::array();
  for (std::size_t c = 0; c < r.categories.size(); ++c) {
    j["per_category"].push_back({{"category", r.categories[c]},
                                 {"ASC", prf_json(r.asc_by_category[c])},
                                 {"OPC", prf_json(r.opc_by_category[c])}});
  }
  return j;
}

}  // namespace mtmn

#endif  // MTMN_EVALUATOR_HPP_
