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

#ifndef MTMN_CORPUS_HPP_
#define MTMN_CORPUS_HPP_

#include <array>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtmn/tensor.hpp"

namespace mtmn {

enum class TermKind { aspect, opinion };

inline const char* to_string(TermKind k) { return k == TermKind::aspect ? "aspect" : "opinion"; }

/// One gold term: an inclusive token span of a given kind under one category.
struct Annotation {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  TermKind kind = TermKind::aspect;
  std::size_t category = 0;  // index into Corpus::categories

  bool operator==(const Annotation& o) const {
    return start == o.start && end == o.end && kind == o.kind && category == o.category;
  }
  bool operator<(const Annotation& o) const {
    return std::tie(start, end, kind, category) < std::tie(o.start, o.end, o.kind, o.category);
  }
};

struct Sentence {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<Annotation> annotations;
};

struct Corpus {
  std::vector<std::string> categories;  // order defines the category index
  std::vector<Sentence> sentences;

  std::size_t category_count() const { return categories.size(); }
};

/// Per-token {B, I, O} target in one (category, kind) channel.
enum class Bio : int { B = 0, I = 1, O = 2 };

/// Training targets for one sentence: a BIO sequence per (category, channel)
/// plus the derived sentence-level presence flag per category.
struct GoldChannels {
  std::size_t length = 0;
  std::vector<std::vector<Bio>> aspect;   // [C][n]
  std::vector<std::vector<Bio>> opinion;  // [C][n]
  std::vector<bool> present;              // [C]

  const std::vector<Bio>& channel(std::size_t category, TermKind kind) const {
    return kind == TermKind::aspect ? aspect[category] : opinion[category];
  }

  /// One-hot matrix [3 x n] over (B, I, O) for one channel, as loss targets.
  Tensor onehot(std::size_t category, TermKind kind) const {
    const auto& labels = channel(category, kind);
    Tensor t({3, labels.size()});
    for (std::size_t j = 0; j < labels.size(); ++j)
      t.at2(static_cast<std::size_t>(labels[j]), j) = 1.0;
    return t;
  }

  /// One-hot 2-vector over (absent, present) for the auxiliary task.
  Tensor sentence_onehot(std::size_t category) const {
    Tensor t({2});
    t[present[category] ? 1 : 0] = 1.0;
    return t;
  }
};

namespace detail {

inline std::size_t category_index(const Corpus& corpus, const std::string& name,
                                  const std::string& sentence_id) {
  for (std::size_t c = 0; c < corpus.categories.size(); ++c)
    if (corpus.categories[c] == name) return c;
  throw ValidationError("sentence " + sentence_id + ": unknown category \"" + name + "\"");
}

}  // namespace detail

/// Parses the corpus JSON document:
///   {"categories": [...], "sentences": [{"id", "tokens", "annotations":
///    [{"span": [start, end], "kind": "aspect"|"opinion", "category": name}]}]}
/// Sentence order is preserved. Spans are validated against token counts and
/// overlapping same-kind same-category spans are rejected.
inline Corpus parse_corpus_json(const nlohmann::json& doc, bool require_categories = true) {
  Corpus corpus;
  if (doc.contains("categories")) {
    for (const auto& c : doc.at("categories")) corpus.categories.push_back(c.get<std::string>());
  } else if (require_categories) {
    throw ParseError("corpus: missing \"categories\"");
  }
  if (require_categories) {
    if (corpus.categories.empty()) throw ValidationError("corpus: category list is empty");
    for (std::size_t i = 0; i < corpus.categories.size(); ++i)
      for (std::size_t j = i + 1; j < corpus.categories.size(); ++j)
        if (corpus.categories[i] == corpus.categories[j])
          throw ValidationError("corpus: duplicate category \"" + corpus.categories[i] + "\"");
  }
  if (!doc.contains("sentences")) throw ParseError("corpus: missing \"sentences\"");
  for (const auto& js : doc.at("sentences")) {
    Sentence s;
    s.id = js.value("id", "s" + std::to_string(corpus.sentences.size()));
    if (!js.contains("tokens")) throw ParseError("sentence " + s.id + ": missing \"tokens\"");
    for (const auto& t : js.at("tokens")) s.tokens.push_back(t.get<std::string>());
    if (s.tokens.empty()) throw ValidationError("sentence " + s.id + ": empty token list");
    if (js.contains("annotations")) {
      for (const auto& ja : js.at("annotations")) {
        Annotation a;
        const auto& span = ja.at("span");
        if (!span.is_array() || span.size() != 2)
          throw ParseError("sentence " + s.id + ": span must be [start, end]");
        const long long start = span[0].get<long long>();
        const long long end = span[1].get<long long>();
        if (start < 0 || end < start || static_cast<std::size_t>(end) >= s.tokens.size())
          throw ValidationError("sentence " + s.id + ": span [" + std::to_string(start) + ", " +
                                std::to_string(end) + "] out of bounds for " +
                                std::to_string(s.tokens.size()) + " tokens");
        a.start = static_cast<std::size_t>(start);
        a.end = static_cast<std::size_t>(end);
        const std::string kind = ja.at("kind").get<std::string>();
        if (kind == "aspect") {
          a.kind = TermKind::aspect;
        } else if (kind == "opinion") {
          a.kind = TermKind::opinion;
        } else {
          throw ValidationError("sentence " + s.id + ": unknown kind \"" + kind + "\"");
        }
        a.category = detail::category_index(corpus, ja.at("category").get<std::string>(), s.id);
        for (const auto& prev : s.annotations) {
          const bool overlaps = prev.kind == a.kind && prev.category == a.category &&
                                prev.start <= a.end && a.start <= prev.end;
          if (overlaps)
            throw ValidationError("sentence " + s.id + ": overlapping " +
                                  std::string(to_string(a.kind)) + " spans for category \"" +
                                  corpus.categories[a.category] + "\"");
        }
        s.annotations.push_back(a);
      }
    }
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

inline Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("corpus " + path + ": " + e.what());
  }
  try {
    return parse_corpus_json(doc);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("corpus " + path + ": " + e.what());
  }
}

/// Lenient variant for tagging input: categories and annotations optional.
inline std::vector<Sentence> load_tag_input(const std::string& path,
                                            const std::vector<std::string>& categories) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open input file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("input " + path + ": " + e.what());
  }
  nlohmann::json patched = doc;
  if (!patched.contains("categories")) patched["categories"] = categories;
  try {
    Corpus c = parse_corpus_json(patched);
    return c.sentences;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("input " + path + ": " + e.what());
  }
}

/// Expands a sentence's annotations into per-(category, channel) BIO targets
/// and per-category presence flags. A token covered by annotations of several
/// categories is non-O in each of those categories' channels.
inline GoldChannels encode_gold(const Sentence& s, std::size_t category_count) {
  GoldChannels g;
  g.length = s.tokens.size();
  g.aspect.assign(category_count, std::vector<Bio>(g.length, Bio::O));
  g.opinion.assign(category_count, std::vector<Bio>(g.length, Bio::O));
  g.present.assign(category_count, false);
  for (const auto& a : s.annotations) {
    auto& channel = a.kind == TermKind::aspect ? g.aspect[a.category] : g.opinion[a.category];
    channel[a.start] = Bio::B;
    for (std::size_t j = a.start + 1; j <= a.end; ++j) channel[j] = Bio::I;
    g.present[a.category] = true;
  }
  return g;
}

/// Presence flag per category: set iff either channel has a non-O token.
inline std::vector<bool> derive_sentence_labels(const GoldChannels& g) {
  std::vector<bool> present(g.aspect.size(), false);
  for (std::size_t c = 0; c < g.aspect.size(); ++c) {
    for (std::size_t j = 0; j < g.length; ++j) {
      if (g.aspect[c][j] != Bio::O || g.opinion[c][j] != Bio::O) {
        present[c] = true;
        break;
      }
    }
  }
  return present;
}

}  // namespace mtmn

#endif  // MTMN_CORPUS_HPP_
