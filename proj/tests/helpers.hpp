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

#ifndef MTMN_TESTS_HELPERS_HPP_
#define MTMN_TESTS_HELPERS_HPP_

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtmn/corpus.hpp"
#include "mtmn/embedding.hpp"
#include "mtmn/model.hpp"
#include "mtmn/rng.hpp"

namespace testutil {

using namespace mtmn;

inline Tensor random_tensor(Shape shape, Rng& rng, double bound = 1.0) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

inline Var random_var(Shape shape, Rng& rng, double bound = 1.0) {
  return constant(random_tensor(std::move(shape), rng, bound));
}

/// Seeded embedding table over an explicit vocabulary.
inline EmbeddingTable random_embeddings(const std::vector<std::string>& vocab, std::size_t dim,
                                        std::uint64_t seed, double bound = 0.5) {
  EmbeddingTable table(dim);
  Rng rng(seed);
  for (const auto& token : vocab) {
    std::vector<double> v(dim);
    for (auto& x : v) x = rng.uniform(-bound, bound);
    table.insert(token, std::move(v));
  }
  return table;
}

/// The tiny full-network configuration used for gradient checks.
inline ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.embedding_dim = 8;
  cfg.hidden_dim = 4;
  cfg.interactions = 2;
  cfg.factor_rank = 2;
  cfg.layers = 2;
  cfg.lambda = 1.0;
  cfg.dropout_rate = 0.0;
  cfg.sharing.tensor_sharing = TensorSharing::factored;
  cfg.sharing.feature_sharing = true;
  cfg.sharing.auxiliary_task = true;
  return cfg;
}

inline std::vector<std::string> tiny_categories() {
  return {"FOOD#QUALITY", "SERVICE#GENERAL", "AMBIENCE#GENERAL"};
}

/// Vocabulary and embedding table sized for the tiny config.
inline std::vector<std::string> tiny_vocab() {
  return {"the", "soup", "is", "hot", "and", "staff", "were", "rude", "room", "dark",
          "but", "tasty", "menu", "a", "very"};
}

inline EmbeddingTable tiny_embeddings(std::uint64_t seed = 7) {
  return random_embeddings(tiny_vocab(), tiny_config().embedding_dim, seed);
}

/// One annotated five-token sentence matching tiny_categories().
inline Sentence tiny_sentence() {
  Sentence s;
  s.id = "t1";
  s.tokens = {"the", "soup", "is", "very", "hot"};
  s.annotations = {{1, 1, TermKind::aspect, 0}, {4, 4, TermKind::opinion, 0}};
  return s;
}

/// Synthetic patterned corpus: each category has dedicated aspect and opinion
/// tokens, so a capable model can fit it exactly. Vocabulary: 16 fillers plus
/// 4 aspect and 4 opinion words per category (40 tokens at C=3).
struct SyntheticCorpus {
  Corpus corpus;
  std::vector<std::string> vocab;
};

inline SyntheticCorpus synthetic_corpus(std::size_t sentence_count = 20, std::size_t categories = 3,
                                        std::uint64_t seed = 11) {
  SyntheticCorpus out;
  for (std::size_t c = 0; c < categories; ++c)
    out.corpus.categories.push_back("CAT_" + std::to_string(c));
  std::vector<std::string> fillers;
  for (std::size_t f = 0; f < 16; ++f) fillers.push_back("w" + std::to_string(f));
  std::vector<std::vector<std::string>> aspects(categories), opinions(categories);
  for (std::size_t c = 0; c < categories; ++c)
    for (std::size_t k = 0; k < 4; ++k) {
      aspects[c].push_back("asp" + std::to_string(c) + "_" + std::to_string(k));
      opinions[c].push_back("opi" + std::to_string(c) + "_" + std::to_string(k));
    }
  out.vocab = fillers;
  for (std::size_t c = 0; c < categories; ++c) {
    out.vocab.insert(out.vocab.end(), aspects[c].begin(), aspects[c].end());
    out.vocab.insert(out.vocab.end(), opinions[c].begin(), opinions[c].end());
  }

  Rng rng(seed);
  for (std::size_t i = 0; i < sentence_count; ++i) {
    Sentence s;
    s.id = "syn" + std::to_string(i);
    const std::size_t c = i % categories;
    const auto& asp = aspects[c][rng.below(aspects[c].size())];
    const auto& opi = opinions[c][rng.below(opinions[c].size())];
    auto filler = [&]() { return fillers[rng.below(fillers.size())]; };
    s.tokens = {filler(), asp, filler(), opi, filler()};
    s.annotations = {{1, 1, TermKind::aspect, c}, {3, 3, TermKind::opinion, c}};
    // Every third sentence also mentions a second category.
    if (i % 3 == 2 && categories > 1) {
      const std::size_t c2 = (c + 1) % categories;
      s.tokens.push_back(aspects[c2][rng.below(aspects[c2].size())]);
      s.annotations.push_back({5, 5, TermKind::aspect, c2});
    }
    out.corpus.sentences.push_back(std::move(s));
  }
  return out;
}

inline nlohmann::json corpus_json(const Corpus& corpus) {
  nlohmann::json doc;
  doc["categories"] = corpus.categories;
  doc["sentences"] = nlohmann::json::array();
  for (const auto& s : corpus.sentences) {
    nlohmann::json js;
    js["id"] = s.id;
    js["tokens"] = s.tokens;
    js["annotations"] = nlohmann::json::array();
    for (const auto& a : s.annotations)
      js["annotations"].push_back({{"span", {a.start, a.end}},
                                   {"kind", to_string(a.kind)},
                                   {"category", corpus.categories[a.category]}});
    doc["sentences"].push_back(js);
  }
  return doc;
}

inline std::string embeddings_text(const EmbeddingTable& table) {
  std::ostringstream out;
  out << table.size() << " " << table.dimension() << "\n";
  char buf[64];
  for (std::size_t r = 0; r < table.size(); ++r) {
    out << table.tokens()[r];
    for (double v : table.vector_at(r)) {
      std::snprintf(buf, sizeof(buf), " %.17g", v);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

/// Unique scratch directory under the system temp root.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("mtmn_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testutil

#endif  // MTMN_TESTS_HELPERS_HPP_
