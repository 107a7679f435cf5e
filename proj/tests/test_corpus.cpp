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

#include <set>

#include <doctest.h>

#include "helpers.hpp"
#include "mtmn/corpus.hpp"
#include "mtmn/decoder.hpp"
#include "mtmn/embedding.hpp"

using namespace mtmn;

TEST_SUITE_BEGIN("corpus");

namespace {

Corpus corpus_from_string(const std::string& json) {
  return parse_corpus_json(nlohmann::json::parse(json));
}

const char* kSmallCorpus = R"({
  "categories": ["FOOD", "SERVICE"],
  "sentences": [
    {"id": "s1", "tokens": ["The", "soup", "is", "hot"],
     "annotations": [
       {"span": [1, 1], "kind": "aspect", "category": "FOOD"},
       {"span": [3, 3], "kind": "opinion", "category": "FOOD"}]}
  ]})";

}  // namespace

TEST_CASE("load accepts a one-sentence fixture") {
  Corpus c = corpus_from_string(kSmallCorpus);
  CHECK(c.category_count() == 2);
  REQUIRE(c.sentences.size() == 1);
  CHECK(c.sentences[0].tokens.size() == 4);
  CHECK(c.sentences[0].annotations.size() == 2);
}

TEST_CASE("out-of-bounds span names the sentence") {
  const char* bad = R"({
    "categories": ["FOOD"],
    "sentences": [{"id": "bad7", "tokens": ["a", "b"],
                   "annotations": [{"span": [1, 2], "kind": "aspect", "category": "FOOD"}]}]})";
  CHECK_THROWS_WITH_AS(corpus_from_string(bad), doctest::Contains("bad7"), ValidationError);
}

TEST_CASE("unknown category and overlapping same-kind spans are rejected") {
  const char* unknown = R"({
    "categories": ["FOOD"],
    "sentences": [{"id": "u", "tokens": ["a"],
                   "annotations": [{"span": [0, 0], "kind": "aspect", "category": "DRINKS"}]}]})";
  CHECK_THROWS_AS(corpus_from_string(unknown), ValidationError);

  const char* overlap = R"({
    "categories": ["FOOD"],
    "sentences": [{"id": "o", "tokens": ["a", "b", "c"],
                   "annotations": [
                     {"span": [0, 1], "kind": "aspect", "category": "FOOD"},
                     {"span": [1, 2], "kind": "aspect", "category": "FOOD"}]}]})";
  CHECK_THROWS_AS(corpus_from_string(overlap), ValidationError);

  // Overlap across kinds is allowed.
  const char* cross_kind = R"({
    "categories": ["FOOD"],
    "sentences": [{"id": "x", "tokens": ["a", "b"],
                   "annotations": [
                     {"span": [0, 1], "kind": "aspect", "category": "FOOD"},
                     {"span": [1, 1], "kind": "opinion", "category": "FOOD"}]}]})";
  CHECK_NOTHROW(corpus_from_string(cross_kind));
}

TEST_CASE("duplicate or empty category lists are rejected") {
  CHECK_THROWS_AS(corpus_from_string(R"({"categories": [], "sentences": []})"), ValidationError);
  CHECK_THROWS_AS(
      corpus_from_string(R"({"categories": ["A", "A"], "sentences": []})"), ValidationError);
}

TEST_CASE("corpus at benchmark scale loads with counts preserved") {
  // Shape of the largest restaurant split: 1315 sentences, 1654 aspect tuples.
  nlohmann::json doc;
  doc["categories"] = {"C0", "C1", "C2", "C3"};
  const std::size_t sentence_count = 1315;
  const std::size_t aspect_total = 1654;
  std::size_t written = 0;
  for (std::size_t i = 0; i < sentence_count; ++i) {
    nlohmann::json s;
    s["id"] = "r" + std::to_string(i);
    s["tokens"] = {"w0", "w1", "w2", "w3", "w4", "w5"};
    nlohmann::json anns = nlohmann::json::array();
    const std::size_t here = std::min<std::size_t>(
        aspect_total - written, i + 1 < sentence_count ? (i % 2) + 1 : aspect_total - written);
    for (std::size_t a = 0; a < here; ++a) {
      anns.push_back({{"span", {2 * a, 2 * a}},
                      {"kind", "aspect"},
                      {"category", "C" + std::to_string((i + a) % 4)}});
    }
    written += here;
    s["annotations"] = anns;
    doc["sentences"].push_back(s);
  }
  REQUIRE(written == aspect_total);
  Corpus c = parse_corpus_json(doc);
  CHECK(c.sentences.size() == sentence_count);
  std::size_t aspects = 0;
  for (const auto& s : c.sentences)
    for (const auto& a : s.annotations) aspects += a.kind == TermKind::aspect ? 1 : 0;
  CHECK(aspects == aspect_total);
}

TEST_CASE("encode_gold produces the documented channels") {
  Corpus c = corpus_from_string(kSmallCorpus);
  GoldChannels g = encode_gold(c.sentences[0], 2);
  // channel (FOOD, aspect) = [O, B, O, O]
  CHECK(g.aspect[0] == std::vector<Bio>{Bio::O, Bio::B, Bio::O, Bio::O});
  // channel (FOOD, opinion) = [O, O, O, B]
  CHECK(g.opinion[0] == std::vector<Bio>{Bio::O, Bio::O, Bio::O, Bio::B});
  // all SERVICE channels O
  CHECK(g.aspect[1] == std::vector<Bio>(4, Bio::O));
  CHECK(g.opinion[1] == std::vector<Bio>(4, Bio::O));
}

TEST_CASE("encode_gold without annotations and with multi-token spans") {
  Sentence bare;
  bare.id = "b";
  bare.tokens = {"just", "words"};
  GoldChannels g = encode_gold(bare, 3);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(g.aspect[c] == std::vector<Bio>(2, Bio::O));
    CHECK(g.opinion[c] == std::vector<Bio>(2, Bio::O));
    CHECK_FALSE(g.present[c]);
  }

  Sentence multi;
  multi.id = "m";
  multi.tokens = {"a", "b", "c", "d"};
  multi.annotations = {{1, 2, TermKind::aspect, 0}};
  GoldChannels gm = encode_gold(multi, 1);
  CHECK(gm.aspect[0] == std::vector<Bio>{Bio::O, Bio::B, Bio::I, Bio::O});
}

TEST_CASE("one-hot targets are well-formed") {
  Corpus c = corpus_from_string(kSmallCorpus);
  GoldChannels g = encode_gold(c.sentences[0], 2);
  for (std::size_t cat = 0; cat < 2; ++cat) {
    Tensor t = g.onehot(cat, TermKind::aspect);
    for (std::size_t j = 0; j < t.dim(1); ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < 3; ++i) sum += t.at2(i, j);
      CHECK(sum == 1.0);
    }
  }
}

TEST_CASE("sentence labels derive from any non-O token") {
  Sentence s;
  s.id = "d";
  s.tokens = {"x", "y", "z"};
  s.annotations = {{0, 0, TermKind::aspect, 1}};
  GoldChannels g = encode_gold(s, 3);
  auto labels = derive_sentence_labels(g);
  CHECK_FALSE(labels[0]);
  CHECK(labels[1]);
  CHECK_FALSE(labels[2]);
  CHECK(labels == std::vector<bool>(g.present));

  Sentence two;
  two.id = "two-cats";
  two.tokens = {"soup", "with", "nice", "service"};
  two.annotations = {{0, 0, TermKind::aspect, 0}, {3, 3, TermKind::aspect, 2},
                     {2, 2, TermKind::opinion, 2}};
  auto both = derive_sentence_labels(encode_gold(two, 3));
  CHECK(both == std::vector<bool>{true, false, true});
}

TEST_CASE("gold round trip reproduces the annotation set") {
  Rng rng(55);
  for (int round = 0; round < 40; ++round) {
    Sentence s;
    s.id = "rt" + std::to_string(round);
    const std::size_t n = 4 + rng.below(8);
    for (std::size_t j = 0; j < n; ++j) s.tokens.push_back("tok" + std::to_string(j));
    const std::size_t c_count = 1 + rng.below(3);
    // Non-adjacent spans per (kind, category): adjacent same-kind spans decode
    // as one B(I)* run and are not expressible in BIO.
    for (std::size_t c = 0; c < c_count; ++c) {
      for (int kind = 0; kind < 2; ++kind) {
        std::size_t cursor = 0;
        while (cursor + 1 < n && rng.bernoulli(0.55)) {
          const std::size_t start = cursor + rng.below(2);
          const std::size_t end = std::min(n - 1, start + rng.below(3));
          s.annotations.push_back(
              {start, end, kind == 0 ? TermKind::aspect : TermKind::opinion, c});
          cursor = end + 2;
        }
      }
    }
    GoldChannels g = encode_gold(s, c_count);
    std::vector<TermSpan> decoded = spans_from_gold(g);
    std::set<Annotation> want(s.annotations.begin(), s.annotations.end());
    std::set<Annotation> got;
    for (const auto& t : decoded) got.insert({t.start, t.end, t.kind, t.category});
    CHECK(want == got);
  }
}

TEST_CASE("embedding file parsing") {
  auto dir = testutil::temp_dir("emb");
  auto path = dir / "vecs.txt";
  testutil::write_file(path, "2 3\na 1 2 3\nb 4 5 6\n");
  EmbeddingTable t = load_embeddings(path.string());
  CHECK(t.dimension() == 3);
  CHECK(t.size() == 2);
  CHECK(t.lookup("a") == std::vector<double>{1, 2, 3});
  CHECK(t.lookup("absent") == std::vector<double>{0, 0, 0});

  auto bad = dir / "bad.txt";
  testutil::write_file(bad, "2 3\na 1 2 3\nb 4 5\n");
  CHECK_THROWS_WITH_AS(load_embeddings(bad.string()), doctest::Contains("line 3"), ParseError);

  auto dup = dir / "dup.txt";
  testutil::write_file(dup, "3 2\na 1 2\na 3 4\nb 5 6\n");
  EmbeddingTable td = load_embeddings(dup.string());
  CHECK(td.duplicate_count() == 1);
  CHECK(td.lookup("a") == std::vector<double>{3, 4});  // last wins
  CHECK(td.size() == 2);
}

TEST_CASE("unk row overrides the zero fallback") {
  auto dir = testutil::temp_dir("unk");
  auto path = dir / "vecs.txt";
  testutil::write_file(path, "2 2\n<unk> 9 9\nb 1 1\n");
  EmbeddingTable t = load_embeddings(path.string());
  CHECK(t.lookup("missing") == std::vector<double>{9, 9});
}

TEST_CASE("embed builds column matrices with UNK fallback") {
  EmbeddingTable t(2);
  t.insert("a", {1, 2});
  Tensor x = t.embed({"a", "zzz", "a"});
  CHECK(x.shape() == Shape{2, 3});
  CHECK(x.at2(0, 0) == 1.0);
  CHECK(x.at2(1, 0) == 2.0);
  CHECK(x.at2(0, 1) == 0.0);
  CHECK(x.at2(1, 1) == 0.0);
  CHECK_THROWS_AS(t.embed({}), ContractError);

  Tensor one = t.embed({"a"});
  CHECK(one.shape() == Shape{2, 1});
}

TEST_SUITE_END();
