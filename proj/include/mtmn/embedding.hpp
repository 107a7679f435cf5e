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

#ifndef MTMN_EMBEDDING_HPP_
#define MTMN_EMBEDDING_HPP_

#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtmn/tensor.hpp"

namespace mtmn {

/// Word vector table. Lookups of unknown tokens return the UNK vector, which
/// is all zeros unless the file carried an "<unk>" row.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dimension)
      : dimension_(dimension), unk_(dimension, 0.0) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return tokens_.size(); }
  std::size_t duplicate_count() const { return duplicates_; }

  void insert(const std::string& token, std::vector<double> vec) {
    if (vec.size() != dimension_)
      throw ShapeError("embedding for \"" + token + "\" has " + std::to_string(vec.size()) +
                       " values, expected " + std::to_string(dimension_));
    auto it = index_.find(token);
    if (it != index_.end()) {
      vectors_[it->second] = std::move(vec);  // last occurrence wins
      ++duplicates_;
    } else {
      index_[token] = tokens_.size();
      tokens_.push_back(token);
      vectors_.push_back(std::move(vec));
    }
    if (token == "<unk>") unk_ = vectors_[index_[token]];
  }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  /// Row index, or npos for out-of-vocabulary tokens.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t row_of(const std::string& token) const {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    auto unk = index_.find("<unk>");
    return unk != index_.end() ? unk->second : npos;
  }

  const std::vector<double>& lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it != index_.end() ? vectors_[it->second] : unk_;
  }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<double>& vector_at(std::size_t row) const { return vectors_[row]; }

  /// Column j holds the vector of token j, with the UNK fallback for
  /// out-of-vocabulary tokens.
  Tensor embed(const std::vector<std::string>& tokens) const {
    if (tokens.empty()) throw ContractError("embed: empty sentence");
    Tensor x({dimension_, tokens.size()});
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      const auto& v = lookup(tokens[j]);
      for (std::size_t i = 0; i < dimension_; ++i) x.at2(i, j) = v[i];
    }
    return x;
  }

  /// All vectors as one [vocab x dim] matrix (for the trainable-table mode).
  Tensor as_matrix() const {
    Tensor m({tokens_.size(), dimension_});
    for (std::size_t r = 0; r < vectors_.size(); ++r)
      for (std::size_t i = 0; i < dimension_; ++i) m.at2(r, i) = vectors_[r][i];
    return m;
  }

 private:
  std::size_t dimension_ = 0;
  std::vector<std::string> tokens_;
  std::vector<std::vector<double>> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> unk_;
  std::size_t duplicates_ = 0;
};

/// Plain-text format: header "V D", then V lines "token v1 ... vD",
/// single-space separated.
inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open embedding file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("embeddings " + path + ": empty file");
  std::istringstream header(line);
  long long vocab = 0, dim = 0;
  if (!(header >> vocab >> dim) || vocab < 0 || dim <= 0)
    throw ParseError("embeddings " + path + ": bad header \"" + line + "\"");
  EmbeddingTable table(static_cast<std::size_t>(dim));
  for (long long row = 0; row < vocab; ++row) {
    const std::size_t line_no = static_cast<std::size_t>(row) + 2;
    if (!std::getline(in, line))
      throw ParseError("embeddings " + path + ": unexpected end of file at line " +
                       std::to_string(line_no));
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token))
      throw ParseError("embeddings " + path + ": blank row at line " + std::to_string(line_no));
    std::vector<double> vec;
    vec.reserve(static_cast<std::size_t>(dim));
    double v;
    while (ls >> v) vec.push_back(v);
    if (vec.size() != static_cast<std::size_t>(dim))
      throw ParseError("embeddings " + path + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(vec.size()) + " values, expected " + std::to_string(dim));
    table.insert(token, std::move(vec));
  }
  return table;
}

inline void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write embedding file: " + path);
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
}

}  // namespace mtmn

#endif  // MTMN_EMBEDDING_HPP_
