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

#ifndef MTMN_CONFIG_HPP_
#define MTMN_CONFIG_HPP_

#include <fstream>
#include <map>
#include <set>
#include <string>

#include "mtmn/model.hpp"
#include "mtmn/trainer.hpp"

namespace mtmn {

/// Everything a run needs: model and training hyperparameters plus file
/// paths. Populated from a key=value config file and/or CLI overrides.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string corpus_path;
  std::string val_corpus_path;
  std::string embeddings_path;
  std::string checkpoint_path;
  std::string out_dir = ".";
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key " + key + ": expected a boolean, got \"" + v + "\"");
}

}  // namespace detail

/// Applies one key to the config. Unknown keys are rejected.
inline void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "corpus") cfg.corpus_path = value;
    else if (key == "val_corpus") cfg.val_corpus_path = value;
    else if (key == "embeddings") cfg.embeddings_path = value;
    else if (key == "checkpoint") cfg.checkpoint_path = value;
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "embedding_dim") cfg.model.embedding_dim = std::stoull(value);
    else if (key == "hidden_dim") cfg.model.hidden_dim = std::stoull(value);
    else if (key == "k_interactions") cfg.model.interactions = std::stoull(value);
    else if (key == "factor_rank") cfg.model.factor_rank = std::stoull(value);
    else if (key == "layers") cfg.model.layers = std::stoull(value);
    else if (key == "lambda") cfg.model.lambda = std::stod(value);
    else if (key == "dropout") cfg.model.dropout_rate = std::stod(value);
    else if (key == "train_embeddings") cfg.model.train_embeddings = detail::parse_bool(key, value);
    else if (key == "tensor_sharing") cfg.model.sharing.tensor_sharing = tensor_sharing_from_string(value);
    else if (key == "feature_sharing") cfg.model.sharing.feature_sharing = detail::parse_bool(key, value);
    else if (key == "auxiliary_task") cfg.model.sharing.auxiliary_task = detail::parse_bool(key, value);
    else if (key == "epochs") cfg.train.epochs = std::stoull(value);
    else if (key == "seed") cfg.train.seed = std::stoull(value);
    else if (key == "lr") cfg.train.learning_rate = std::stod(value);
    else if (key == "rho") cfg.train.rho = std::stod(value);
    else if (key == "epsilon") cfg.train.epsilon = std::stod(value);
    else if (key == "shuffle") cfg.train.shuffle = detail::parse_bool(key, value);
    else if (key == "lr_decay") cfg.train.lr_decay = std::stod(value);
    else throw ConfigError("unknown config key: " + key);
  } catch (const std::invalid_argument&) {
    throw ConfigError("config key " + key + ": cannot parse value \"" + value + "\"");
  } catch (const std::out_of_range&) {
    throw ConfigError("config key " + key + ": value out of range \"" + value + "\"");
  }
}

/// Flat key=value file. Blank lines and '#' comments are skipped; [section]
/// headers are organizational only. Keys are global and must be known.
inline void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') continue;  // section header
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config " + path + " line " + std::to_string(line_no) +
                        ": expected key=value, got \"" + line + "\"");
    apply_config_key(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
}

/// Effective configuration, echoed into every output artifact.
inline std::map<std::string, std::string> config_echo(const RunConfig& cfg) {
  std::map<std::string, std::string> kv;
  char buf[48];
  auto put_num = [&](const char* k, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    kv[k] = buf;
  };
  kv["corpus"] = cfg.corpus_path;
  kv["val_corpus"] = cfg.val_corpus_path;
  kv["embeddings"] = cfg.embeddings_path;
  kv["checkpoint"] = cfg.checkpoint_path;
  kv["out_dir"] = cfg.out_dir;
  kv["embedding_dim"] = std::to_string(cfg.model.embedding_dim);
  kv["hidden_dim"] = std::to_string(cfg.model.hidden_dim);
  kv["k_interactions"] = std::to_string(cfg.model.interactions);
  kv["factor_rank"] = std::to_string(cfg.model.factor_rank);
  kv["layers"] = std::to_string(cfg.model.layers);
  put_num("lambda", cfg.model.lambda);
  put_num("dropout", cfg.model.dropout_rate);
  kv["train_embeddings"] = cfg.model.train_embeddings ? "true" : "false";
  kv["tensor_sharing"] = to_string(cfg.model.sharing.tensor_sharing);
  kv["feature_sharing"] = cfg.model.sharing.feature_sharing ? "true" : "false";
  kv["auxiliary_task"] = cfg.model.sharing.auxiliary_task ? "true" : "false";
  kv["epochs"] = std::to_string(cfg.train.epochs);
  kv["seed"] = std::to_string(cfg.train.seed);
  put_num("lr", cfg.train.learning_rate);
  put_num("rho", cfg.train.rho);
  put_num("epsilon", cfg.train.epsilon);
  kv["shuffle"] = cfg.train.shuffle ? "true" : "false";
  put_num("lr_decay", cfg.train.lr_decay);
  return kv;
}

}  // namespace mtmn

#endif  // MTMN_CONFIG_HPP_
