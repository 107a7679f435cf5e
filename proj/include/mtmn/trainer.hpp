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

#ifndef MTMN_TRAINER_HPP_
#define MTMN_TRAINER_HPP_

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtmn/evaluator.hpp"
#include "mtmn/model.hpp"

namespace mtmn {

// ---------------------------------------------------------------------------
// rmsprop
// ---------------------------------------------------------------------------

/// One elementwise rmsprop update:
///   cache <- rho * cache + (1 - rho) * grad^2
///   value <- value - lr * grad / (sqrt(cache) + eps)
inline void rmsprop_update(Tensor& value, const Tensor& grad, Tensor& cache, double lr, double rho,
                           double eps) {
  require_same_shape(value, grad, "rmsprop_update");
  require_same_shape(value, cache, "rmsprop_update");
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = grad[i];
    cache[i] = rho * cache[i] + (1.0 - rho) * g * g;
    value[i] -= lr * g / (std::sqrt(cache[i]) + eps);
  }
}

/// Per-parameter moving-average caches keyed by parameter name.
class RmsProp {
 public:
  explicit RmsProp(double lr = 0.001, double rho = 0.9, double eps = 1e-8)
      : lr_(lr), rho_(rho), eps_(eps) {}

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

  void step(ParamStore& params) {
    for (auto& p : params.all()) {
      if (!p.trainable) continue;
      auto [it, inserted] = cache_.try_emplace(p.name, Tensor::zeros(p.value().shape()));
      rmsprop_update(p.value(), p.grad(), it->second, lr_, rho_, eps_);
    }
  }

  const Tensor* cache_of(const std::string& name) const {
    auto it = cache_.find(name);
    return it == cache_.end() ? nullptr : &it->second;
  }

 private:
  double lr_, rho_, eps_;
  std::unordered_map<std::string, Tensor> cache_;
};

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------
//
// A checkpoint is a plain-text manifest plus a flat binary blob of 64-bit
// little-endian floats at <path>.bin, laid out in manifest order.

constexpr const char* kCheckpointMagic = "mtmn-checkpoint v1";

namespace detail {

inline void write_le_doubles(std::ofstream& out, const Tensor& t) {
  // Assumes a little-endian host; asserted once at checkpoint save.
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
}

inline bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  return *reinterpret_cast<const std::uint8_t*>(&probe) == 1;
}

inline std::string shape_tag(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out;
}

inline Shape parse_shape_tag(const std::string& tag) {
  Shape shape;
  std::size_t pos = 0;
  while (pos < tag.size()) {
    std::size_t next = tag.find('x', pos);
    if (next == std::string::npos) next = tag.size();
    shape.push_back(static_cast<std::size_t>(std::stoull(tag.substr(pos, next - pos))));
    pos = next + 1;
  }
  return shape;
}

}  // namespace detail

inline std::map<std::string, std::string> model_config_echo(const Model& model) {
  const ModelConfig& c = model.config();
  std::map<std::string, std::string> kv;
  kv["embedding_dim"] = std::to_string(c.embedding_dim);
  kv["hidden_dim"] = std::to_string(c.hidden_dim);
  kv["k_interactions"] = std::to_string(c.interactions);
  kv["factor_rank"] = std::to_string(c.factor_rank);
  kv["layers"] = std::to_string(c.layers);
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", c.lambda);
  kv["lambda"] = buf;
  std::snprintf(buf, sizeof(buf), "%.17g", c.dropout_rate);
  kv["dropout"] = buf;
  kv["train_embeddings"] = c.train_embeddings ? "true" : "false";
  kv["tensor_sharing"] = to_string(c.sharing.tensor_sharing);
  kv["feature_sharing"] = c.sharing.feature_sharing ? "true" : "false";
  kv["auxiliary_task"] = c.sharing.auxiliary_task ? "true" : "false";
  return kv;
}

/// Writes `<path>` (manifest) and `<path>.bin` (parameter blob).
inline void save_checkpoint(const Model& model, const std::string& path) {
  if (!detail::host_is_little_endian())
    throw CheckpointError("checkpoint format requires a little-endian host");
  std::ofstream manifest(path);
  if (!manifest) throw ConfigError("cannot write checkpoint manifest: " + path);
  std::ofstream blob(path + ".bin", std::ios::binary);
  if (!blob) throw ConfigError("cannot write checkpoint blob: " + path + ".bin");

  manifest << kCheckpointMagic << "\n";
  manifest << "seed " << model.seed() << "\n";
  for (const auto& [k, v] : model_config_echo(model)) manifest << "config " << k << "=" << v << "\n";
  for (const auto& c : model.categories()) manifest << "category " << c << "\n";
  if (model.config().train_embeddings)
    for (const auto& t : model.embeddings().tokens()) manifest << "vocab " << t << "\n";
  std::size_t offset = 0;
  for (const auto& p : model.params().all()) {
    manifest << "param " << p.name << " " << detail::shape_tag(p.value().shape()) << " " << offset
             << "\n";
    detail::write_le_doubles(blob, p.value());
    offset += p.value().size() * sizeof(double);
  }
  manifest << "end\n";
}

struct CheckpointManifest {
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;
  std::vector<std::string> categories;
  std::vector<std::string> vocab;
  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset = 0;
  };
  std::vector<Entry> entries;
};

inline CheckpointManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint manifest: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic)
    throw CheckpointError("checkpoint " + path + ": unsupported format/version \"" + line + "\"");
  CheckpointManifest m;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "seed") {
      ls >> m.seed;
    } else if (tag == "config") {
      std::string kv;
      ls >> kv;
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos)
        throw CheckpointError("checkpoint " + path + ": bad config line \"" + line + "\"");
      m.config[kv.substr(0, eq)] = kv.substr(eq + 1);
    } else if (tag == "category") {
      std::string rest;
      std::getline(ls, rest);
      m.categories.push_back(rest.empty() ? rest : rest.substr(1));
    } else if (tag == "vocab") {
      std::string rest;
      std::getline(ls, rest);
      m.vocab.push_back(rest.empty() ? rest : rest.substr(1));
    } else if (tag == "param") {
      CheckpointManifest::Entry e;
      std::string shape_tag;
      if (!(ls >> e.name >> shape_tag >> e.offset))
        throw CheckpointError("checkpoint " + path + ": bad param line \"" + line + "\"");
      e.shape = detail::parse_shape_tag(shape_tag);
      m.entries.push_back(std::move(e));
    } else if (tag == "end") {
      ended = true;
      break;
    } else {
      throw CheckpointError("checkpoint " + path + ": unknown manifest tag \"" + tag + "\"");
    }
  }
  if (!ended) throw CheckpointError("checkpoint " + path + ": truncated manifest");
  return m;
}

/// Loads parameter values into an existing model. Every manifest entry must
/// match the model's parameter of the same name in shape, and vice versa.
inline void load_checkpoint_into(Model& model, const std::string& path) {
  const CheckpointManifest m = read_manifest(path);
  if (m.categories != model.categories())
    throw CheckpointError("checkpoint " + path + ": category set does not match the model");
  if (m.entries.size() != model.params().count())
    throw CheckpointError("checkpoint " + path + ": has " + std::to_string(m.entries.size()) +
                          " parameters, model has " + std::to_string(model.params().count()));
  std::ifstream blob(path + ".bin", std::ios::binary);
  if (!blob) throw ConfigError("cannot open checkpoint blob: " + path + ".bin");
  for (const auto& e : m.entries) {
    if (!model.params().contains(e.name))
      throw CheckpointError("checkpoint " + path + ": unknown parameter \"" + e.name + "\"");
    Param& p = model.params().at(e.name);
    if (p.value().shape() != e.shape)
      throw CheckpointError("checkpoint " + path + ": parameter \"" + e.name + "\" has shape " +
                            shape_str(e.shape) + ", model expects " +
                            shape_str(p.value().shape()));
    blob.seekg(static_cast<std::streamoff>(e.offset));
    blob.read(reinterpret_cast<char*>(p.value().data()),
              static_cast<std::streamsize>(p.value().size() * sizeof(double)));
    if (!blob)
      throw CheckpointError("checkpoint " + path + ": blob truncated at \"" + e.name + "\"");
  }
}

inline ModelConfig config_from_manifest(const CheckpointManifest& m) {
  ModelConfig cfg;
  auto get = [&](const char* key) -> const std::string& {
    auto it = m.config.find(key);
    if (it == m.config.end())
      throw CheckpointError(std::string("checkpoint manifest misses config key ") + key);
    return it->second;
  };
  cfg.embedding_dim = std::stoull(get("embedding_dim"));
  cfg.hidden_dim = std::stoull(get("hidden_dim"));
  cfg.interactions = std::stoull(get("k_interactions"));
  cfg.factor_rank = std::stoull(get("factor_rank"));
  cfg.layers = std::stoull(get("layers"));
  cfg.lambda = std::stod(get("lambda"));
  cfg.dropout_rate = std::stod(get("dropout"));
  cfg.train_embeddings = get("train_embeddings") == "true";
  cfg.sharing.tensor_sharing = tensor_sharing_from_string(get("tensor_sharing"));
  cfg.sharing.feature_sharing = get("feature_sharing") == "true";
  cfg.sharing.auxiliary_task = get("auxiliary_task") == "true";
  return cfg;
}

/// Reconstructs a model from a checkpoint. The embedding table must match the
/// training-time dimension; with train_embeddings the stored matrix wins.
inline std::unique_ptr<Model> load_checkpoint(const std::string& path,
                                              const EmbeddingTable& table) {
  const CheckpointManifest m = read_manifest(path);
  const ModelConfig cfg = config_from_manifest(m);
  auto model = std::make_unique<Model>(cfg, m.categories, table, m.seed);
  load_checkpoint_into(*model, path);
  return model;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double learning_rate = 0.001;
  double rho = 0.9;
  double epsilon = 1e-8;
  bool shuffle = true;
  /// Off by default: the moving-average decay above is the 0.9 "decay"; this
  /// extra multiplicative schedule is available but not part of the default
  /// configuration.
  double lr_decay = 1.0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double token_loss = 0.0;     // epoch mean per sentence
  double sentence_loss = 0.0;  // epoch mean per sentence (0 with auxiliary off)
  double total_loss = 0.0;     // epoch mean per sentence
};

struct TrainResult {
  std::vector<EpochLog> log;
  double best_validation_f1 = -1.0;  // mean of ASC and OPC micro-F1
  std::size_t best_epoch = 0;
};

/// Per-sentence (batch size 1) training with rmsprop. Gradients are zeroed
/// before each sentence. When a validation corpus is given, the checkpoint at
/// the best validation F1 (mean of ASC and OPC) is kept at
/// `best_checkpoint_path`.
inline TrainResult train(Model& model, const Corpus& corpus, const TrainConfig& cfg,
                         const Corpus* validation = nullptr,
                         const std::string& best_checkpoint_path = "") {
  if (corpus.sentences.empty()) throw ContractError("train: corpus is empty");
  if (corpus.categories != model.categories())
    throw ShapeError("train: corpus category set does not match the model's");

  std::vector<GoldChannels> gold;
  gold.reserve(corpus.sentences.size());
  for (const auto& s : corpus.sentences)
    gold.push_back(encode_gold(s, corpus.category_count()));

  RmsProp optimizer(cfg.learning_rate, cfg.rho, cfg.epsilon);
  Rng rng(mix_seed(cfg.seed, 1));  // shuffle order + dropout masks
  TrainResult result;

  std::vector<std::size_t> order(corpus.sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) rng.shuffle(order);
    double sum_tok = 0.0, sum_sen = 0.0, sum_total = 0.0;
    for (std::size_t idx : order) {
      const Sentence& s = corpus.sentences[idx];
      model.zero_grads();
      ForwardOptions opt;
      opt.training = true;
      opt.rng = &rng;
      ForwardTrace trace = model.forward(s.tokens, &gold[idx], opt);
      if (!std::isfinite(trace.report.total))
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + ", sentence " +
                    s.id);
      backward(trace.loss);
      optimizer.step(model.params());
      sum_tok += trace.report.token;
      sum_sen += trace.report.sentence;
      sum_total += trace.report.total;
    }
    const double inv = 1.0 / static_cast<double>(corpus.sentences.size());
    result.log.push_back({epoch, sum_tok * inv, sum_sen * inv, sum_total * inv});
    if (cfg.lr_decay != 1.0)
      optimizer.set_learning_rate(optimizer.learning_rate() * cfg.lr_decay);

    if (validation) {
      const EvalReport r = evaluate(model, *validation);
      const double f1 = 0.5 * (r.asc.f1 + r.opc.f1);
      if (f1 > result.best_validation_f1) {
        result.best_validation_f1 = f1;
        result.best_epoch = epoch;
        if (!best_checkpoint_path.empty()) save_checkpoint(model, best_checkpoint_path);
      }
    }
  }
  return result;
}

inline void write_loss_log(const TrainResult& result, const std::string& path,
                           const std::map<std::string, std::string>& config_echo) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write loss log: " + path);
  for (const auto& [k, v] : config_echo) out << "# " << k << "=" << v << "\n";
  out << "epoch,L_tok,L_sen,L\n";
  char buf[160];
  for (const auto& e : result.log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e.epoch, e.token_loss,
                  e.sentence_loss, e.total_loss);
    out << buf;
  }
}

}  // namespace mtmn

#endif  // MTMN_TRAINER_HPP_
