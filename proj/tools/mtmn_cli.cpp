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

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtmn/config.hpp"
#include "mtmn/evaluator.hpp"
#include "mtmn/gradcheck.hpp"
#include "mtmn/inspect.hpp"
#include "mtmn/trainer.hpp"

namespace {

using namespace mtmn;
namespace fs = std::filesystem;

struct CliOverrides {
  std::string config_path;
  std::string corpus, val_corpus, embeddings, checkpoint, out_dir;
  long long seed = -1, epochs = -1, layers = -1, k_interactions = -1, factor_rank = -1;
  double lambda = -1.0, dropout = -1.0, lr = -1.0;
  bool no_tensor_sharing = false, single_shared_tensor = false;
  bool no_feature_sharing = false, no_auxiliary = false;
  bool no_shuffle = false, train_embeddings = false;
};

void add_common_options(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "key=value configuration file");
  cmd->add_option("--corpus", o.corpus, "corpus JSON path");
  cmd->add_option("--val-corpus", o.val_corpus, "validation corpus JSON path");
  cmd->add_option("--embeddings", o.embeddings, "embedding text file path");
  cmd->add_option("--checkpoint", o.checkpoint, "checkpoint path");
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--seed", o.seed, "rng seed");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--lambda", o.lambda, "token-loss weight");
  cmd->add_option("--dropout", o.dropout, "dropout rate");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--layers", o.layers, "attention layers");
  cmd->add_option("--k-interactions", o.k_interactions, "bilinear interactions per tensor");
  cmd->add_option("--factor-rank", o.factor_rank, "shared basis count m");
  cmd->add_flag("--no-tensor-sharing", o.no_tensor_sharing,
                "independent interaction tensors per category");
  cmd->add_flag("--single-shared-tensor", o.single_shared_tensor,
                "one interaction tensor set for all categories");
  cmd->add_flag("--no-feature-sharing", o.no_feature_sharing, "disable cross-task feature mixing");
  cmd->add_flag("--no-auxiliary", o.no_auxiliary, "disable the sentence-level task");
  cmd->add_flag("--no-shuffle", o.no_shuffle, "keep corpus order during training");
  cmd->add_flag("--train-embeddings", o.train_embeddings, "unfreeze the embedding table");
}

RunConfig resolve_config(const CliOverrides& o, RunConfig rc = {}) {
  if (!o.config_path.empty()) load_config_file(rc, o.config_path);
  if (!o.corpus.empty()) rc.corpus_path = o.corpus;
  if (!o.val_corpus.empty()) rc.val_corpus_path = o.val_corpus;
  if (!o.embeddings.empty()) rc.embeddings_path = o.embeddings;
  if (!o.checkpoint.empty()) rc.checkpoint_path = o.checkpoint;
  if (!o.out_dir.empty()) rc.out_dir = o.out_dir;
  if (o.seed >= 0) rc.train.seed = static_cast<std::uint64_t>(o.seed);
  if (o.epochs >= 0) rc.train.epochs = static_cast<std::size_t>(o.epochs);
  if (o.lambda >= 0.0) rc.model.lambda = o.lambda;
  if (o.dropout >= 0.0) rc.model.dropout_rate = o.dropout;
  if (o.lr >= 0.0) rc.train.learning_rate = o.lr;
  if (o.layers >= 0) rc.model.layers = static_cast<std::size_t>(o.layers);
  if (o.k_interactions >= 0) rc.model.interactions = static_cast<std::size_t>(o.k_interactions);
  if (o.factor_rank >= 0) rc.model.factor_rank = static_cast<std::size_t>(o.factor_rank);
  if (o.no_tensor_sharing && o.single_shared_tensor)
    throw ConfigError("--no-tensor-sharing and --single-shared-tensor are mutually exclusive");
  if (o.no_tensor_sharing) rc.model.sharing.tensor_sharing = TensorSharing::independent;
  if (o.single_shared_tensor) rc.model.sharing.tensor_sharing = TensorSharing::single_shared;
  if (o.no_feature_sharing) rc.model.sharing.feature_sharing = false;
  if (o.no_auxiliary) rc.model.sharing.auxiliary_task = false;
  if (o.no_shuffle) rc.train.shuffle = false;
  if (o.train_embeddings) rc.model.train_embeddings = true;
  return rc;
}

void require_path(const std::string& value, const char* what) {
  if (value.empty()) throw ConfigError(std::string("missing required path: ") + what);
}

fs::path prepare_out_dir(const RunConfig& rc) {
  fs::path dir = rc.out_dir.empty() ? "." : rc.out_dir;
  fs::create_directories(dir);
  return dir;
}

void write_echo_header(std::ofstream& out, const std::map<std::string, std::string>& echo) {
  for (const auto& [k, v] : echo) out << "# " << k << "=" << v << "\n";
}

nlohmann::json echo_json(const std::map<std::string, std::string>& echo) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : echo) j[k] = v;
  return j;
}

/// Model plus the embedding table it references.
struct LoadedModel {
  std::unique_ptr<EmbeddingTable> table;
  std::unique_ptr<Model> model;
};

LoadedModel open_checkpoint(const std::string& checkpoint_path,
                            const std::string& embeddings_path) {
  require_path(checkpoint_path, "--checkpoint");
  const CheckpointManifest manifest = read_manifest(checkpoint_path);
  const ModelConfig cfg = config_from_manifest(manifest);
  LoadedModel out;
  if (cfg.train_embeddings && !manifest.vocab.empty()) {
    // The stored matrix carries the values; the table only maps tokens to rows.
    out.table = std::make_unique<EmbeddingTable>(cfg.embedding_dim);
    for (const auto& token : manifest.vocab)
      out.table->insert(token, std::vector<double>(cfg.embedding_dim, 0.0));
  } else {
    require_path(embeddings_path, "--embeddings");
    out.table = std::make_unique<EmbeddingTable>(load_embeddings(embeddings_path));
  }
  out.model = std::make_unique<Model>(cfg, manifest.categories, *out.table, manifest.seed);
  load_checkpoint_into(*out.model, checkpoint_path);
  return out;
}

int cmd_train(const CliOverrides& o) {
  RunConfig rc = resolve_config(o);
  require_path(rc.corpus_path, "--corpus");
  require_path(rc.embeddings_path, "--embeddings");
  const fs::path out_dir = prepare_out_dir(rc);
  if (rc.checkpoint_path.empty()) rc.checkpoint_path = (out_dir / "checkpoint.ckpt").string();

  const Corpus corpus = load_corpus(rc.corpus_path);
  const EmbeddingTable table = load_embeddings(rc.embeddings_path);
  Model model(rc.model, corpus.categories, table, rc.train.seed);
  std::cout << "training on " << corpus.sentences.size() << " sentences, "
            << corpus.category_count() << " categories, " << model.parameter_count()
            << " parameters\n";

  std::unique_ptr<Corpus> validation;
  if (!rc.val_corpus_path.empty())
    validation = std::make_unique<Corpus>(load_corpus(rc.val_corpus_path));
  const std::string best_path = validation ? rc.checkpoint_path + ".best" : "";
  TrainResult result = train(model, corpus, rc.train, validation.get(), best_path);

  save_checkpoint(model, rc.checkpoint_path);
  write_loss_log(result, (out_dir / "loss_log.csv").string(), config_echo(rc));
  std::cout << "checkpoint: " << rc.checkpoint_path << "\n"
            << "loss log:   " << (out_dir / "loss_log.csv").string() << "\n";
  if (validation) {
    std::cout << "best validation F1 " << result.best_validation_f1 << " at epoch "
              << result.best_epoch << " (" << best_path << ")\n";
  }
  if (!result.log.empty()) {
    const EpochLog& last = result.log.back();
    std::cout << "final epoch: L_tok " << last.token_loss << "  L_sen " << last.sentence_loss
              << "  L " << last.total_loss << "\n";
  }
  return 0;
}

int cmd_eval(const CliOverrides& o) {
  RunConfig rc = resolve_config(o);
  require_path(rc.corpus_path, "--corpus");
  const fs::path out_dir = prepare_out_dir(rc);
  LoadedModel loaded = open_checkpoint(rc.checkpoint_path, rc.embeddings_path);
  const Corpus corpus = load_corpus(rc.corpus_path);
  const EvalReport report = evaluate(*loaded.model, corpus);

  const std::string text = format_report_text(report);
  std::cout << text;
  std::ofstream txt(out_dir / "eval_report.txt");
  write_echo_header(txt, config_echo(rc));
  txt << text;
  nlohmann::json j = report_json(report);
  j["config"] = echo_json(config_echo(rc));
  std::ofstream js(out_dir / "eval_report.json");
  js << j.dump(2) << "\n";
  return 0;
}

int cmd_tag(const CliOverrides& o, const std::string& input_path) {
  RunConfig rc = resolve_config(o);
  const fs::path out_dir = prepare_out_dir(rc);
  LoadedModel loaded = open_checkpoint(rc.checkpoint_path, rc.embeddings_path);
  const std::vector<Sentence> sentences =
      load_tag_input(input_path, loaded.model->categories());

  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : sentences) {
    nlohmann::json js;
    js["id"] = s.id;
    js["tokens"] = s.tokens;
    js["spans"] = nlohmann::json::array();
    for (const TermSpan& span : tag_sentence(*loaded.model, s.tokens)) {
      std::string text = s.tokens[span.start];
      for (std::size_t j = span.start + 1; j <= span.end; ++j) text += " " + s.tokens[j];
      js["spans"].push_back({{"span", {span.start, span.end}},
                             {"kind", to_string(span.kind)},
                             {"category", loaded.model->categories()[span.category]},
                             {"text", text}});
    }
    out.push_back(js);
  }
  nlohmann::json doc;
  doc["config"] = echo_json(config_echo(rc));
  doc["sentences"] = out;
  std::ofstream js(out_dir / "tagged.json");
  js << doc.dump(2) << "\n";
  std::cout << "tagged " << sentences.size() << " sentences -> "
            << (out_dir / "tagged.json").string() << "\n";
  return 0;
}

int cmd_inspect(const CliOverrides& o) {
  RunConfig rc = resolve_config(o);
  require_path(rc.corpus_path, "--corpus");
  const fs::path out_dir = prepare_out_dir(rc);
  LoadedModel loaded = open_checkpoint(rc.checkpoint_path, rc.embeddings_path);
  const Corpus corpus = load_corpus(rc.corpus_path);
  if (corpus.categories != loaded.model->categories())
    throw ShapeError("inspect: corpus category set does not match the checkpoint's");

  std::ofstream out(out_dir / "attention.txt");
  write_echo_header(out, config_echo(rc));
  for (const auto& s : corpus.sentences) {
    ForwardTrace trace = loaded.model->forward(s.tokens);
    out << format_attention_dump(trace, s, corpus.categories) << "\n";
  }
  std::cout << "attention dump -> " << (out_dir / "attention.txt").string() << "\n";
  return 0;
}

int cmd_gradcheck(const CliOverrides& o, bool inject_error, long long sample) {
  // Checking every scalar twice per finite difference is only sensible at
  // small widths, so the command defaults to a small geometry; a config file
  // or explicit flags override it.
  RunConfig base;
  base.model.embedding_dim = 8;
  base.model.hidden_dim = 4;
  base.model.interactions = 2;
  base.model.factor_rank = 2;
  base.model.layers = 2;
  RunConfig rc = resolve_config(o, base);
  const fs::path out_dir = prepare_out_dir(rc);

  std::unique_ptr<EmbeddingTable> table;
  std::unique_ptr<Corpus> corpus;
  if (!rc.corpus_path.empty()) {
    require_path(rc.embeddings_path, "--embeddings");
    corpus = std::make_unique<Corpus>(load_corpus(rc.corpus_path));
    table = std::make_unique<EmbeddingTable>(load_embeddings(rc.embeddings_path));
  } else {
    // Self-contained fixture: three categories, one annotated sentence.
    corpus = std::make_unique<Corpus>();
    corpus->categories = {"C0", "C1", "C2"};
    Sentence s;
    s.id = "gradcheck";
    s.tokens = {"t0", "t1", "t2", "t3", "t4"};
    s.annotations = {{1, 1, TermKind::aspect, 0}, {3, 3, TermKind::opinion, 1}};
    corpus->sentences.push_back(s);
    table = std::make_unique<EmbeddingTable>(rc.model.embedding_dim);
    Rng vec_rng(rc.train.seed + 1);
    for (const auto& tok : corpus->sentences[0].tokens) {
      std::vector<double> v(rc.model.embedding_dim);
      for (auto& x : v) x = vec_rng.uniform(-0.5, 0.5);
      table->insert(tok, std::move(v));
    }
  }
  if (corpus->sentences.empty()) throw ConfigError("gradcheck: corpus has no sentences");

  rc.model.dropout_rate = 0.0;  // the check needs a deterministic loss
  Model model(rc.model, corpus->categories, *table, rc.train.seed);
  const Sentence& s = corpus->sentences.front();
  GoldChannels gold = encode_gold(s, corpus->category_count());

  auto build = [&]() { return model.forward(s.tokens, &gold).loss; };
  Rng sample_rng(rc.train.seed + 2);
  GradCheckReport report = finite_diff_check(
      model.params(), build, 1e-5, 1e-4, 1e-7,
      sample > 0 ? static_cast<std::size_t>(sample) : 0, sample > 0 ? &sample_rng : nullptr, 10);
  if (inject_error) {
    // Negative control: pretend one gradient came out wrong.
    report.failed += 1;
    if (!report.worst.empty()) report.worst.front().ok = false;
  }

  const std::string text = format_gradcheck(report);
  std::cout << text;
  std::ofstream out(out_dir / "gradcheck.txt");
  write_echo_header(out, config_echo(rc));
  out << text;
  std::cout << (report.passed() ? "PASS" : "FAIL") << "\n";
  return report.passed() ? 0 : 1;
}

int cmd_sweep(const CliOverrides& o, const std::vector<long long>& m_list) {
  RunConfig rc = resolve_config(o);
  require_path(rc.corpus_path, "--corpus");
  require_path(rc.embeddings_path, "--embeddings");
  if (m_list.empty()) throw ConfigError("sweep: --m-list must name at least one value");
  const fs::path out_dir = prepare_out_dir(rc);

  const Corpus corpus = load_corpus(rc.corpus_path);
  const EmbeddingTable table = load_embeddings(rc.embeddings_path);
  std::unique_ptr<Corpus> validation;
  if (!rc.val_corpus_path.empty())
    validation = std::make_unique<Corpus>(load_corpus(rc.val_corpus_path));
  const Corpus& eval_corpus = validation ? *validation : corpus;

  std::ofstream csv(out_dir / "sweep.csv");
  write_echo_header(csv, config_echo(rc));
  csv << "m,asc_f1,opc_f1,as_f1,op_f1\n";
  char buf[160];
  for (long long m : m_list) {
    if (m <= 0) throw ConfigError("sweep: factor rank must be positive");
    RunConfig run = rc;
    run.model.factor_rank = static_cast<std::size_t>(m);
    run.model.sharing.tensor_sharing = TensorSharing::factored;
    if (run.model.factor_rank >= corpus.category_count())
      csv << "# note: m=" << m << " is not below the category count C=" << corpus.category_count()
          << "\n";
    Model model(run.model, corpus.categories, table, run.train.seed);
    train(model, corpus, run.train);
    const EvalReport r = evaluate(model, eval_corpus);
    std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%.6f,%.6f\n", m, r.asc.f1, r.opc.f1, r.as.f1,
                  r.op.f1);
    csv << buf;
    std::cout << "m=" << m << " ASC " << r.asc.f1 << " OPC " << r.opc.f1 << "\n";
  }
  std::cout << "sweep table -> " << (out_dir / "sweep.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-task memory network for category-specific aspect/opinion extraction"};
  app.require_subcommand(1);

  CliOverrides train_opts, eval_opts, tag_opts, inspect_opts, grad_opts, sweep_opts;
  std::string tag_input;
  bool inject_error = false;
  long long grad_sample = 0;
  std::vector<long long> m_list;

  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common_options(train_cmd, train_opts);
  CLI::App* eval_cmd = app.add_subcommand("eval", "score a checkpoint against a gold corpus");
  add_common_options(eval_cmd, eval_opts);
  CLI::App* tag_cmd = app.add_subcommand("tag", "tag raw sentences with term spans");
  add_common_options(tag_cmd, tag_opts);
  tag_cmd->add_option("--input", tag_input, "sentences JSON path")->required();
  CLI::App* inspect_cmd =
      app.add_subcommand("inspect-attention", "dump attention weights and task similarities");
  inspect_cmd->alias("inspect");
  add_common_options(inspect_cmd, inspect_opts);
  CLI::App* grad_cmd =
      app.add_subcommand("gradcheck", "compare analytic gradients against finite differences");
  add_common_options(grad_cmd, grad_opts);
  grad_cmd->add_flag("--inject-gradient-error", inject_error,
                     "negative control: force a failing entry");
  grad_cmd->add_option("--sample", grad_sample, "check this many entries per parameter (0 = all)");
  CLI::App* sweep_cmd = app.add_subcommand("sweep-m", "train and score across factor ranks");
  add_common_options(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--m-list", m_list, "factor ranks to sweep")->delimiter(',')->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_opts);
    if (eval_cmd->parsed()) return cmd_eval(eval_opts);
    if (tag_cmd->parsed()) return cmd_tag(tag_opts, tag_input);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect_opts);
    if (grad_cmd->parsed()) return cmd_gradcheck(grad_opts, inject_error, grad_sample);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts, m_list);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
