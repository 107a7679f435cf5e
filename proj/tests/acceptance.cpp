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

// End-to-end acceptance suite. Each case prints one PASS/FAIL line; the
// doctest assertions behind them gate the ctest result.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>

#include "helpers.hpp"
#include "mtmn/evaluator.hpp"
#include "mtmn/gradcheck.hpp"
#include "mtmn/trainer.hpp"

using namespace mtmn;

namespace {

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int number, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %02d %-28s %s\n", ok ? "PASS" : "FAIL", number, name, detail.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(ok, name, ": ", detail);
}

char detail_buf[256];

}  // namespace

TEST_CASE("criterion 01: gradient fidelity") {
  Stopwatch watch;
  ModelConfig cfg = testutil::tiny_config();  // D=8 d=4 K=2 m=2 T=2, all components on
  EmbeddingTable table = testutil::tiny_embeddings();
  Model model(cfg, testutil::tiny_categories(), table, 1001);
  Sentence s = testutil::tiny_sentence();  // n = 5
  REQUIRE(s.tokens.size() == 5);
  GoldChannels gold = encode_gold(s, 3);
  auto build = [&]() { return model.forward(s.tokens, &gold).loss; };
  GradCheckReport r = finite_diff_check(model.params(), build, 1e-5, 1e-4, 1e-7);
  const double elapsed = watch.seconds();
  const bool ok = r.passed() && r.max_rel_err < 1e-4 && elapsed < 60.0;
  std::snprintf(detail_buf, sizeof(detail_buf),
                "checked %zu gradients, max rel err %.2e, max abs err %.2e, %.1fs (< 60s)",
                r.checked, r.max_rel_err, r.max_abs_err, elapsed);
  report(1, "gradient fidelity", ok, detail_buf);
  CHECK(r.checked == model.params().scalar_count(true));
}

TEST_CASE("criterion 02: factorization equivalence") {
  ModelConfig cfg = testutil::tiny_config();
  cfg.factor_rank = 3;  // m = C
  EmbeddingTable table = testutil::tiny_embeddings();
  Model factored(cfg, testutil::tiny_categories(), table, 1002);
  ModelConfig icfg = cfg;
  icfg.sharing.tensor_sharing = TensorSharing::independent;
  Model independent(icfg, testutil::tiny_categories(), table, 1003);

  for (auto& p : factored.params().all())
    if (p.name.find(".Z") != std::string::npos) p.value() = Tensor::identity(3);
  for (auto& p : independent.params().all()) {
    if (p.name.rfind("tensor.", 0) == 0) continue;
    p.value() = factored.params().at(p.name).value();
  }
  for (const char* family : {"Ga", "Gp", "Da", "Dp"})
    for (std::size_t c = 0; c < 3; ++c) {
      Tensor& dst =
          independent.params().at("tensor." + std::string(family) + ".c0" + std::to_string(c))
              .value();
      for (std::size_t k = 0; k < cfg.interactions; ++k) {
        const Tensor& basis =
            factored.params()
                .at("tensor." + std::string(family) + ".k0" + std::to_string(k) + ".basis")
                .value();
        for (std::size_t i = 0; i < cfg.hidden_dim; ++i)
          for (std::size_t j = 0; j < cfg.hidden_dim; ++j) dst.at3(k, i, j) = basis.at3(c, i, j);
      }
    }

  Sentence s = testutil::tiny_sentence();
  GoldChannels gold = encode_gold(s, 3);
  ForwardTrace ta = factored.forward(s.tokens, &gold);
  ForwardTrace tb = independent.forward(s.tokens, &gold);
  double worst = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    worst = std::max(worst, ta.token_probs_a[c]->value.max_abs_diff(tb.token_probs_a[c]->value));
    worst = std::max(worst, ta.token_probs_p[c]->value.max_abs_diff(tb.token_probs_p[c]->value));
    worst = std::max(worst, ta.sentence_probs[c]->value.max_abs_diff(tb.sentence_probs[c]->value));
  }
  worst = std::max(worst, std::abs(ta.report.token - tb.report.token));
  worst = std::max(worst, std::abs(ta.report.sentence - tb.report.sentence));
  worst = std::max(worst, std::abs(ta.report.total - tb.report.total));

  // Single shared tensor: identical prototype pairs make every category's
  // outputs coincide.
  ModelConfig scfg = testutil::tiny_config();
  scfg.sharing.tensor_sharing = TensorSharing::single_shared;
  Model single(scfg, testutil::tiny_categories(), table, 1004);
  for (std::size_t c = 1; c < 3; ++c) {
    single.params().at("prototype.a.c0" + std::to_string(c)).value() =
        single.params().at("prototype.a.c00").value();
    single.params().at("prototype.p.c0" + std::to_string(c)).value() =
        single.params().at("prototype.p.c00").value();
    single.params().at("head.sentence.c0" + std::to_string(c)).value() =
        single.params().at("head.sentence.c00").value();
  }
  ForwardTrace ts = single.forward(s.tokens);
  double shared_diff = 0.0;
  for (std::size_t c = 1; c < 3; ++c) {
    shared_diff =
        std::max(shared_diff, ts.token_probs_a[c]->value.max_abs_diff(ts.token_probs_a[0]->value));
    shared_diff =
        std::max(shared_diff, ts.token_probs_p[c]->value.max_abs_diff(ts.token_probs_p[0]->value));
    shared_diff = std::max(
        shared_diff, ts.sentence_probs[c]->value.max_abs_diff(ts.sentence_probs[0]->value));
  }

  const bool ok = worst < 1e-9 && shared_diff == 0.0;
  std::snprintf(detail_buf, sizeof(detail_buf),
                "factored vs independent diff %.2e (< 1e-9), shared-tensor cross-category diff "
                "%.2e (identical)",
                worst, shared_diff);
  report(2, "factorization equivalence", ok, detail_buf);
}

TEST_CASE("criterion 03: single-task reduction") {
  ModelConfig cfg = testutil::tiny_config();
  EmbeddingTable table = testutil::tiny_embeddings();
  Model on(cfg, {"ONLY"}, table, 1005);
  ModelConfig off_cfg = cfg;
  off_cfg.sharing.feature_sharing = false;
  Model off(off_cfg, {"ONLY"}, table, 1005);
  for (auto& p : off.params().all()) p.value() = on.params().at(p.name).value();

  Sentence s;
  s.id = "single";
  s.tokens = {"the", "soup", "is", "very", "hot"};
  s.annotations = {{1, 1, TermKind::aspect, 0}, {4, 4, TermKind::opinion, 0}};
  GoldChannels gold = encode_gold(s, 1);
  ForwardTrace ta = on.forward(s.tokens, &gold);
  ForwardTrace tb = off.forward(s.tokens, &gold);
  double worst = ta.token_probs_a[0]->value.max_abs_diff(tb.token_probs_a[0]->value);
  worst = std::max(worst, ta.token_probs_p[0]->value.max_abs_diff(tb.token_probs_p[0]->value));
  worst = std::max(worst, ta.sentence_probs[0]->value.max_abs_diff(tb.sentence_probs[0]->value));
  worst = std::max(worst, std::abs(ta.report.total - tb.report.total));
  const bool ok = worst <= 1e-12;
  std::snprintf(detail_buf, sizeof(detail_buf), "C=1 sharing on/off diff %.2e (<= 1e-12)", worst);
  report(3, "single-task reduction", ok, detail_buf);
}

TEST_CASE("criterion 04: normalization suite") {
  const std::vector<std::string> vocab = testutil::tiny_vocab();
  double worst = 0.0;
  std::size_t vectors = 0;
  for (int run = 0; run < 10; ++run) {
    ModelConfig cfg = testutil::tiny_config();
    EmbeddingTable table =
        testutil::random_embeddings(vocab, cfg.embedding_dim, 2000 + run, 1.0);
    Model model(cfg, testutil::tiny_categories(), table, 3000 + run);
    Rng rng(4000 + run);
    for (int pass = 0; pass < 10; ++pass) {
      std::vector<std::string> tokens;
      const std::size_t n = 1 + rng.below(12);
      for (std::size_t j = 0; j < n; ++j) tokens.push_back(vocab[rng.below(vocab.size())]);
      ForwardTrace trace = model.forward(tokens);
      auto track = [&](double sum) {
        worst = std::max(worst, std::abs(sum - 1.0));
        ++vectors;
      };
      for (const auto& layer : trace.layers) {
        for (std::size_t c = 0; c < 3; ++c) {
          track(layer.aspect[c].attention->value.sum());
          track(layer.opinion[c].attention->value.sum());
          for (const Var& sim : {layer.similarity_a, layer.similarity_p})
            for (std::size_t row = 0; row < 3; ++row) {
              double s = 0.0;
              for (std::size_t col = 0; col < 3; ++col) s += sim->value.at2(row, col);
              track(s);
            }
        }
      }
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t j = 0; j < n; ++j) {
          double sa = 0.0, sp = 0.0;
          for (std::size_t i = 0; i < 3; ++i) {
            sa += trace.token_probs_a[c]->value.at2(i, j);
            sp += trace.token_probs_p[c]->value.at2(i, j);
          }
          track(sa);
          track(sp);
        }
        track(trace.sentence_probs[c]->value.sum());
      }
    }
  }
  const bool ok = worst <= 1e-9;
  std::snprintf(detail_buf, sizeof(detail_buf),
                "100 passes, %zu normalized vectors, worst |sum-1| %.2e (<= 1e-9)", vectors, worst);
  report(4, "normalization suite", ok, detail_buf);
}

namespace {

/// Brute-force restatement of the channel-merge rule.
CategoryLabel brute_force_decision(const std::array<double, 3>& ya,
                                   const std::array<double, 3>& yp) {
  std::size_t ia = 0, ip = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    if (ya[i] > ya[ia]) ia = i;
    if (yp[i] > yp[ip]) ip = i;
  }
  if (ia == 2 && ip == 2) return CategoryLabel::O;
  if (ia != 2 && ip == 2) return ia == 0 ? CategoryLabel::BA : CategoryLabel::IA;
  if (ia == 2) return ip == 0 ? CategoryLabel::BP : CategoryLabel::IP;
  if (ya[ia] >= yp[ip]) return ia == 0 ? CategoryLabel::BA : CategoryLabel::IA;
  return ip == 0 ? CategoryLabel::BP : CategoryLabel::IP;
}

}  // namespace

TEST_CASE("criterion 05: decode oracle") {
  Rng rng(1010);
  std::size_t agreements = 0, total = 0;
  for (std::size_t category = 0; category < 3; ++category) {
    for (int round = 0; round < 1000; ++round) {
      auto draw = [&]() {
        double a = rng.next_double() + 1e-6;
        double b = rng.next_double() + 1e-6;
        double c = rng.next_double() + 1e-6;
        const double s = a + b + c;
        return std::array<double, 3>{a / s, b / s, c / s};
      };
      const auto ya = draw();
      const auto yp = draw();
      ++total;
      if (decide_category_label(ya, yp).label == brute_force_decision(ya, yp)) ++agreements;
    }
  }
  const bool ok = agreements == total;
  std::snprintf(detail_buf, sizeof(detail_buf), "%zu/%zu decisions agree (100%% required)",
                agreements, total);
  report(5, "decode oracle", ok, detail_buf);
}

TEST_CASE("criterion 06: gold round trip") {
  Rng rng(1020);
  std::size_t sentences = 0, annotations = 0;
  bool ok = true;
  for (int round = 0; round < 50; ++round) {
    Sentence s;
    s.id = "fixture" + std::to_string(round);
    const std::size_t n = 3 + rng.below(10);
    for (std::size_t j = 0; j < n; ++j) s.tokens.push_back("t" + std::to_string(j));
    const std::size_t c_count = 3;
    for (std::size_t c = 0; c < c_count; ++c)
      for (int kind = 0; kind < 2; ++kind) {
        std::size_t cursor = 0;
        while (cursor + 1 < n && rng.bernoulli(0.5)) {
          const std::size_t start = cursor + rng.below(2);
          const std::size_t end = std::min(n - 1, start + rng.below(3));
          s.annotations.push_back(
              {start, end, kind == 0 ? TermKind::aspect : TermKind::opinion, c});
          cursor = end + 2;
        }
      }
    ++sentences;
    annotations += s.annotations.size();
    GoldChannels gold = encode_gold(s, c_count);
    std::set<Annotation> want(s.annotations.begin(), s.annotations.end());
    std::set<Annotation> got;
    for (const auto& t : spans_from_gold(gold)) got.insert({t.start, t.end, t.kind, t.category});
    ok = ok && want == got;
  }
  std::snprintf(detail_buf, sizeof(detail_buf),
                "%zu sentences, %zu annotations reproduced exactly", sentences, annotations);
  report(6, "gold round trip", ok, detail_buf);
}

TEST_CASE("criterion 07: overfit capacity") {
  Stopwatch watch;
  auto synthetic = testutil::synthetic_corpus(20, 3, 11);
  REQUIRE(synthetic.vocab.size() == 40);
  ModelConfig cfg;
  cfg.embedding_dim = 12;
  cfg.hidden_dim = 8;
  cfg.interactions = 3;
  cfg.factor_rank = 2;
  cfg.layers = 2;
  cfg.dropout_rate = 0.0;
  EmbeddingTable table = testutil::random_embeddings(synthetic.vocab, cfg.embedding_dim, 13);
  Model model(cfg, synthetic.corpus.categories, table, 1030);
  TrainConfig tc;
  tc.seed = 1;
  tc.learning_rate = 0.02;
  tc.epochs = 25;
  double asc = 0.0, opc = 0.0;
  std::size_t epochs = 0;
  while (epochs < 500) {
    train(model, synthetic.corpus, tc);
    epochs += tc.epochs;
    const EvalReport r = evaluate(model, synthetic.corpus);
    asc = r.asc.f1;
    opc = r.opc.f1;
    if (asc >= 0.99 && opc >= 0.99) break;
  }
  const double elapsed = watch.seconds();
  const bool ok = asc >= 0.99 && opc >= 0.99 && elapsed < 300.0;
  std::snprintf(detail_buf, sizeof(detail_buf),
                "train ASC %.3f OPC %.3f after %zu epochs, %.1fs (< 300s)", asc, opc, epochs,
                elapsed);
  report(7, "overfit capacity", ok, detail_buf);
}

TEST_CASE("criterion 08: ablation structure") {
  auto synthetic = testutil::synthetic_corpus(10, 3, 12);
  const std::size_t dim = 10;
  EmbeddingTable table = testutil::random_embeddings(synthetic.vocab, dim, 14);
  auto base_cfg = [&]() {
    ModelConfig cfg;
    cfg.embedding_dim = dim;
    cfg.hidden_dim = 6;
    cfg.interactions = 2;
    cfg.factor_rank = 2;
    cfg.layers = 2;
    cfg.dropout_rate = 0.0;
    return cfg;
  };

  // Disabling the auxiliary task: sentence-head gradients exactly zero and no
  // sentence term in the report.
  ModelConfig no_aux = base_cfg();
  no_aux.sharing.auxiliary_task = false;
  Model aux_model(no_aux, synthetic.corpus.categories, table, 1040);
  Sentence s0 = synthetic.corpus.sentences[0];
  GoldChannels gold0 = encode_gold(s0, 3);
  aux_model.zero_grads();
  ForwardTrace aux_trace = aux_model.forward(s0.tokens, &gold0);
  backward(aux_trace.loss);
  double w_c_grad = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const Tensor& g = aux_model.params().at("head.sentence.c0" + std::to_string(c)).grad();
    for (std::size_t i = 0; i < g.size(); ++i) w_c_grad = std::max(w_c_grad, std::abs(g[i]));
  }
  const bool aux_ok = w_c_grad == 0.0 && aux_trace.report.sentence == 0.0;

  // Disabling feature sharing equals an identity-similarity model bitwise.
  ModelConfig no_feat = base_cfg();
  no_feat.sharing.feature_sharing = false;
  Model feat_model(no_feat, synthetic.corpus.categories, table, 1041);
  ForwardTrace skipped = feat_model.forward(s0.tokens, &gold0);
  ForwardOptions identity;
  identity.identity_similarity = true;
  ForwardTrace mixed = feat_model.forward(s0.tokens, &gold0, identity);
  bool feat_ok = skipped.report.total == mixed.report.total;
  for (std::size_t c = 0; c < 3; ++c)
    feat_ok = feat_ok && skipped.token_probs_a[c]->value == mixed.token_probs_a[c]->value &&
              skipped.token_probs_p[c]->value == mixed.token_probs_p[c]->value;

  // The four sharing configurations produce distinct trajectories.
  TrainConfig tc;
  tc.seed = 2;
  tc.epochs = 3;
  tc.learning_rate = 0.005;
  std::vector<std::vector<double>> trajectories;
  const char* names[] = {"C1+C2+C3", "C1+C3", "C2+C3", "C2+C3*"};
  for (int variant = 0; variant < 4; ++variant) {
    ModelConfig cfg = base_cfg();
    switch (variant) {
      case 0: break;  // factored + feature + auxiliary
      case 1: cfg.sharing.feature_sharing = false; break;
      case 2: cfg.sharing.tensor_sharing = TensorSharing::independent; break;
      case 3: cfg.sharing.tensor_sharing = TensorSharing::single_shared; break;
    }
    Model model(cfg, synthetic.corpus.categories, table, 1042);
    TrainResult result = train(model, synthetic.corpus, tc);
    std::vector<double> losses;
    for (const auto& e : result.log) losses.push_back(e.total_loss);
    trajectories.push_back(losses);
  }
  bool distinct = true;
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = a + 1; b < 4; ++b) distinct = distinct && trajectories[a] != trajectories[b];

  const bool ok = aux_ok && feat_ok && distinct;
  std::snprintf(detail_buf, sizeof(detail_buf),
                "dW_c max %.1e (exact 0), identity-S bitwise %s, %s/%s/%s/%s trajectories distinct "
                "%s",
                w_c_grad, feat_ok ? "yes" : "NO", names[0], names[1], names[2], names[3],
                distinct ? "yes" : "NO");
  report(8, "ablation structure", ok, detail_buf);
}

TEST_CASE("criterion 09: optimizer unit") {
  Tensor value = Tensor::scalar(1.0);
  Tensor grad = Tensor::scalar(1.0);
  Tensor cache = Tensor::scalar(0.0);
  rmsprop_update(value, grad, cache, 0.001, 0.9, 1e-8);
  const double want_cache = 0.1;
  const double want_step = -0.001 / (std::sqrt(0.1) + 1e-8);
  const bool hand_ok =
      std::abs(cache[0] - want_cache) < 1e-9 && std::abs((value[0] - 1.0) - want_step) < 1e-9;

  Tensor theta = Tensor::scalar(1.0);
  Tensor theta_cache = Tensor::scalar(0.0);
  for (int i = 0; i < 200; ++i) {
    Tensor g = Tensor::scalar(2.0 * theta[0]);
    rmsprop_update(theta, g, theta_cache, 0.01, 0.9, 1e-8);
  }
  const bool quad_ok = std::abs(theta[0]) < 1e-2;
  const bool ok = hand_ok && quad_ok;
  std::snprintf(detail_buf, sizeof(detail_buf),
                "cache %.6f step %.7e (hand-checked), |theta| after 200 steps %.2e (< 1e-2)",
                cache[0], value[0] - 1.0, std::abs(theta[0]));
  report(9, "optimizer unit", ok, detail_buf);
}

TEST_CASE("criterion 10: F1 scorer") {
  std::vector<TermSpan> gold = {{0, 0, TermKind::aspect, 0}, {3, 4, TermKind::aspect, 1}};
  std::vector<TermSpan> pred = {{0, 0, TermKind::aspect, 0}, {2, 2, TermKind::aspect, 1}};
  Prf half = f1_exact(pred, gold);
  const bool half_ok = half.precision == 0.5 && half.recall == 0.5 && half.f1 == 0.5;
  Prf oracle = f1_exact(gold, gold);
  const bool oracle_ok = oracle.precision == 1.0 && oracle.recall == 1.0 && oracle.f1 == 1.0;
  Prf empty = f1_exact({}, gold);
  const bool empty_ok = empty.precision == 0.0 && empty.recall == 0.0 && empty.f1 == 0.0;
  const bool ok = half_ok && oracle_ok && empty_ok;
  std::snprintf(detail_buf, sizeof(detail_buf),
                "half-right 0.5/0.5/0.5 %s, oracle 1.0 %s, empty 0.0 %s", half_ok ? "ok" : "NO",
                oracle_ok ? "ok" : "NO", empty_ok ? "ok" : "NO");
  report(10, "F1 scorer", ok, detail_buf);
}

TEST_CASE("criterion 11: determinism") {
  auto dir = testutil::temp_dir("acceptance_det");
  auto synthetic = testutil::synthetic_corpus(8, 3, 15);
  ModelConfig cfg = testutil::tiny_config();
  cfg.embedding_dim = 10;
  cfg.dropout_rate = 0.5;  // exercise the mask stream too
  EmbeddingTable table = testutil::random_embeddings(synthetic.vocab, cfg.embedding_dim, 16);
  TrainConfig tc;
  tc.seed = 33;
  tc.epochs = 3;
  std::map<std::string, std::string> echo = {{"seed", "33"}, {"epochs", "3"}};

  std::string blobs[2], manifests[2], logs[2];
  for (int run = 0; run < 2; ++run) {
    Model model(cfg, synthetic.corpus.categories, table, tc.seed);
    TrainResult result = train(model, synthetic.corpus, tc);
    const std::string ckpt = (dir / "run.ckpt").string();
    save_checkpoint(model, ckpt);
    write_loss_log(result, (dir / "loss.csv").string(), echo);
    blobs[run] = testutil::read_file(ckpt + ".bin");
    manifests[run] = testutil::read_file(ckpt);
    logs[run] = testutil::read_file(dir / "loss.csv");
  }
  const bool ok = blobs[0] == blobs[1] && manifests[0] == manifests[1] && logs[0] == logs[1] &&
                  !blobs[0].empty();
  std::snprintf(detail_buf, sizeof(detail_buf),
                "checkpoint blob %zu bytes and loss log byte-identical across runs",
                blobs[0].size());
  report(11, "determinism", ok, detail_buf);
}

TEST_CASE("criterion 12: full-scale instantiation") {
  ModelConfig cfg;  // defaults: D=150 d=50 K=20 m=5 T=2, factored sharing
  REQUIRE(cfg.embedding_dim == 150);
  REQUIRE(cfg.hidden_dim == 50);
  REQUIRE(cfg.interactions == 20);
  REQUIRE(cfg.factor_rank == 5);
  REQUIRE(cfg.layers == 2);
  std::vector<std::string> cats;
  for (int c = 0; c < 12; ++c) cats.push_back("CAT_" + std::to_string(c));
  std::vector<std::string> vocab;
  for (int v = 0; v < 64; ++v) vocab.push_back("tok" + std::to_string(v));
  EmbeddingTable table = testutil::random_embeddings(vocab, cfg.embedding_dim, 17);
  Model model(cfg, cats, table, 1050);

  // Closed-form size: 3(Dd + d^2 + d) encoder + 48K^2 + 12K feature GRUs +
  // 4K probes + 2d^2 transforms + 12K token heads + 4dC sentence heads +
  // 2dC prototypes + 4K(Cm + m d^2) factored tensors.
  const std::size_t D = 150, d = 50, K = 20, m = 5, C = 12;
  const std::size_t want = 3 * (D * d + d * d + d) + 48 * K * K + 12 * K + 4 * K + 2 * d * d +
                           12 * K + 4 * d * C + 2 * d * C + 4 * K * (C * m + m * d * d);
  const bool count_ok = model.parameter_count() == want;

  Sentence s;
  s.id = "full";
  Rng rng(18);
  for (int j = 0; j < 30; ++j) s.tokens.push_back(vocab[rng.below(vocab.size())]);
  s.annotations = {{2, 3, TermKind::aspect, 1}, {7, 7, TermKind::opinion, 1},
                   {12, 12, TermKind::aspect, 6}};
  GoldChannels gold = encode_gold(s, C);
  Stopwatch watch;
  model.zero_grads();
  ForwardTrace trace = model.forward(s.tokens, &gold);
  backward(trace.loss);
  const double elapsed = watch.seconds();
  const bool ok = count_ok && elapsed < 10.0 && std::isfinite(trace.report.total);
  std::snprintf(detail_buf, sizeof(detail_buf),
                "%zu parameters (formula %zu), 30-token forward+backward %.2fs (< 10s)",
                model.parameter_count(), want, elapsed);
  report(12, "full-scale instantiation", ok, detail_buf);
}
