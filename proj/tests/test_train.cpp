#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "g2t/data.hpp"
#include "g2t/graph.hpp"
#include "g2t/model.hpp"
#include "g2t/train.hpp"
#include "g2t/vocab.hpp"

using namespace g2t;

namespace {

Vocab fixture_vocab() {
  Vocab v;
  for (const char* t : {"a", "b", "c", "d", "e", "r1", "r2", "x", "y"})
    v.add(t);
  return v;
}

MultiRelGraph chain_graph() {
  MultiRelGraph g;
  g.nodes = {"a", "b", "c"};
  g.triples = {{0, "r1", 1}, {1, "r2", 2}};
  return g;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = fixture_vocab().size();
  c.model_dim = 8;
  c.ffn_dim = 16;
  c.adapter_dim = 8;
  c.reenc_dim = 8;
  c.heads = 2;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.reenc_layers = 1;
  return c;
}

}  // namespace

TEST_CASE("lm loss on uniform logits is log vocab size") {
  Tensor logits = zeros({3, 7});
  std::vector<int> targets = {1, 4, 6};
  std::vector<std::uint8_t> mask = {1, 1, 1};
  Tensor l = lm_loss(logits, targets, mask);
  CHECK(l->value[0] == doctest::Approx(std::log(7.0)).epsilon(1e-12));
}

TEST_CASE("lm loss ignores masked positions") {
  Tensor logits = make_tensor(
      {2, 3}, {0.0, 10.0, 0.0, 50.0, 0.0, 0.0});
  std::vector<int> targets = {1, 2};
  std::vector<std::uint8_t> mask = {1, 0};
  Tensor l = lm_loss(logits, targets, mask);
  // only the first row counts, and it is nearly certain
  CHECK(l->value[0] < 1e-3);
}

TEST_CASE("gate loss arithmetic") {
  Tensor gates = make_tensor({2, 4}, std::vector<double>(8, 0.5));
  Tensor l = gate_loss(gates, 2);
  CHECK(l->value[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_THROWS_AS(gate_loss(gates, 0), ShapeMismatch);
}

TEST_CASE("lr schedule is linear down to zero") {
  LrSchedule s{2e-3, 100};
  CHECK(s.lr(0) == doctest::Approx(2e-3).epsilon(1e-15));
  CHECK(s.lr(50) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(s.lr(100) == doctest::Approx(0.0));
  CHECK(s.lr(150) == doctest::Approx(0.0));
  for (int t = 1; t <= 100; ++t) CHECK(s.lr(t) <= s.lr(t - 1));
}

TEST_CASE("adamw first step with unit gradient") {
  // frozen oracle: m=0.1g, v=0.001g^2, bias correction at t=1 gives
  // update = lr * g/(|g| + eps*sqrt(1-beta2)/...) ~ lr * sign(g)
  std::vector<ParamRef> params;
  Tensor p = make_tensor({2}, {1.0, -3.0}, true);
  p->grad = {1.0, 1.0};
  params.push_back({"w", p, "backbone", true});
  AdamW opt(params);
  opt.step(0.1);
  CHECK(p->value[0] == doctest::Approx(1.0 - 0.099999999).epsilon(1e-10));
  CHECK(p->value[1] == doctest::Approx(-3.0 - 0.099999999).epsilon(1e-10));
}

TEST_CASE("adamw decoupled weight decay shrinks weights") {
  std::vector<ParamRef> params;
  Tensor p = make_tensor({1}, {2.0}, true);
  p->grad = {0.0};
  params.push_back({"w", p, "backbone", true});
  AdamW opt(params, 0.9, 0.999, 1e-8, 0.01);
  opt.step(0.5);
  // zero gradient: only the decay term applies
  CHECK(p->value[0] == doctest::Approx(2.0 - 0.5 * 0.01 * 2.0).epsilon(1e-12));
}

TEST_CASE("adamw skips frozen parameters and rejects missing gradients") {
  std::vector<ParamRef> params;
  Tensor frozen = make_tensor({1}, {5.0}, true);
  params.push_back({"f", frozen, "backbone", false});
  Tensor live = make_tensor({1}, {1.0}, true);
  params.push_back({"w", live, "backbone", true});
  AdamW opt(params);
  live->grad.clear();
  CHECK_THROWS_AS(opt.step(0.1), MissingGradient);
  live->grad = {1.0};
  opt.step(0.1);
  CHECK(frozen->value[0] == 5.0);
  CHECK(live->value[0] != 1.0);
}

TEST_CASE("freeze marks whole groups and rejects unknown names") {
  Model m(tiny_config(), 1);
  freeze(m, {"backbone", "head"});
  for (const auto& p : m.params()) {
    if (p.group == "backbone" || p.group == "head")
      CHECK_FALSE(p.trainable);
    else
      CHECK(p.trainable);
  }
  CHECK_THROWS_AS(freeze(m, {"bckbone"}), UnknownGroup);
}

TEST_CASE("finite differences agree on smooth functions") {
  Tensor w = make_tensor({4}, {0.3, -0.7, 1.2, 0.05}, true);
  std::vector<ParamRef> params{{"w", w, "backbone", true}};

  SUBCASE("quadratic") {
    auto res = finite_diff_check(
        [&] { return sum_all(mul(w, w)); }, params, 1e-5, 100, 0);
    CHECK(res.max_rel_err < 1e-9);
  }
  SUBCASE("deep sigmoid chain") {
    auto res = finite_diff_check(
        [&] {
          Tensor x = w;
          for (int i = 0; i < 5; ++i) x = sigmoid(x);
          return sum_all(x);
        },
        params, 1e-5, 100, 0);
    CHECK(res.max_rel_err < 1e-6);
  }
}

TEST_CASE("batch loss identities") {
  Vocab v = fixture_vocab();
  std::vector<Example> data;
  for (int i = 0; i < 3; ++i) {
    Example ex;

    ex.graph = chain_graph();
    ex.target_text = "x y a";
    ex.target_ids = v.encode(ex.target_text, true);
    data.push_back(ex);
  }
  std::vector<TokenGraph> graphs;
  for (const auto& ex : data)
    graphs.push_back(tokenize_graph(levi_transform(ex.graph), v));
  auto batches = make_batches(data, 3, 0);
  REQUIRE(batches.size() == 1);

  Model m(tiny_config(), 9);
  Tensor total;
  LossReport r = batch_loss(m, data, graphs, batches[0], 0.25, &total);
  CHECK(r.total == doctest::Approx(r.lm + 0.25 * r.gate).epsilon(1e-12));
  CHECK(r.total == doctest::Approx(total->value[0]).epsilon(1e-12));
  CHECK(r.gate > 0.0);
  CHECK(r.gate_entry_count > 0);

  Tensor t0;
  LossReport r0 = batch_loss(m, data, graphs, batches[0], 0.0, &t0);
  CHECK(r0.total == r0.lm);
  CHECK(r0.lm == doctest::Approx(r.lm).epsilon(1e-12));
  // fresh init should be near chance level
  CHECK(r0.lm == doctest::Approx(std::log((double)v.size())).epsilon(0.2));
}

TEST_CASE("training is deterministic and lowers the loss") {
  Vocab v = fixture_vocab();
  std::vector<Example> data;
  for (int i = 0; i < 4; ++i) {
    Example ex;

    ex.graph = chain_graph();
    ex.target_text = i % 2 ? "x y" : "a b c";
    ex.target_ids = v.encode(ex.target_text, true);
    data.push_back(ex);
  }

  TrainOptions opts;
  opts.vocab = &v;
  opts.config.max_steps = 30;
  opts.config.batch_size = 2;
  opts.config.lr = 3e-3;
  opts.config.eval_every = 10;
  opts.config.seed = 7;
  opts.dev = &data;
  opts.generate_max_len = 8;

  Model m1(tiny_config(), 9);
  Tensor before_total;
  {
    std::vector<TokenGraph> graphs;
    for (const auto& ex : data)
      graphs.push_back(tokenize_graph(levi_transform(ex.graph), v));
    auto b = make_batches(data, 4, 0);
    batch_loss(m1, data, graphs, b[0], 0.0, &before_total);
  }
  TrainResult r1 = train(m1, data, opts);

  Model m2(tiny_config(), 9);
  TrainResult r2 = train(m2, data, opts);

  CHECK(r1.metric_log == r2.metric_log);
  CHECK(r1.last_loss.total == r2.last_loss.total);
  CHECK(r1.last_loss.total < before_total->value[0]);
  CHECK(r1.mean_gate > 0.0);
  CHECK(r1.mean_gate < 1.0);
  for (std::size_t i = 0; i < m1.params().size(); ++i)
    CHECK(m1.params()[i].tensor->value == m2.params()[i].tensor->value);
}
