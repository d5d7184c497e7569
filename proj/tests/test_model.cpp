#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "g2t/graph.hpp"
#include "g2t/model.hpp"
#include "g2t/tensor.hpp"
#include "g2t/vocab.hpp"

using namespace g2t;

namespace {

Vocab fixture_vocab() {
  Vocab v;
  for (const char* t : {"a", "b", "c", "d", "e", "r1", "r2", "x", "y"})
    v.add(t);
  return v;
}

MultiRelGraph fixture_graph() {
  MultiRelGraph g;
  g.nodes = {"a", "b", "c", "d", "e"};
  g.triples = {{0, "r1", 1}, {1, "r2", 2}, {2, "r1", 3}, {3, "r2", 4},
               {0, "r2", 4}};
  return g;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = fixture_vocab().size();
  c.model_dim = 12;
  c.ffn_dim = 24;
  c.adapter_dim = 12;
  c.reenc_dim = 12;
  c.heads = 2;
  c.enc_layers = 2;
  c.dec_layers = 2;
  c.reenc_layers = 2;
  return c;
}

void zero_params_with_prefixed_suffix(Model& m, const std::string& needle) {
  for (auto& p : m.params())
    if (p.name.find(needle) != std::string::npos)
      std::fill(p.tensor->value.begin(), p.tensor->value.end(), 0.0);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a->size() == b->size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a->size(); ++i)
    worst = std::max(worst, std::fabs(a->value[i] - b->value[i]));
  return worst;
}

}  // namespace

TEST_CASE("shared parameters are identical across config variants") {
  ModelConfig ca = tiny_config();
  ModelConfig cb = tiny_config();
  cb.use_node_gates = false;
  cb.use_struct_adapter = false;
  Model a(ca, 7), b(cb, 7);
  for (const auto& pb : b.params()) {
    Tensor ta = a.param(pb.name);
    CHECK(ta->value == pb.tensor->value);
  }
}

TEST_CASE("zeroed structural adapter matches the plain transformer bitwise") {
  Vocab v = fixture_vocab();
  TokenGraph g = tokenize_graph(levi_transform(fixture_graph()), v);
  Model with(tiny_config(), 3);
  zero_params_with_prefixed_suffix(with, ".adapt.we");
  ModelConfig plain_cfg = tiny_config();
  plain_cfg.use_struct_adapter = false;
  Model plain(plain_cfg, 3);
  CHECK(with.encode(g).node_states->value ==
        plain.encode(g).node_states->value);
}

TEST_CASE("zero context reduces the prediction head to the baseline bitwise") {
  Model m(tiny_config(), 5);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> dv(3 * 12);
  for (auto& x : dv) x = u(rng);
  Tensor dec = make_tensor({3, 12}, dv);
  Tensor z = zeros({3, 12});
  CHECK(m.predict_logits(dec, z)->value == m.predict_logits(dec)->value);
}

TEST_CASE("all-ones gates match the ungated model bitwise") {
  Vocab v = fixture_vocab();
  TokenGraph g = tokenize_graph(levi_transform(fixture_graph()), v);
  std::vector<int> target = v.encode("x y a b", true);

  Model gated(tiny_config(), 11);
  gated.override_gates_one = true;
  ModelConfig cfg = tiny_config();
  cfg.use_node_gates = false;
  Model ungated(cfg, 11);

  auto a = gated.forward_teacher_forced(g, target);
  auto b = ungated.forward_teacher_forced(g, target);
  CHECK(a.logits->value == b.logits->value);
}

TEST_CASE("gate values match a naive reimplementation") {
  Vocab v = fixture_vocab();
  TokenGraph g = tokenize_graph(levi_transform(fixture_graph()), v);
  Model m(tiny_config(), 13);
  EncodedGraph eg = m.encode(g);
  const int n = eg.node_states->shape[0], d = 12;

  std::vector<double> dec(d);
  for (int i = 0; i < d; ++i) dec[i] = 0.1 * i - 0.5;
  Tensor dec_row = make_tensor({1, d}, dec);
  Tensor gates = m.node_gates(eg.node_states, dec_row);
  REQUIRE(gates->shape == std::vector<int>{n});

  Tensor we = m.param("gate.we"), wd = m.param("gate.wd"),
         wg = m.param("gate.wg");
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j = 0; j < d; ++j) {
      double pre = 0.0;
      for (int kk = 0; kk < d; ++kk)
        pre += eg.node_states->value[i * d + kk] * we->value[kk * d + j] +
               dec[kk] * wd->value[kk * d + j];
      acc += std::tanh(pre) * wg->value[j];
    }
    const double expect = 1.0 / (1.0 + std::exp(-acc));
    CHECK(gates->value[i] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(gates->value[i] > 0.0);
    CHECK(gates->value[i] < 1.0);
  }
}

TEST_CASE("zeroed gate parameters give one half everywhere") {
  Vocab v = fixture_vocab();
  TokenGraph g = tokenize_graph(levi_transform(fixture_graph()), v);
  Model m(tiny_config(), 17);
  zero_params_with_prefixed_suffix(m, "gate.");
  EncodedGraph eg = m.encode(g);
  Tensor dec_row = make_tensor({1, 12}, std::vector<double>(12, 0.3));
  Tensor gates = m.node_gates(eg.node_states, dec_row);
  for (double x : gates->value) CHECK(x == doctest::Approx(0.5));
}

TEST_CASE("scaling the gate projection saturates the gate") {
  Vocab v = fixture_vocab();
  TokenGraph g = tokenize_graph(levi_transform(fixture_graph()), v);
  Model m(tiny_config(), 19);
  EncodedGraph eg = m.encode(g);
  Tensor dec_row = make_tensor({1, 12}, std::vector<double>(12, 0.4));
  Tensor g0 = m.node_gates(eg.node_states, dec_row);
  Tensor wg = m.param("gate.wg");
  for (auto& x : wg->value) x *= 1e6;
  Tensor g1 = m.node_gates(eg.node_states, dec_row);
  for (std::size_t i = 0; i < g1->size(); ++i) {
    const double expected = g0->value[i] > 0.5 ? 1.0 : 0.0;
    CHECK(g1->value[i] == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("batched teacher forcing equals the per-step loop") {
  Vocab v = fixture_vocab();
  TokenGraph g = tokenize_graph(levi_transform(fixture_graph()), v);
  std::vector<int> target = v.encode("x y a b c", true);
  Model m(tiny_config(), 23);
  EncodedGraph eg = m.encode(g);
  Tensor dec = m.decoder_states(shift_right(target), eg.node_states);
  ContextResult batched = m.graph_context(eg, dec);
  for (int t = 0; t < dec->shape[0]; ++t) {
    ContextResult single =
        m.graph_context_single(eg, slice_rows(dec, t, t + 1));
    CHECK(max_abs_diff(slice_rows(batched.context, t, t + 1),
                       single.context) <= 1e-10);
    CHECK(max_abs_diff(slice_rows(batched.gates, t, t + 1), single.gates) <=
          1e-10);
  }
}

TEST_CASE("cached per-step context is bitwise equal to the uncached one") {
  Vocab v = fixture_vocab();
  TokenGraph g = tokenize_graph(levi_transform(fixture_graph()), v);
  std::vector<int> target = v.encode("x y a b c", true);
  Model m(tiny_config(), 31);
  EncodedGraph eg = m.encode(g);
  Tensor dec = m.decoder_states(shift_right(target), eg.node_states);
  StepCache cache;
  for (int t = 0; t < dec->shape[0]; ++t) {
    Tensor row = slice_rows(dec, t, t + 1);
    ContextResult plain = m.graph_context_single(eg, row);
    ContextResult cached = m.graph_context_single(eg, row, cache);
    CHECK(plain.context->value == cached.context->value);
    CHECK(plain.gates->value == cached.gates->value);
  }
}

TEST_CASE("relational attention layer matches a naive per-edge loop") {
  Vocab vo = fixture_vocab();
  TokenGraph g = tokenize_graph(levi_transform(fixture_graph()), vo);
  ModelConfig cfg = tiny_config();
  cfg.reenc_layers = 1;
  Model m(cfg, 29);
  EncodedGraph eg = m.encode(g);
  const int n = eg.node_states->shape[0], d = 12, j = n + 1;

  std::vector<double> decv(d);
  for (int i = 0; i < d; ++i) decv[i] = std::sin(0.7 * i);
  Tensor dec_row = make_tensor({1, d}, decv);
  ContextResult got = m.graph_context_single(eg, dec_row);

  // naive recomputation over the joint graph
  std::vector<double> h((std::size_t)j * d);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c) h[i * d + c] = eg.node_states->value[i * d + c];
  for (int c = 0; c < d; ++c) h[n * d + c] = decv[c];

  std::vector<double> gates(j, 1.0);
  Tensor gv = m.node_gates(eg.node_states, dec_row);
  for (int i = 0; i < n; ++i) gates[i] = gv->value[i];

  Tensor wq = m.param("reenc0.wq"), wk = m.param("reenc0.wk"),
         wv = m.param("reenc0.wv"), rel = m.param("reenc0.rel");
  auto matvec = [&](const Tensor& w, const double* row, int out_dim,
                    std::vector<double>& out) {
    out.assign(out_dim, 0.0);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < out_dim; ++b) out[b] += row[a] * w->value[a * out_dim + b];
  };
  std::vector<std::vector<double>> q(j), k(j), vv(j);
  for (int i = 0; i < j; ++i) {
    matvec(wq, &h[(std::size_t)i * d], d, q[i]);
    matvec(wk, &h[(std::size_t)i * d], d, k[i]);
    matvec(wv, &h[(std::size_t)i * d], d, vv[i]);
  }
  const double sc = 1.0 / std::sqrt((double)cfg.reenc_dim);
  std::vector<double> ctx(d, 0.0), den(1, 0.0);
  // gather the context node's in-edges, compute gated softmax, then aggregate
  std::vector<std::pair<std::size_t, double>> scores;  // edge idx, s
  for (std::size_t e = 0; e < eg.joint_src.size(); ++e) {
    if (eg.joint_dst[e] != n) continue;
    const int u = eg.joint_src[e];
    double s = 0.0;
    for (int c = 0; c < d; ++c)
      s += q[n][c] * (k[u][c] + rel->value[eg.joint_rel[e] * d + c]);
    scores.emplace_back(e, s * sc);
  }
  double mx = -1e300;
  for (auto& [e, s] : scores) mx = std::max(mx, s);
  double z = m.config().gate_floor * std::exp(-mx);
  for (auto& [e, s] : scores) z += gates[eg.joint_src[e]] * std::exp(s - mx);
  for (auto& [e, s] : scores) {
    const double alpha = gates[eg.joint_src[e]] * std::exp(s - mx) / z;
    for (int c = 0; c < d; ++c) ctx[c] += alpha * vv[eg.joint_src[e]][c];
  }
  for (int c = 0; c < d; ++c) {
    const double expect = std::max(ctx[c], 0.0);
    CHECK(std::fabs(got.context->value[c] - expect) <= 1e-10);
  }
}

TEST_CASE("forced zero gate removes the source's influence") {
  // tensor-level check of the gated normalization with an exact zero
  Tensor s = make_tensor({3}, {0.4, -0.2, 1.1});
  Tensor v = make_tensor({3, 2}, {1.0, 2.0, 3.0, 4.0, 5.0, 6.0}, true);
  std::vector<int> src = {0, 1, 2}, dst = {0, 0, 0};
  Tensor g1 = make_tensor({3}, {0.8, 0.0, 0.6});
  Tensor a = gated_edge_softmax(s, g1, src, dst, 3, 1e-6);
  CHECK(a->value[1] == 0.0);
  Tensor out1 = edge_weighted_sum(a, v, src, dst, 3);
  v->value[2] += 100.0;  // perturb the gated-off source's row
  Tensor out2 = edge_weighted_sum(gated_edge_softmax(s, g1, src, dst, 3, 1e-6),
                                  v, src, dst, 3);
  CHECK(out1->value[0] == out2->value[0]);
  CHECK(out1->value[1] == out2->value[1]);
}

TEST_CASE("encoder is permutation equivariant") {
  Vocab v = fixture_vocab();
  TokenGraph g = tokenize_graph(levi_transform(fixture_graph()), v);
  const int n = (int)g.tokens.size();
  Model m(tiny_config(), 31);
  Tensor base = m.encode(g).node_states;

  std::mt19937_64 rng(5);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> inv(n);
  for (int i = 0; i < n; ++i) inv[perm[i]] = i;

  TokenGraph pg;
  pg.tokens.resize(n);
  pg.token_owner.resize(n);
  for (int i = 0; i < n; ++i) {
    pg.tokens[perm[i]] = g.tokens[i];
    pg.token_owner[perm[i]] = g.token_owner[i];
  }
  for (const auto& e : g.edges)
    pg.edges.push_back({perm[e.src], perm[e.dst], e.rel});

  Tensor permuted = m.encode(pg).node_states;
  const int d = 12;
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c)
      CHECK(std::fabs(base->value[i * d + c] -
                      permuted->value[perm[i] * d + c]) <= 1e-9);
}

TEST_CASE("decoder is causal") {
  Vocab v = fixture_vocab();
  TokenGraph g = tokenize_graph(levi_transform(fixture_graph()), v);
  Model m(tiny_config(), 37);
  std::vector<int> t1 = v.encode("x y a b c", true);
  std::vector<int> t2 = t1;
  t2[3] = v.id("e");  // change a later token
  auto a = m.forward_teacher_forced(g, t1);
  auto b = m.forward_teacher_forced(g, t2);
  const int vocab = m.config().vocab_size;
  for (int t = 0; t <= 3; ++t)  // inputs 0..3 are unchanged
    for (int c = 0; c < vocab; ++c)
      CHECK(a.logits->value[t * vocab + c] == b.logits->value[t * vocab + c]);
}

TEST_CASE("sequence length beyond max positions is rejected") {
  ModelConfig cfg = tiny_config();
  cfg.max_positions = 4;
  Model m(cfg, 41);
  Vocab v = fixture_vocab();
  TokenGraph g = tokenize_graph(levi_transform(fixture_graph()), v);
  std::vector<int> target = v.encode("x y a b c d e", true);
  CHECK_THROWS_AS(m.forward_teacher_forced(g, target), ShapeMismatch);
}

TEST_CASE("parameter group sizes follow the closed forms") {
  ModelConfig cfg = tiny_config();
  Model m(cfg, 43);
  const std::size_t d = cfg.model_dim, mm = cfg.reenc_dim;
  const std::size_t L = cfg.reenc_layers;
  CHECK(m.num_parameters("reencoder") == L * (2 * d * mm + d * d + 3 * mm));
  CHECK(m.num_parameters("gates") == 2 * d * mm + mm);

  // groups partition the registry
  std::size_t total = 0;
  for (const char* gr : {"backbone", "adapters", "reencoder", "gates", "head"})
    total += m.num_parameters(gr);
  CHECK(total == m.num_parameters());
  for (const auto& p : m.params()) {
    const bool known = p.group == "backbone" || p.group == "adapters" ||
                       p.group == "reencoder" || p.group == "gates" ||
                       p.group == "head";
    CHECK(known);
  }
}
