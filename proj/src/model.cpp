#include "g2t/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace g2t {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

void ModelConfig::check() const {
  if (vocab_size <= 0) throw std::invalid_argument("vocab_size must be > 0");
  if (model_dim % heads != 0)
    throw std::invalid_argument("model_dim must be divisible by heads");
  if (adapter_dim <= 0) throw std::invalid_argument("adapter_dim must be > 0");
  if (use_graph_context && reenc_layers < 1)
    throw std::invalid_argument("reenc_layers must be >= 1 when enabled");
}

std::vector<int> shift_right(const std::vector<int>& target_ids) {
  std::vector<int> in;
  in.reserve(target_ids.size());
  in.push_back(1 /*bos*/);
  for (std::size_t i = 0; i + 1 < target_ids.size(); ++i)
    in.push_back(target_ids[i]);
  return in;
}

Model::Model(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), seed_(seed) {
  cfg_.check();
  const int d = cfg_.model_dim, dh = d / cfg_.heads;
  const int a = cfg_.adapter_dim, m = cfg_.reenc_dim;
  const double sd = 1.0 / std::sqrt((double)d);
  const double sa = 1.0 / std::sqrt((double)a);
  const double sf = 1.0 / std::sqrt((double)cfg_.ffn_dim);
  const double sm = 1.0 / std::sqrt((double)m);

  add_param("tok_embed", {cfg_.vocab_size, d}, "backbone", sd);
  add_param("pos_embed", {cfg_.max_positions, d}, "backbone", sd);

  auto add_ln = [&](const std::string& name, const std::string& group) {
    auto g = add_param(name + ".g", {d}, group, 0.0);
    std::fill(g->value.begin(), g->value.end(), 1.0);
    add_param(name + ".b", {d}, group, 0.0);
  };
  auto add_attn = [&](const std::string& p) {
    for (int h = 0; h < cfg_.heads; ++h) {
      add_param(p + ".q" + std::to_string(h), {d, dh}, "backbone", sd);
      add_param(p + ".k" + std::to_string(h), {d, dh}, "backbone", sd);
      add_param(p + ".v" + std::to_string(h), {d, dh}, "backbone", sd);
    }
    add_param(p + ".o", {d, d}, "backbone", sd);
  };

  for (int l = 0; l < cfg_.enc_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    add_ln(p + ".ln1", "backbone");
    add_attn(p + ".attn");
    add_ln(p + ".ln2", "backbone");
    add_param(p + ".ffn.w1", {d, cfg_.ffn_dim}, "backbone", sd);
    add_param(p + ".ffn.w2", {cfg_.ffn_dim, d}, "backbone", sf);
    if (cfg_.use_struct_adapter) {
      add_ln(p + ".adapt.ln", "adapters");
      for (int r = 0; r < kNumRelations; ++r)
        add_param(p + ".adapt.wr" + std::to_string(r), {d, a}, "adapters", sd);
      add_param(p + ".adapt.we", {a, d}, "adapters", sa);
    }
  }
  for (int l = 0; l < cfg_.dec_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    add_ln(p + ".ln1", "backbone");
    add_attn(p + ".self");
    add_ln(p + ".ln2", "backbone");
    add_attn(p + ".cross");
    add_ln(p + ".ln3", "backbone");
    add_param(p + ".ffn.w1", {d, cfg_.ffn_dim}, "backbone", sd);
    add_param(p + ".ffn.w2", {cfg_.ffn_dim, d}, "backbone", sf);
    add_ln(p + ".adapt.ln", "adapters");
    add_param(p + ".adapt.wp", {d, a}, "adapters", sd);
    add_param(p + ".adapt.wo", {a, d}, "adapters", sa);
  }
  if (cfg_.use_graph_context) {
    for (int l = 0; l < cfg_.reenc_layers; ++l) {
      const std::string p = "reenc" + std::to_string(l);
      add_param(p + ".wq", {d, m}, "reencoder", sd);
      add_param(p + ".wk", {d, m}, "reencoder", sd);
      add_param(p + ".wv", {d, d}, "reencoder", sd);
      add_param(p + ".rel", {kNumRelations, m}, "reencoder", sm);
    }
  }
  if (cfg_.use_node_gates) {
    add_param("gate.we", {d, m}, "gates", sd);
    add_param("gate.wd", {d, m}, "gates", sd);
    add_param("gate.wg", {m, 1}, "gates", sm);
  }
  add_ln("out.ln", "head");
  add_param("out.w", {d, cfg_.vocab_size}, "head", sd);
}

Tensor Model::add_param(const std::string& name, std::vector<int> shape,
                        const std::string& group, double init_scale) {
  std::size_t count = 1;
  for (int s : shape) count *= (std::size_t)s;
  std::vector<double> v(count, 0.0);
  if (init_scale > 0.0) {
    // Per-name stream so shared parameters match across config variants.
    std::mt19937_64 rng(seed_ ^ fnv1a(name));
    std::uniform_real_distribution<double> u(-init_scale, init_scale);
    for (auto& x : v) x = u(rng);
  }
  Tensor t = make_tensor(std::move(shape), std::move(v), true);
  params_.push_back({name, t, group, true});
  return t;
}

Tensor Model::param(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.tensor;
  throw std::out_of_range("Model::param: unknown parameter " + name);
}

void Model::zero_grad() {
  for (auto& p : params_) std::fill(p.tensor->grad.begin(),
                                    p.tensor->grad.end(), 0.0);
}

std::size_t Model::num_parameters(const std::string& group) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (group.empty() || p.group == group) n += p.tensor->size();
  return n;
}

Tensor Model::attention(const Tensor& q_in, const Tensor& kv_in,
                        const std::string& prefix, bool causal) const {
  const int dh = cfg_.model_dim / cfg_.heads;
  const int tq = q_in->shape[0], tk = kv_in->shape[0];
  std::vector<std::uint8_t> mask;
  if (causal) {
    mask.assign((std::size_t)tq * tk, 0);
    for (int i = 0; i < tq; ++i)
      for (int j = i + 1; j < tk; ++j) mask[(std::size_t)i * tk + j] = 1;
  }
  std::vector<Tensor> heads;
  for (int h = 0; h < cfg_.heads; ++h) {
    const std::string hs = std::to_string(h);
    Tensor q = matmul(q_in, param(prefix + ".q" + hs));
    Tensor k = matmul(kv_in, param(prefix + ".k" + hs));
    Tensor v = matmul(kv_in, param(prefix + ".v" + hs));
    Tensor s = scale(matmul(q, transpose(k)), 1.0 / std::sqrt((double)dh));
    if (causal) s = masked_fill(s, mask, -1e9);
    heads.push_back(matmul(softmax_rows(s), v));
  }
  return matmul(concat_cols(heads), param(prefix + ".o"));
}

Tensor Model::ffn(const Tensor& x, const std::string& prefix) const {
  return matmul(relu(matmul(x, param(prefix + ".w1"))), param(prefix + ".w2"));
}

namespace {
void edges_by_relation(const std::vector<TokenEdge>& edges,
                       std::vector<int> (&src)[kNumRelations],
                       std::vector<int> (&dst)[kNumRelations]) {
  for (const auto& e : edges) {
    src[(int)e.rel].push_back(e.src);
    dst[(int)e.rel].push_back(e.dst);
  }
}
}  // namespace

Tensor Model::struct_adapter(const Tensor& h, const TokenGraph& g,
                             const std::string& prefix) const {
  const int n = (int)g.tokens.size();
  Tensor hn = layer_norm_rows(h, param(prefix + ".ln.g"),
                              param(prefix + ".ln.b"));
  std::vector<int> src[kNumRelations], dst[kNumRelations];
  edges_by_relation(g.edges, src, dst);
  Tensor acc;
  for (int r = 0; r < kNumRelations; ++r) {
    if (src[r].empty()) continue;
    Tensor agg = neighbor_mean(hn, src[r], dst[r], n);
    Tensor term = matmul(agg, param(prefix + ".wr" + std::to_string(r)));
    acc = acc ? add(acc, term) : term;
  }
  if (!acc) return h;
  return add(matmul(relu(acc), param(prefix + ".we")), h);
}

Tensor Model::ffn_adapter(const Tensor& h, const std::string& prefix) const {
  Tensor hn = layer_norm_rows(h, param(prefix + ".ln.g"),
                              param(prefix + ".ln.b"));
  return add(matmul(relu(matmul(hn, param(prefix + ".wp"))),
                    param(prefix + ".wo")),
             h);
}

EncodedGraph Model::encode(const TokenGraph& g) const {
  EncodedGraph eg;
  eg.graph = &g;
  Tensor x = gather_rows(param("tok_embed"), g.tokens);
  for (int l = 0; l < cfg_.enc_layers; ++l) {
    const std::string p = "enc" + std::to_string(l);
    Tensor xn = layer_norm_rows(x, param(p + ".ln1.g"), param(p + ".ln1.b"));
    x = add(x, attention(xn, xn, p + ".attn", false));
    x = add(x, ffn(layer_norm_rows(x, param(p + ".ln2.g"),
                                   param(p + ".ln2.b")),
                   p + ".ffn"));
    if (cfg_.use_struct_adapter) x = struct_adapter(x, g, p + ".adapt");
  }
  eg.node_states = x;
  JointGraph jg = build_joint_graph(g);
  for (const auto& e : jg.base.edges) {
    eg.joint_src.push_back(e.src);
    eg.joint_dst.push_back(e.dst);
    eg.joint_rel.push_back((int)e.rel);
  }
  for (const auto& e : jg.extra_edges) {
    eg.joint_src.push_back(e.src);
    eg.joint_dst.push_back(e.dst);
    eg.joint_rel.push_back((int)e.rel);
  }
  return eg;
}

Tensor Model::decoder_states(const std::vector<int>& input_ids,
                             const Tensor& enc_nodes) const {
  const int t = (int)input_ids.size();
  if (t > cfg_.max_positions)
    throw ShapeMismatch("decoder_states: sequence length " +
                        std::to_string(t) + " exceeds max_positions " +
                        std::to_string(cfg_.max_positions));
  std::vector<int> positions(t);
  for (int i = 0; i < t; ++i) positions[i] = i;
  Tensor x = add(gather_rows(param("tok_embed"), input_ids),
                 gather_rows(param("pos_embed"), positions));
  for (int l = 0; l < cfg_.dec_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    Tensor xn = layer_norm_rows(x, param(p + ".ln1.g"), param(p + ".ln1.b"));
    x = add(x, attention(xn, xn, p + ".self", true));
    x = add(x, attention(layer_norm_rows(x, param(p + ".ln2.g"),
                                         param(p + ".ln2.b")),
                         enc_nodes, p + ".cross", false));
    x = add(x, ffn(layer_norm_rows(x, param(p + ".ln3.g"),
                                   param(p + ".ln3.b")),
                   p + ".ffn"));
    x = ffn_adapter(x, p + ".adapt");
  }
  return x;
}

Tensor Model::node_gates(const Tensor& enc_nodes, const Tensor& dec_row) const {
  const int m = cfg_.reenc_dim;
  Tensor a = matmul(enc_nodes, param("gate.we"));
  Tensor b = reshape(matmul(dec_row, param("gate.wd")), {m});
  Tensor pre = tanh_op(add_rowvec(a, b));
  return reshape(sigmoid(matmul(pre, param("gate.wg"))),
                 {enc_nodes->shape[0]});
}

ContextResult Model::joint_context(const EncodedGraph& eg,
                                   const Tensor& dec_states, int steps) const {
  const int n = eg.node_states->shape[0];
  const int j = n + 1;
  const int m = cfg_.reenc_dim;
  const bool gated = cfg_.use_node_gates && !override_gates_one;

  std::vector<Tensor> state_parts, gate_rows, joint_gate_parts;
  Tensor one = make_tensor({1}, {1.0});  // context node gate is pinned
  for (int t = 0; t < steps; ++t) {
    Tensor row = slice_rows(dec_states, t, t + 1);
    state_parts.push_back(eg.node_states);
    state_parts.push_back(row);
    if (gated) {
      Tensor g = node_gates(eg.node_states, row);
      gate_rows.push_back(reshape(g, {1, n}));
      joint_gate_parts.push_back(g);
      joint_gate_parts.push_back(one);
    }
  }
  Tensor h = concat_rows(state_parts);
  Tensor gate_vec = gated ? concat_rows(joint_gate_parts)
                          : make_tensor({steps * j},
                                        std::vector<double>(steps * j, 1.0));

  // Replicate the joint-graph edge list once per step.
  const std::size_t ne = eg.joint_src.size();
  std::vector<int> src, dst, rel;
  src.reserve(ne * steps);
  dst.reserve(ne * steps);
  rel.reserve(ne * steps);
  for (int t = 0; t < steps; ++t) {
    const int off = t * j;
    for (std::size_t e = 0; e < ne; ++e) {
      src.push_back(eg.joint_src[e] + off);
      dst.push_back(eg.joint_dst[e] + off);
      rel.push_back(eg.joint_rel[e]);
    }
  }

  const double sc = 1.0 / std::sqrt((double)m);
  for (int l = 0; l < cfg_.reenc_layers; ++l) {
    const std::string p = "reenc" + std::to_string(l);
    Tensor q = matmul(h, param(p + ".wq"));
    Tensor k = matmul(h, param(p + ".wk"));
    Tensor v = matmul(h, param(p + ".wv"));
    Tensor s = edge_scores(q, k, param(p + ".rel"), src, dst, rel, sc);
    Tensor alpha = gated_edge_softmax(s, gate_vec, src, dst, steps * j,
                                      cfg_.gate_floor);
    h = relu(edge_weighted_sum(alpha, v, src, dst, steps * j));
  }
  std::vector<int> ctx_ids(steps);
  for (int t = 0; t < steps; ++t) ctx_ids[t] = t * j + n;
  ContextResult out;
  out.context = gather_rows(h, ctx_ids);
  if (gated) out.gates = concat_rows(gate_rows);
  return out;
}

ContextResult Model::graph_context(const EncodedGraph& eg,
                                   const Tensor& dec_states) const {
  return joint_context(eg, dec_states, dec_states->shape[0]);
}

ContextResult Model::graph_context_single(const EncodedGraph& eg,
                                          const Tensor& dec_row) const {
  return joint_context(eg, dec_row, 1);
}

ContextResult Model::graph_context_single(const EncodedGraph& eg,
                                          const Tensor& dec_row,
                                          StepCache& cache) const {
  const int n = eg.node_states->shape[0];
  const int j = n + 1;
  const int m = cfg_.reenc_dim;
  const bool gated = cfg_.use_node_gates && !override_gates_one;

  Tensor gate_vec;
  ContextResult out;
  if (gated) {
    if (!cache.gate_nodes)
      cache.gate_nodes = matmul(eg.node_states, param("gate.we"));
    Tensor b = reshape(matmul(dec_row, param("gate.wd")), {m});
    Tensor pre = tanh_op(add_rowvec(cache.gate_nodes, b));
    Tensor g = reshape(sigmoid(matmul(pre, param("gate.wg"))), {n});
    out.gates = reshape(g, {1, n});
    gate_vec = concat_rows({g, make_tensor({1}, {1.0})});
  } else {
    gate_vec = make_tensor({j}, std::vector<double>(j, 1.0));
  }

  Tensor h = concat_rows({eg.node_states, dec_row});
  const double sc = 1.0 / std::sqrt((double)m);
  for (int l = 0; l < cfg_.reenc_layers; ++l) {
    const std::string p = "reenc" + std::to_string(l);
    Tensor q, k, v;
    if (l == 0) {
      // the node rows of the first layer do not depend on the decoder step
      if (!cache.q0) {
        cache.q0 = matmul(eg.node_states, param(p + ".wq"));
        cache.k0 = matmul(eg.node_states, param(p + ".wk"));
        cache.v0 = matmul(eg.node_states, param(p + ".wv"));
      }
      q = concat_rows({cache.q0, matmul(dec_row, param(p + ".wq"))});
      k = concat_rows({cache.k0, matmul(dec_row, param(p + ".wk"))});
      v = concat_rows({cache.v0, matmul(dec_row, param(p + ".wv"))});
    } else {
      q = matmul(h, param(p + ".wq"));
      k = matmul(h, param(p + ".wk"));
      v = matmul(h, param(p + ".wv"));
    }
    Tensor s = edge_scores(q, k, param(p + ".rel"), eg.joint_src, eg.joint_dst,
                           eg.joint_rel, sc);
    Tensor alpha = gated_edge_softmax(s, gate_vec, eg.joint_src, eg.joint_dst,
                                      j, cfg_.gate_floor);
    h = relu(edge_weighted_sum(alpha, v, eg.joint_src, eg.joint_dst, j));
  }
  out.context = gather_rows(h, {n});
  return out;
}

Tensor Model::predict_logits(const Tensor& dec_states,
                             const Tensor& context) const {
  Tensor x = add(dec_states, context);
  return matmul(layer_norm_rows(x, param("out.ln.g"), param("out.ln.b")),
                param("out.w"));
}

Tensor Model::predict_logits(const Tensor& dec_states) const {
  return matmul(
      layer_norm_rows(dec_states, param("out.ln.g"), param("out.ln.b")),
      param("out.w"));
}

Model::TeacherForced Model::forward_teacher_forced(
    const TokenGraph& g, const std::vector<int>& target_ids) const {
  EncodedGraph eg = encode(g);
  Tensor dec = decoder_states(shift_right(target_ids), eg.node_states);
  TeacherForced out;
  if (cfg_.use_graph_context) {
    ContextResult cr = graph_context(eg, dec);
    out.logits = predict_logits(dec, cr.context);
    out.gates = cr.gates;
  } else {
    out.logits = predict_logits(dec);
  }
  return out;
}

}  // namespace g2t
