#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "g2t/graph.hpp"
#include "g2t/tensor.hpp"

namespace g2t {

struct ModelConfig {
  int vocab_size = 0;
  int model_dim = 256;
  int enc_layers = 2;
  int dec_layers = 2;
  int heads = 4;
  int ffn_dim = 512;
  int adapter_dim = 256;   // structural + FFN adapter bottleneck
  int reenc_dim = 256;     // attention dim of the joint-graph re-encoder
  int reenc_layers = 2;    // stacked relational attention layers
  int max_positions = 512;
  bool use_struct_adapter = true;
  bool use_graph_context = true;  // re-encode the joint graph each step
  bool use_node_gates = true;     // per-step pruning gates
  double gate_floor = 1e-6;       // denominator guard in gated attention

  void check() const;
};

struct ParamRef {
  std::string name;
  Tensor tensor;
  std::string group;  // backbone | adapters | reencoder | gates | head
  bool trainable = true;
};

// Encoder output for one example plus the joint-graph edge lists.
struct EncodedGraph {
  const TokenGraph* graph = nullptr;
  Tensor node_states;  // {N, d}
  std::vector<int> joint_src, joint_dst, joint_rel;  // context node index = N
};

struct ContextResult {
  Tensor context;  // {T, d}
  Tensor gates;    // {T, N}, empty tensor when gates are disabled
};

// Per-sentence values that stay constant across generation steps: the
// first-layer projections of the encoder node rows and the node-side gate
// projection. Filled lazily; valid as long as the encoder output and the
// model parameters do not change.
struct StepCache {
  Tensor q0, k0, v0;
  Tensor gate_nodes;
};

class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  std::vector<ParamRef>& params() { return params_; }
  const std::vector<ParamRef>& params() const { return params_; }
  Tensor param(const std::string& name) const;
  void zero_grad();
  std::size_t num_parameters(const std::string& group = "") const;

  EncodedGraph encode(const TokenGraph& g) const;

  // Final decoder block outputs (after per-block adapters, before the output
  // LayerNorm) for teacher-forced input ids.
  Tensor decoder_states(const std::vector<int>& input_ids,
                        const Tensor& enc_nodes) const;

  // Pruning gates for every token node given one decoder state row.
  Tensor node_gates(const Tensor& enc_nodes, const Tensor& dec_row) const;

  // Joint-graph re-encoding for all decoder steps at once (replicated graph).
  ContextResult graph_context(const EncodedGraph& eg,
                              const Tensor& dec_states) const;
  // Per-step variant; used during generation and as the loop oracle.
  ContextResult graph_context_single(const EncodedGraph& eg,
                                     const Tensor& dec_row) const;
  // Same result, but reuses per-sentence projections across steps.
  ContextResult graph_context_single(const EncodedGraph& eg,
                                     const Tensor& dec_row,
                                     StepCache& cache) const;

  Tensor predict_logits(const Tensor& dec_states, const Tensor& context) const;
  Tensor predict_logits(const Tensor& dec_states) const;  // baseline head

  struct TeacherForced {
    Tensor logits;  // {T, vocab}
    Tensor gates;   // {T, N} or empty
  };
  TeacherForced forward_teacher_forced(const TokenGraph& g,
                                       const std::vector<int>& target_ids) const;

  // Test/ablation hook: replace computed gates with exact ones.
  bool override_gates_one = false;

 private:
  Tensor add_param(const std::string& name, std::vector<int> shape,
                   const std::string& group, double init_scale);
  Tensor attention(const Tensor& q_in, const Tensor& kv_in,
                   const std::string& prefix, bool causal) const;
  Tensor ffn(const Tensor& x, const std::string& prefix) const;
  Tensor struct_adapter(const Tensor& h, const TokenGraph& g,
                        const std::string& prefix) const;
  Tensor ffn_adapter(const Tensor& h, const std::string& prefix) const;
  ContextResult joint_context(const EncodedGraph& eg, const Tensor& dec_states,
                              int steps) const;

  ModelConfig cfg_;
  std::uint64_t seed_;
  std::vector<ParamRef> params_;
};

// Teacher-forced decoder input: bos followed by the target minus its eos.
std::vector<int> shift_right(const std::vector<int>& target_ids);

}  // namespace g2t
