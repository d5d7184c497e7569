#pragma once

#include <string>
#include <vector>

#include "g2t/model.hpp"

namespace g2t {

struct GenOptions {
  enum Mode { Greedy, Beam } mode = Greedy;
  int beam_size = 5;
  int max_len = 128;
  double length_norm = 1.0;  // score = logprob / len^length_norm
  bool record_gates = false;
};

struct Generated {
  std::vector<int> ids;  // without bos; ends with eos unless truncated
  double score = 0.0;    // length-normalized log-probability
  bool truncated = false;
  std::vector<std::vector<double>> gate_trace;  // per step, per token node
};

Generated generate(const Model& model, const TokenGraph& graph,
                   const GenOptions& opts);

}  // namespace g2t
