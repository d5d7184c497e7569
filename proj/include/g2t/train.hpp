#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "g2t/data.hpp"
#include "g2t/model.hpp"
#include "g2t/tensor.hpp"

namespace g2t {

struct TrainConfig {
  double lambda = 1e-3;  // weight of the gate sparsity term
  int batch_size = 4;
  double lr = 1e-4;
  double weight_decay = 0.0;
  int max_steps = 1000;
  int eval_every = 200;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct LossReport {
  double lm = 0.0;
  double gate = 0.0;   // sparsity penalty before the lambda weight
  double total = 0.0;
  long long token_count = 0;
  double gate_abs_sum = 0.0;        // raw gate activations, for monitoring
  long long gate_entry_count = 0;
};

// Mean negative log-likelihood over non-pad target positions.
Tensor lm_loss(const Tensor& logits, const std::vector<int>& targets,
               const std::vector<std::uint8_t>& mask);

// Sum over timesteps of the L1 norm of that step's gate vector, divided by
// the target length.
Tensor gate_loss(const Tensor& gates, int target_len);

// lr(step) = base_lr * (1 - step/total_steps), no warm-up.
struct LrSchedule {
  double base_lr = 1e-4;
  long long total_steps = 1;
  double lr(long long step) const;
};

struct MissingGradient : std::runtime_error {
  explicit MissingGradient(const std::string& m) : std::runtime_error(m) {}
};
struct UnknownGroup : std::runtime_error {
  explicit UnknownGroup(const std::string& m) : std::runtime_error(m) {}
};
struct NonFiniteLoss : std::runtime_error {
  explicit NonFiniteLoss(const std::string& m) : std::runtime_error(m) {}
};

// AdamW with decoupled weight decay; frozen parameters are untouched.
class AdamW {
 public:
  AdamW(std::vector<ParamRef>& params, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8, double weight_decay = 0.0);
  void step(double lr);
  long long step_count() const { return step_count_; }

 private:
  std::vector<ParamRef>* params_;
  double beta1_, beta2_, eps_, weight_decay_;
  long long step_count_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Groups: backbone | adapters | reencoder | gates | head.
void freeze(Model& model, const std::vector<std::string>& group_names);

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
};

// Central finite differences on a random subsample of coordinates per
// parameter. loss_fn must rebuild the forward pass from current parameter
// values and return the scalar loss tensor.
GradCheckResult finite_diff_check(const std::function<Tensor()>& loss_fn,
                                  const std::vector<ParamRef>& params,
                                  double eps = 1e-5,
                                  int coords_per_param = 100,
                                  std::uint64_t seed = 0);

struct TrainResult {
  std::vector<std::string> metric_log;  // one JSON record per eval
  double best_dev_bleu = -1.0;
  long long best_step = -1;
  LossReport last_loss;
  double mean_gate = 0.0;  // over the most recent training epoch
};

struct TrainOptions {
  TrainConfig config;
  const Vocab* vocab = nullptr;  // required
  std::string checkpoint_dir;  // empty = no checkpoints written
  std::string metric_log_path;  // empty = keep in memory only
  const std::vector<Example>* dev = nullptr;  // for BLEU early stopping
  int generate_max_len = 64;
  bool verbose = false;
};

// graphs[i] is the tokenized form of example i of the dataset the batch was
// built from. out_total, when given, receives the differentiable loss.
LossReport batch_loss(Model& model, const std::vector<Example>& examples,
                      const std::vector<TokenGraph>& graphs, const Batch& batch,
                      double lambda, Tensor* out_total);

TrainResult train(Model& model, const std::vector<Example>& data,
                  const TrainOptions& opts);

}  // namespace g2t
