#include "g2t/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "g2t/checkpoint.hpp"
#include "g2t/config.hpp"
#include "g2t/decode.hpp"
#include "g2t/metrics.hpp"
#include "json.hpp"

namespace g2t {

Tensor lm_loss(const Tensor& logits, const std::vector<int>& targets,
               const std::vector<std::uint8_t>& mask) {
  return cross_entropy(logits, targets, mask);
}

Tensor gate_loss(const Tensor& gates, int target_len) {
  if (target_len <= 0) throw ShapeMismatch("gate_loss: target_len must be > 0");
  // Gates are produced by a sigmoid so the L1 norm is a plain sum.
  return scale(sum_all(gates), 1.0 / target_len);
}

double LrSchedule::lr(long long step) const {
  if (total_steps <= 0) return base_lr;
  double frac = 1.0 - (double)step / (double)total_steps;
  if (frac < 0.0) frac = 0.0;
  return base_lr * frac;
}

AdamW::AdamW(std::vector<ParamRef>& params, double beta1, double beta2,
             double eps, double weight_decay)
    : params_(&params),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      weight_decay_(weight_decay) {
  m_.resize(params.size());
  v_.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i].assign(params[i].tensor->size(), 0.0);
    v_[i].assign(params[i].tensor->size(), 0.0);
  }
}

void AdamW::step(double lr) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, (double)step_count_);
  const double bc2 = 1.0 - std::pow(beta2_, (double)step_count_);
  for (std::size_t i = 0; i < params_->size(); ++i) {
    ParamRef& p = (*params_)[i];
    if (!p.trainable) continue;
    TensorNode& t = *p.tensor;
    if (t.grad.size() != t.value.size())
      throw MissingGradient("no gradient for parameter " + p.name);
    for (std::size_t j = 0; j < t.value.size(); ++j) {
      const double g = t.grad[j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      t.value[j] -= lr * (mhat / (std::sqrt(vhat) + eps_) +
                          weight_decay_ * t.value[j]);
    }
  }
}

void freeze(Model& model, const std::vector<std::string>& group_names) {
  static const std::set<std::string> kGroups = {"backbone", "adapters",
                                               "reencoder", "gates", "head"};
  for (const auto& g : group_names)
    if (!kGroups.count(g)) throw UnknownGroup("unknown parameter group: " + g);
  std::set<std::string> frozen(group_names.begin(), group_names.end());
  for (auto& p : model.params())
    if (frozen.count(p.group)) p.trainable = false;
}

GradCheckResult finite_diff_check(const std::function<Tensor()>& loss_fn,
                                  const std::vector<ParamRef>& params,
                                  double eps, int coords_per_param,
                                  std::uint64_t seed) {
  // One backward sweep for the analytic gradients. loss_fn reads parameter
  // values afresh each call, so point perturbations below stay consistent.
  for (const auto& p : params) {
    p.tensor->ensure_grad();
    std::fill(p.tensor->grad.begin(), p.tensor->grad.end(), 0.0);
  }
  Tensor loss = loss_fn();
  backward(loss);

  GradCheckResult res;
  std::mt19937_64 rng(seed);
  for (const auto& p : params) {
    if (!p.trainable) continue;
    TensorNode& t = *p.tensor;
    std::vector<std::size_t> coords;
    if ((int)t.size() <= coords_per_param) {
      coords.resize(t.size());
      for (std::size_t j = 0; j < t.size(); ++j) coords[j] = j;
    } else {
      std::set<std::size_t> picked;
      std::uniform_int_distribution<std::size_t> dist(0, t.size() - 1);
      while ((int)picked.size() < coords_per_param) picked.insert(dist(rng));
      coords.assign(picked.begin(), picked.end());
    }
    for (std::size_t j : coords) {
      const double orig = t.value[j];
      t.value[j] = orig + eps;
      const double fplus = loss_fn()->value[0];
      t.value[j] = orig - eps;
      const double fminus = loss_fn()->value[0];
      t.value[j] = orig;
      const double fd = (fplus - fminus) / (2.0 * eps);
      const double an = t.grad[j];
      const double denom = std::max(1e-8, std::fabs(fd) + std::fabs(an));
      const double rel = std::fabs(fd - an) / denom;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = p.name;
      }
    }
  }
  return res;
}

LossReport batch_loss(Model& model, const std::vector<Example>& examples,
                      const std::vector<TokenGraph>& graphs, const Batch& batch,
                      double lambda, Tensor* out_total) {
  LossReport rep;
  std::vector<Tensor> per_example;
  for (std::size_t b = 0; b < batch.example_ids.size(); ++b) {
    const int ex = batch.example_ids[b];
    const auto& targets = batch.target_ids[b];
    const auto& mask = batch.target_mask[b];
    int len = 0;
    for (auto m : mask) len += m != 0;

    auto tf = model.forward_teacher_forced(graphs[ex], targets);
    Tensor lm = lm_loss(tf.logits, targets, mask);
    Tensor total = lm;
    rep.lm += lm->value[0];
    rep.token_count += len;
    if (tf.gates) {
      Tensor real_gates = len < tf.gates->rows()
                              ? slice_rows(tf.gates, 0, len)
                              : tf.gates;
      Tensor gl = gate_loss(real_gates, len);
      rep.gate += gl->value[0];
      for (double g : real_gates->value) rep.gate_abs_sum += g;
      rep.gate_entry_count += (long long)real_gates->size();
      if (lambda != 0.0) total = add(total, scale(gl, lambda));
    }
    per_example.push_back(total);
    (void)examples;
  }
  const double inv = 1.0 / (double)per_example.size();
  Tensor total = per_example[0];
  for (std::size_t i = 1; i < per_example.size(); ++i)
    total = add(total, per_example[i]);
  total = scale(total, inv);
  rep.lm *= inv;
  rep.gate *= inv;
  rep.total = total->value[0];
  if (out_total) *out_total = total;
  return rep;
}

namespace {

double dev_bleu(const Model& model, const std::vector<Example>& dev,
                const std::vector<TokenGraph>& dev_graphs, const Vocab& vocab,
                int max_len) {
  GenOptions opts;
  opts.mode = GenOptions::Greedy;
  opts.max_len = max_len;
  std::vector<std::string> hyps, refs;
  for (std::size_t i = 0; i < dev.size(); ++i) {
    Generated g = generate(model, dev_graphs[i], opts);
    hyps.push_back(vocab.decode(g.ids));
    refs.push_back(vocab.decode(dev[i].target_ids));
  }
  return bleu(hyps, refs);
}

std::vector<TokenGraph> tokenize_all(const std::vector<Example>& data,
                                     const Vocab& vocab) {
  std::vector<TokenGraph> out;
  out.reserve(data.size());
  for (const auto& ex : data)
    out.push_back(tokenize_graph(levi_transform(ex.graph), vocab));
  return out;
}

}  // namespace

TrainResult train(Model& model, const std::vector<Example>& data,
                  const TrainOptions& opts) {
  if (!opts.vocab) throw std::runtime_error("train: vocab is required");
  if (data.empty()) throw std::runtime_error("train: empty dataset");
  const TrainConfig& cfg = opts.config;

  std::vector<TokenGraph> graphs = tokenize_all(data, *opts.vocab);
  std::vector<TokenGraph> dev_graphs;
  if (opts.dev) dev_graphs = tokenize_all(*opts.dev, *opts.vocab);

  LrSchedule sched{cfg.lr, cfg.max_steps};
  AdamW optim(model.params(), cfg.beta1, cfg.beta2, cfg.adam_eps,
              cfg.weight_decay);

  std::ofstream log_file;
  if (!opts.metric_log_path.empty()) {
    log_file.open(opts.metric_log_path);
    if (!log_file)
      throw std::runtime_error("train: cannot open " + opts.metric_log_path);
  }
  if (!opts.checkpoint_dir.empty())
    std::filesystem::create_directories(opts.checkpoint_dir);

  TrainResult res;
  long long step = 0;
  std::uint64_t epoch = 0;
  double epoch_gate_sum = 0.0, prev_epoch_mean = 0.0;
  long long epoch_gate_count = 0;
  const std::uint64_t cfg_hash = config_hash(model.config());

  auto emit = [&](long long s, const LossReport& rep, double dbleu) {
    nlohmann::json rec;
    rec["step"] = s;
    rec["lm"] = rep.lm;
    rec["gate"] = rep.gate;
    rec["total"] = rep.total;
    rec["lr"] = sched.lr(s);
    if (rep.gate_entry_count > 0)
      rec["mean_gate"] = rep.gate_abs_sum / (double)rep.gate_entry_count;
    if (dbleu >= 0.0) rec["dev_bleu"] = dbleu;
    std::string line = rec.dump();
    res.metric_log.push_back(line);
    if (log_file) log_file << line << '\n' << std::flush;
    if (opts.verbose) fprintf(stderr, "%s\n", line.c_str());
  };

  while (step < cfg.max_steps) {
    auto batches = make_batches(data, cfg.batch_size, cfg.seed + epoch);
    if (epoch_gate_count > 0)
      prev_epoch_mean = epoch_gate_sum / (double)epoch_gate_count;
    epoch_gate_sum = 0.0;
    epoch_gate_count = 0;
    for (const auto& batch : batches) {
      if (step >= cfg.max_steps) break;
      model.zero_grad();
      Tensor total;
      LossReport rep =
          batch_loss(model, data, graphs, batch, cfg.lambda, &total);
      if (!std::isfinite(rep.total))
        throw NonFiniteLoss("non-finite loss at step " + std::to_string(step));
      backward(total);
      optim.step(sched.lr(step));
      ++step;
      res.last_loss = rep;
      epoch_gate_sum += rep.gate_abs_sum;
      epoch_gate_count += rep.gate_entry_count;

      const bool eval_now =
          cfg.eval_every > 0 &&
          (step % cfg.eval_every == 0 || step == cfg.max_steps);
      if (eval_now) {
        double dbleu = -1.0;
        if (opts.dev && !opts.dev->empty()) {
          dbleu = dev_bleu(model, *opts.dev, dev_graphs, *opts.vocab,
                           opts.generate_max_len);
          if (dbleu > res.best_dev_bleu) {
            res.best_dev_bleu = dbleu;
            res.best_step = step;
            if (!opts.checkpoint_dir.empty())
              save_checkpoint(opts.checkpoint_dir + "/best.ckpt", model,
                              {cfg_hash, step});
          }
        }
        emit(step, rep, dbleu);
      }
    }
    ++epoch;
  }
  if (!opts.checkpoint_dir.empty())
    save_checkpoint(opts.checkpoint_dir + "/last.ckpt", model,
                    {cfg_hash, step});
  res.mean_gate = epoch_gate_count > 0
                      ? epoch_gate_sum / (double)epoch_gate_count
                      : prev_epoch_mean;
  return res;
}

}  // namespace g2t
