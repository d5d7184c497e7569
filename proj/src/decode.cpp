#include "g2t/decode.hpp"

#include <algorithm>
#include <cmath>

#include "g2t/vocab.hpp"

namespace g2t {

namespace {

// Log-softmax of the last logits row.
std::vector<double> next_log_probs(const Model& model, const EncodedGraph& eg,
                                   StepCache& cache,
                                   const std::vector<int>& prefix,
                                   std::vector<double>* gates_out) {
  Tensor dec = model.decoder_states(prefix, eg.node_states);
  Tensor last = slice_rows(dec, dec->shape[0] - 1, dec->shape[0]);
  Tensor logits;
  if (model.config().use_graph_context) {
    ContextResult cr = model.graph_context_single(eg, last, cache);
    logits = model.predict_logits(last, cr.context);
    if (gates_out && cr.gates) *gates_out = cr.gates->value;
  } else {
    logits = model.predict_logits(last);
  }
  std::vector<double> lp = logits->value;
  double mx = lp[0];
  for (double x : lp) mx = std::max(mx, x);
  double z = 0.0;
  for (double x : lp) z += std::exp(x - mx);
  const double lz = mx + std::log(z);
  for (double& x : lp) x -= lz;
  return lp;
}

struct Hyp {
  std::vector<int> ids;  // includes leading bos
  double logprob = 0.0;
  bool finished = false;
};

double norm_score(const Hyp& h, double length_norm) {
  const double len = std::max<std::size_t>(h.ids.size() - 1, 1);
  return h.logprob / std::pow(len, length_norm);
}

// Higher score first; equal scores break toward the smaller token sequence.
bool better(const Hyp& a, const Hyp& b, double length_norm) {
  const double sa = norm_score(a, length_norm), sb = norm_score(b, length_norm);
  if (sa != sb) return sa > sb;
  return a.ids < b.ids;
}

}  // namespace

Generated generate(const Model& model, const TokenGraph& graph,
                   const GenOptions& opts) {
  EncodedGraph eg = model.encode(graph);
  StepCache cache;
  Generated out;

  if (opts.mode == GenOptions::Greedy) {
    Hyp h;
    h.ids = {Vocab::kBos};
    for (int step = 0; step < opts.max_len; ++step) {
      std::vector<double> gates;
      auto lp = next_log_probs(model, eg, cache, h.ids,
                               opts.record_gates ? &gates : nullptr);
      int best = 0;
      for (int i = 1; i < (int)lp.size(); ++i)
        if (lp[i] > lp[best]) best = i;
      h.logprob += lp[best];
      h.ids.push_back(best);
      if (opts.record_gates) out.gate_trace.push_back(std::move(gates));
      if (best == Vocab::kEos) { h.finished = true; break; }
    }
    out.truncated = !h.finished;
    out.score = norm_score(h, opts.length_norm);
    out.ids.assign(h.ids.begin() + 1, h.ids.end());
    return out;
  }

  std::vector<Hyp> alive{{{Vocab::kBos}, 0.0, false}};
  std::vector<Hyp> finished;
  const int k = std::max(opts.beam_size, 1);
  for (int step = 0; step < opts.max_len && !alive.empty(); ++step) {
    std::vector<Hyp> candidates;
    for (const auto& h : alive) {
      auto lp = next_log_probs(model, eg, cache, h.ids, nullptr);
      // Top-k continuations of this hypothesis suffice for the global top-k.
      std::vector<int> order(lp.size());
      for (std::size_t i = 0; i < lp.size(); ++i) order[i] = (int)i;
      std::partial_sort(order.begin(),
                        order.begin() + std::min<std::size_t>(k, order.size()),
                        order.end(), [&](int x, int y) {
                          if (lp[x] != lp[y]) return lp[x] > lp[y];
                          return x < y;
                        });
      for (int i = 0; i < k && i < (int)order.size(); ++i) {
        Hyp c = h;
        c.ids.push_back(order[i]);
        c.logprob += lp[order[i]];
        c.finished = order[i] == Vocab::kEos;
        candidates.push_back(std::move(c));
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [&](const Hyp& a, const Hyp& b) {
                if (a.logprob != b.logprob) return a.logprob > b.logprob;
                return a.ids < b.ids;
              });
    alive.clear();
    for (auto& c : candidates) {
      if (c.finished)
        finished.push_back(std::move(c));
      else if ((int)alive.size() < k)
        alive.push_back(std::move(c));
      if ((int)alive.size() >= k &&
          (int)finished.size() >= k)
        break;
    }
  }
  Hyp best;
  bool have = false;
  // Finished hypotheses win over truncated ones regardless of score.
  const std::vector<Hyp>& pool = finished.empty() ? alive : finished;
  for (const auto& h : pool)
    if (!have || better(h, best, opts.length_norm)) {
      best = h;
      have = true;
    }
  out.truncated = !best.finished;
  out.score = norm_score(best, opts.length_norm);
  out.ids.assign(best.ids.begin() + 1, best.ids.end());
  if (opts.record_gates && model.config().use_graph_context &&
      model.config().use_node_gates) {
    // Re-run the winning sequence to collect its gate trace.
    std::vector<int> prefix{Vocab::kBos};
    for (int id : out.ids) {
      std::vector<double> gates;
      next_log_probs(model, eg, cache, prefix, &gates);
      out.gate_trace.push_back(std::move(gates));
      prefix.push_back(id);
    }
  }
  return out;
}

}  // namespace g2t
