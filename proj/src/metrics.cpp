#include "g2t/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>

#include "g2t/vocab.hpp"

namespace g2t {

namespace {

void require_parallel(const std::vector<std::string>& hyps,
                      const std::vector<std::string>& refs) {
  if (hyps.size() != refs.size())
    throw LengthMismatch("hyps " + std::to_string(hyps.size()) + " vs refs " +
                         std::to_string(refs.size()));
  if (refs.empty()) throw LengthMismatch("empty corpus");
}

using Counts = std::map<std::vector<std::string>, long long>;

Counts ngram_counts(const std::vector<std::string>& toks, int n) {
  Counts c;
  for (int i = 0; i + n <= (int)toks.size(); ++i)
    c[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)]++;
  return c;
}

using CharCounts = std::map<std::string, long long>;

CharCounts char_ngram_counts(const std::string& s, int n) {
  CharCounts c;
  for (int i = 0; i + n <= (int)s.size(); ++i) c[s.substr(i, n)]++;
  return c;
}

std::string strip_spaces(const std::string& s) {
  std::string out;
  for (char ch : s)
    if (!std::isspace((unsigned char)ch)) out += ch;
  return out;
}

}  // namespace

double bleu(const std::vector<std::string>& hyps,
            const std::vector<std::string>& refs, bool smooth, double eps) {
  require_parallel(hyps, refs);
  long long matches[4] = {0, 0, 0, 0}, totals[4] = {0, 0, 0, 0};
  long long ref_totals[4] = {0, 0, 0, 0};
  long long hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto h = split_tokens(hyps[i], false);
    const auto r = split_tokens(refs[i], false);
    hyp_len += (long long)h.size();
    ref_len += (long long)r.size();
    for (int n = 1; n <= 4; ++n) {
      const auto hc = ngram_counts(h, n);
      const auto rc = ngram_counts(r, n);
      for (const auto& [gram, count] : hc) {
        totals[n - 1] += count;
        auto it = rc.find(gram);
        if (it != rc.end()) matches[n - 1] += std::min(count, it->second);
      }
      for (const auto& [gram, count] : rc) ref_totals[n - 1] += count;
    }
  }
  if (hyp_len == 0) return 0.0;
  double log_p = 0.0;
  int used = 0;
  for (int n = 0; n < 4; ++n) {
    // an order with no n-grams on either side carries no signal; skip it so
    // short identical corpora still score 100
    if (totals[n] == 0 && ref_totals[n] == 0) continue;
    double p;
    if (totals[n] > 0 && matches[n] > 0)
      p = (double)matches[n] / (double)totals[n];
    else if (smooth)
      p = eps;
    else
      return 0.0;
    log_p += std::log(p);
    ++used;
  }
  if (used == 0) return 0.0;
  log_p /= used;
  double bp = 1.0;
  if (hyp_len < ref_len) bp = std::exp(1.0 - (double)ref_len / (double)hyp_len);
  return 100.0 * bp * std::exp(log_p);
}

double chrf_pp(const std::vector<std::string>& hyps,
               const std::vector<std::string>& refs) {
  require_parallel(hyps, refs);
  constexpr int kCharOrders = 6, kWordOrders = 2;
  constexpr int kOrders = kCharOrders + kWordOrders;
  long long matches[kOrders] = {0}, hyp_tot[kOrders] = {0}, ref_tot[kOrders] = {0};
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const std::string hs = strip_spaces(hyps[i]), rs = strip_spaces(refs[i]);
    for (int n = 1; n <= kCharOrders; ++n) {
      const auto hc = char_ngram_counts(hs, n);
      const auto rc = char_ngram_counts(rs, n);
      for (const auto& [g, c] : hc) {
        hyp_tot[n - 1] += c;
        auto it = rc.find(g);
        if (it != rc.end()) matches[n - 1] += std::min(c, it->second);
      }
      for (const auto& [g, c] : rc) ref_tot[n - 1] += c;
    }
    const auto hw = split_tokens(hyps[i], false);
    const auto rw = split_tokens(refs[i], false);
    for (int n = 1; n <= kWordOrders; ++n) {
      const int k = kCharOrders + n - 1;
      const auto hc = ngram_counts(hw, n);
      const auto rc = ngram_counts(rw, n);
      for (const auto& [g, c] : hc) {
        hyp_tot[k] += c;
        auto it = rc.find(g);
        if (it != rc.end()) matches[k] += std::min(c, it->second);
      }
      for (const auto& [g, c] : rc) ref_tot[k] += c;
    }
  }
  double prec = 0.0, rec = 0.0;
  int used = 0;
  for (int k = 0; k < kOrders; ++k) {
    if (hyp_tot[k] == 0 && ref_tot[k] == 0) continue;  // no signal, skip
    prec += hyp_tot[k] > 0 ? (double)matches[k] / (double)hyp_tot[k] : 0.0;
    rec += ref_tot[k] > 0 ? (double)matches[k] / (double)ref_tot[k] : 0.0;
    ++used;
  }
  if (used == 0) return 0.0;
  prec /= used;
  rec /= used;
  constexpr double beta2 = 4.0;  // beta = 2
  if (prec <= 0.0 || rec <= 0.0) return 0.0;
  return 100.0 * (1.0 + beta2) * prec * rec / (beta2 * prec + rec);
}

double rouge_l(const std::vector<std::string>& hyps,
               const std::vector<std::string>& refs) {
  require_parallel(hyps, refs);
  double sum = 0.0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto h = split_tokens(hyps[i], false);
    const auto r = split_tokens(refs[i], false);
    const int n = (int)h.size(), m = (int)r.size();
    if (n == 0 || m == 0) continue;
    std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
    for (int a = 1; a <= n; ++a)
      for (int b = 1; b <= m; ++b)
        dp[a][b] = h[a - 1] == r[b - 1] ? dp[a - 1][b - 1] + 1
                                        : std::max(dp[a - 1][b], dp[a][b - 1]);
    const int lcs = dp[n][m];
    if (lcs == 0) continue;
    const double p = (double)lcs / n, q = (double)lcs / m;
    sum += 2.0 * p * q / (p + q);
  }
  return 100.0 * sum / (double)hyps.size();
}

double distinct_n(const std::vector<std::string>& hyps, int n) {
  Counts pooled;
  long long total = 0;
  for (const auto& h : hyps) {
    const auto toks = split_tokens(h, false);
    for (int i = 0; i + n <= (int)toks.size(); ++i) {
      pooled[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)]++;
      ++total;
    }
  }
  if (total == 0) return 0.0;
  return (double)pooled.size() / (double)total;
}

std::vector<BucketRow> bucket_report(const std::vector<GraphStats>& stats,
                                     const std::vector<std::string>& hyps,
                                     const std::vector<std::string>& refs,
                                     GraphProperty property,
                                     const std::vector<int>& boundaries) {
  require_parallel(hyps, refs);
  if (stats.size() != hyps.size())
    throw LengthMismatch("stats " + std::to_string(stats.size()) + " vs hyps " +
                         std::to_string(hyps.size()));
  for (std::size_t i = 1; i < boundaries.size(); ++i)
    if (boundaries[i] <= boundaries[i - 1])
      throw LengthMismatch("boundaries must be strictly increasing");
  const int nb = (int)boundaries.size() + 1;
  std::vector<std::vector<std::size_t>> members(nb);
  for (std::size_t i = 0; i < stats.size(); ++i) {
    int v = 0;
    switch (property) {
      case GraphProperty::Size: v = stats[i].size; break;
      case GraphProperty::Diameter: v = stats[i].diameter; break;
      case GraphProperty::Reentrancies: v = stats[i].reentrancies; break;
    }
    int b = nb - 1;
    for (int k = 0; k < (int)boundaries.size(); ++k)
      if (v <= boundaries[k]) { b = k; break; }
    members[b].push_back(i);
  }
  std::vector<BucketRow> out;
  for (int b = 0; b < nb; ++b) {
    if (members[b].empty()) continue;
    BucketRow row;
    if (boundaries.empty())
      row.label = "all";
    else if (b == 0)
      row.label = "<=" + std::to_string(boundaries[0]);
    else if (b == nb - 1)
      row.label = ">" + std::to_string(boundaries.back());
    else
      row.label = std::to_string(boundaries[b - 1] + 1) + "-" +
                  std::to_string(boundaries[b]);
    row.count = (int)members[b].size();
    std::vector<std::string> bh, br;
    for (std::size_t i : members[b]) {
      bh.push_back(hyps[i]);
      br.push_back(refs[i]);
    }
    row.score = bleu(bh, br);
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace g2t
