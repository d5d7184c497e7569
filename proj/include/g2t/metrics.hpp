#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "g2t/graph.hpp"

namespace g2t {

struct LengthMismatch : std::runtime_error {
  explicit LengthMismatch(const std::string& m) : std::runtime_error(m) {}
};

// Corpus-level BLEU-4 with brevity penalty, in [0,100]. Tokenization is
// whitespace on the given strings. With smooth=true a zero (or empty)
// n-gram precision is replaced by eps.
double bleu(const std::vector<std::string>& hyps,
            const std::vector<std::string>& refs, bool smooth = true,
            double eps = 1e-9);

// chrF++: character n-grams 1..6 over whitespace-stripped text plus word
// n-grams 1..2, precision/recall averaged across orders, F with beta=2.
double chrf_pp(const std::vector<std::string>& hyps,
               const std::vector<std::string>& refs);

// Mean sentence-level LCS F1, in [0,100].
double rouge_l(const std::vector<std::string>& hyps,
               const std::vector<std::string>& refs);

// Unique n-grams / total n-grams pooled over the corpus.
double distinct_n(const std::vector<std::string>& hyps, int n);

enum class GraphProperty { Size, Diameter, Reentrancies };

struct BucketRow {
  std::string label;
  int count = 0;
  double score = 0.0;  // corpus BLEU of the bucket
};

// Partition by the chosen property at the given strictly increasing
// boundaries; empty buckets are omitted.
std::vector<BucketRow> bucket_report(const std::vector<GraphStats>& stats,
                                     const std::vector<std::string>& hyps,
                                     const std::vector<std::string>& refs,
                                     GraphProperty property,
                                     const std::vector<int>& boundaries);

}  // namespace g2t
