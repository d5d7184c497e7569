#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <random>

#include "doctest.h"
#include "g2t/metrics.hpp"

using namespace g2t;

// The pinned decimals below were computed independently with exact rational
// n-gram arithmetic and verified by hand on the tiny corpora.

TEST_CASE("bleu extremes") {
  std::vector<std::string> same = {"the boy wants to go", "it is cold"};
  CHECK(bleu(same, same) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(bleu({"x y z"}, {"a b c"}, false) == 0.0);
  CHECK(bleu({""}, {"a b"}) == 0.0);
  CHECK_THROWS_AS(bleu({"a"}, {"a", "b"}), LengthMismatch);
}

TEST_CASE("bleu matches the frozen oracle values") {
  std::vector<std::string> h1 = {"the quick brown fox jumps over the lazy dog",
                                 "it was the best of times"};
  std::vector<std::string> r1 = {"the quick brown fox leaps over the lazy dog",
                                 "it was the worst of times"};
  CHECK(bleu(h1, r1) == doctest::Approx(49.616830003403628).epsilon(1e-11));

  // zero 4-gram overlap exercises the epsilon smoothing branch
  std::vector<std::string> h2 = {"the cat sat on the mat", "a quick brown fox"};
  std::vector<std::string> r2 = {"the cat is on the mat",
                                 "the quick brown fox jumps"};
  CHECK(bleu(h2, r2) == doctest::Approx(0.325111804958381).epsilon(1e-9));

  // higher orders fall back to epsilon here
  CHECK(bleu({"a b c d"}, {"a c d"}) ==
        doctest::Approx(0.002236067977500).epsilon(1e-9));
}

TEST_CASE("bleu is invariant to corpus permutation") {
  std::vector<std::string> h = {"a b c", "d e f g", "h i"};
  std::vector<std::string> r = {"a b x", "d e f y", "h z"};
  const double base = bleu(h, r);
  std::vector<int> perm = {2, 0, 1};
  std::vector<std::string> hp, rp;
  for (int i : perm) {
    hp.push_back(h[i]);
    rp.push_back(r[i]);
  }
  CHECK(bleu(hp, rp) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("chrf++ values") {
  CHECK(chrf_pp({"hello there"}, {"hello there"}) ==
        doctest::Approx(100.0).epsilon(1e-12));
  CHECK(chrf_pp({"xyz"}, {"abc"}) == 0.0);
  CHECK(chrf_pp({"hello there"}, {"hello their"}) ==
        doctest::Approx(61.359126984126981).epsilon(1e-9));
  std::vector<std::string> h = {"the cat sat on the mat", "a quick brown fox"};
  std::vector<std::string> r = {"the cat is on the mat",
                                "the quick brown fox jumps"};
  CHECK(chrf_pp(h, r) == doctest::Approx(63.399578768010983).epsilon(1e-9));
}

TEST_CASE("rouge-l values") {
  CHECK(rouge_l({"a b c"}, {"a b c"}) == doctest::Approx(100.0));
  CHECK(rouge_l({"x y"}, {"a b"}) == 0.0);
  // LCS("a b c d", "a c d") = 3, P=3/4, R=1, F = 6/7
  CHECK(rouge_l({"a b c d"}, {"a c d"}) ==
        doctest::Approx(85.714285714285708).epsilon(1e-9));
  std::vector<std::string> h = {"the cat sat on the mat", "a quick brown fox"};
  std::vector<std::string> r = {"the cat is on the mat",
                                "the quick brown fox jumps"};
  CHECK(rouge_l(h, r) == doctest::Approx(75.0).epsilon(1e-9));
}

TEST_CASE("distinct-n values") {
  std::vector<std::string> h = {"a b a", "b c"};
  CHECK(distinct_n(h, 1) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(distinct_n(h, 2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(distinct_n({"q w e r"}, 1) == doctest::Approx(1.0));
  CHECK(distinct_n({"a a a a"}, 1) == doctest::Approx(0.25));
  CHECK(distinct_n({}, 1) == 0.0);
}

TEST_CASE("metric ranges and maximality at identity") {
  std::mt19937_64 rng(4);
  std::vector<std::string> words = {"aa", "bb", "cc", "dd", "ee"};
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<std::string> h, r;
    for (int i = 0; i < 3; ++i) {
      std::string a, b;
      for (int j = 0; j < 1 + (int)(rng() % 6); ++j)
        a += (j ? " " : "") + words[rng() % words.size()];
      for (int j = 0; j < 1 + (int)(rng() % 6); ++j)
        b += (j ? " " : "") + words[rng() % words.size()];
      h.push_back(a);
      r.push_back(b);
    }
    for (double s : {bleu(h, r), chrf_pp(h, r), rouge_l(h, r)}) {
      CHECK(s >= 0.0);
      CHECK(s <= 100.0 + 1e-9);
    }
    CHECK(bleu(h, h) == doctest::Approx(100.0));
    CHECK(chrf_pp(h, h) == doctest::Approx(100.0));
    CHECK(rouge_l(h, h) == doctest::Approx(100.0));
  }
}

TEST_CASE("bucket report") {
  std::vector<GraphStats> stats = {{2, 1, 0}, {5, 2, 1}, {9, 4, 2}, {3, 1, 0}};
  std::vector<std::string> h = {"a b", "c d", "e f", "g h"};
  std::vector<std::string> r = {"a b", "c x", "e f", "y h"};

  // a single catch-all bucket equals the corpus score
  auto rows = bucket_report(stats, h, r, GraphProperty::Size, {});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].label == "all");
  CHECK(rows[0].count == 4);
  CHECK(rows[0].score == doctest::Approx(bleu(h, r)).epsilon(1e-12));

  // counts partition the corpus; empty buckets are absent
  rows = bucket_report(stats, h, r, GraphProperty::Size, {3, 6});
  int total = 0;
  for (const auto& row : rows) total += row.count;
  CHECK(total == 4);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].label == "<=3");
  CHECK(rows[0].count == 2);
  CHECK(rows[1].label == "4-6");
  CHECK(rows[2].label == ">6");

  rows = bucket_report(stats, h, r, GraphProperty::Reentrancies, {5, 9});
  REQUIRE(rows.size() == 1);  // everything lands in the first bucket
  CHECK(rows[0].count == 4);

  CHECK_THROWS_AS(
      bucket_report(stats, h, r, GraphProperty::Size, {5, 5}),
      LengthMismatch);

  // random split: counts always sum to the corpus size
  std::mt19937_64 rng(6);
  for (int iter = 0; iter < 20; ++iter) {
    std::vector<GraphStats> st;
    std::vector<std::string> hh, rr;
    const int n = 1 + (int)(rng() % 12);
    for (int i = 0; i < n; ++i) {
      st.push_back({1 + (int)(rng() % 20), 0, 0});
      hh.push_back("tok a");
      rr.push_back("tok b");
    }
    auto rep = bucket_report(st, hh, rr, GraphProperty::Size, {4, 9, 15});
    int c = 0;
    for (const auto& row : rep) c += row.count;
    CHECK(c == n);
  }
}
