#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ktg/metrics.hpp"

using namespace ktg;

namespace {

std::vector<std::string> toks(std::initializer_list<const char*> xs) {
  return std::vector<std::string>(xs.begin(), xs.end());
}

// Exponential-time reference LCS: longest subsequence of `a` that is also a
// subsequence of `b`.
long lcs_brute(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  long best = 0;
  for (unsigned mask = 0; mask < (1u << a.size()); ++mask) {
    std::vector<std::string> sub;
    for (size_t i = 0; i < a.size(); ++i)
      if (mask & (1u << i)) sub.push_back(a[i]);
    size_t j = 0;
    for (const auto& t : b)
      if (j < sub.size() && t == sub[j]) ++j;
    if (j == sub.size()) best = std::max(best, long(sub.size()));
  }
  return best;
}

}  // namespace

TEST_CASE("corpus BLEU-4 equals the hand-computed value on a pure-precision case") {
  // All hypothesis n-grams up to order 4 appear in the reference; the score
  // reduces to the brevity penalty e^(1 - 6/4).
  auto hyp = toks({"the", "cat", "sat", "on"});
  auto ref = toks({"the", "cat", "sat", "on", "the", "mat"});
  double want = std::exp(1.0 - 6.0 / 4.0);
  REQUIRE(bleu4({hyp}, {ref}) == Catch::Approx(want).epsilon(1e-12));
}

TEST_CASE("corpus BLEU-4 identity, zero-overlap, and bounds") {
  auto a = toks({"where", "was", "alice", "born", "?"});
  auto b = toks({"totally", "different", "words", "entirely", "here"});
  REQUIRE(bleu4({a}, {a}) == Catch::Approx(1.0));
  REQUIRE(bleu4({a}, {b}) == 0.0);
  REQUIRE_THROWS(bleu4({}, {}));
  REQUIRE_THROWS(bleu4({a}, {a, b}));

  std::mt19937_64 rng(3);
  std::vector<std::string> alphabet = {"a", "b", "c", "d"};
  for (int it = 0; it < 200; ++it) {
    std::vector<std::vector<std::string>> hyps, refs;
    int n = 1 + int(rng() % 4);
    for (int i = 0; i < n; ++i) {
      std::vector<std::string> h, r;
      for (int k = 0; k < 4 + int(rng() % 5); ++k) h.push_back(alphabet[rng() % 4]);
      for (int k = 0; k < 4 + int(rng() % 5); ++k) r.push_back(alphabet[rng() % 4]);
      hyps.push_back(h);
      refs.push_back(r);
    }
    double v = bleu4(hyps, refs);
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("corpus BLEU-4 aggregates statistics, invariant to pair order") {
  auto h1 = toks({"a", "b", "c", "d", "e"});
  auto r1 = toks({"a", "b", "c", "d", "x"});
  auto h2 = toks({"p", "q", "r", "s"});
  auto r2 = toks({"p", "q", "r", "s", "t", "u"});
  REQUIRE(bleu4({h1, h2}, {r1, r2}) == Catch::Approx(bleu4({h2, h1}, {r2, r1})));
}

TEST_CASE("sentence BLEU smoothing and zero-overlap rule") {
  auto a = toks({"where", "was", "alice", "born", "?"});
  REQUIRE(bleu_sentence(a, a) == Catch::Approx(1.0));
  // no shared unigrams -> hard zero even with smoothing
  REQUIRE(bleu_sentence(a, toks({"x", "y", "z"})) == 0.0);
  // unigram overlap but no higher-order matches -> smoothed positive score
  auto shuffled = toks({"born", "where", "?", "was", "alice"});
  double v = bleu_sentence(a, shuffled);
  REQUIRE(v > 0.0);
  REQUIRE(v < 1.0);
  REQUIRE(bleu_sentence({}, a) == 0.0);
  // short hypotheses never divide by a zero n-gram total
  REQUIRE(bleu_sentence(toks({"alice"}), a) > 0.0);
}

TEST_CASE("LCS matches brute force on fuzzed short sequences") {
  REQUIRE(lcs_length(toks({"a", "b", "c"}), toks({"a", "x", "c"})) == 2);
  std::mt19937_64 rng(17);
  std::vector<std::string> alphabet = {"a", "b", "c"};
  for (int it = 0; it < 500; ++it) {
    std::vector<std::string> a, b;
    size_t la = rng() % 9, lb = rng() % 9;
    for (size_t i = 0; i < la; ++i) a.push_back(alphabet[rng() % 3]);
    for (size_t i = 0; i < lb; ++i) b.push_back(alphabet[rng() % 3]);
    REQUIRE(lcs_length(a, b) == lcs_brute(a, b));
  }
}

TEST_CASE("ROUGE-L F-measure with gamma weighting") {
  auto a = toks({"a", "b"});
  auto b = toks({"a", "c"});
  // P == R == 0.5 -> F == 0.5 for any gamma
  REQUIRE(rouge_l(a, b) == Catch::Approx(0.5));
  REQUIRE(rouge_l(a, a) == Catch::Approx(1.0));
  REQUIRE(rouge_l(a, toks({"x", "y"})) == 0.0);
  REQUIRE_THROWS(rouge_l({}, a));
  // asymmetric case computed by hand: lcs=2, P=2/3, R=2/4, gamma=1.2
  auto hyp = toks({"a", "b", "x"});
  auto ref = toks({"a", "q", "b", "r"});
  double p = 2.0 / 3.0, r = 2.0 / 4.0, g2 = 1.44;
  REQUIRE(rouge_l(hyp, ref) == Catch::Approx((1 + g2) * p * r / (r + g2 * p)));
}

TEST_CASE("corpus evaluation: hypotheses identical to references score 1.0") {
  std::vector<std::vector<std::string>> refs = {
      toks({"where", "was", "alice", "born", "?"}),
      toks({"who", "is", "the", "spouse", "of", "bob", "?"})};
  auto rep = evaluate_corpus(refs, refs);
  REQUIRE(rep.bleu4 == Catch::Approx(1.0));
  REQUIRE(rep.rouge_l == Catch::Approx(1.0));
  REQUIRE(rep.per_example_bleu.size() == 2);
  REQUIRE(rep.per_example_rouge[0] == Catch::Approx(1.0));
}
