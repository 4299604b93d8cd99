#pragma once

// Automatic evaluation: corpus BLEU-4 (aggregated n-gram statistics),
// smoothed sentence BLEU for use as a reward, and ROUGE-L.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ktg {

namespace detail {

inline std::map<std::vector<std::string>, long> ngram_counts(
    const std::vector<std::string>& toks, int n) {
  std::map<std::vector<std::string>, long> out;
  for (size_t i = 0; i + n <= toks.size(); ++i)
    ++out[std::vector<std::string>(toks.begin() + long(i), toks.begin() + long(i + n))];
  return out;
}

struct BleuStats {
  long match[4] = {0, 0, 0, 0};  // clipped matches per order
  long total[4] = {0, 0, 0, 0};
  long hyp_len = 0, ref_len = 0;

  void accumulate(const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
    hyp_len += long(hyp.size());
    ref_len += long(ref.size());
    for (int n = 1; n <= 4; ++n) {
      auto hc = ngram_counts(hyp, n);
      auto rc = ngram_counts(ref, n);
      for (const auto& [gram, c] : hc) {
        auto it = rc.find(gram);
        if (it != rc.end()) match[n - 1] += std::min(c, it->second);
        total[n - 1] += c;
      }
    }
  }

  double brevity_penalty() const {
    if (hyp_len >= ref_len || hyp_len == 0) return 1.0;
    return std::exp(1.0 - double(ref_len) / double(hyp_len));
  }
};

}  // namespace detail

// Corpus BLEU-4: geometric mean of modified n-gram precisions with brevity
// penalty, unsmoothed (zero if any order has no match).
inline double bleu4(const std::vector<std::vector<std::string>>& hyps,
                    const std::vector<std::vector<std::string>>& refs) {
  if (hyps.size() != refs.size() || hyps.empty())
    throw std::runtime_error("bleu4: |hyps| must equal |refs| and be >= 1");
  detail::BleuStats st;
  for (size_t i = 0; i < hyps.size(); ++i) st.accumulate(hyps[i], refs[i]);
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    if (st.total[n] == 0 || st.match[n] == 0) return 0.0;
    log_sum += std::log(double(st.match[n]) / double(st.total[n]));
  }
  return st.brevity_penalty() * std::exp(log_sum / 4.0);
}

// Sentence BLEU-4 with add-epsilon smoothing (0.1 on zero counts for orders
// >= 2). No unigram overlap at all yields 0.
inline double bleu_sentence(const std::vector<std::string>& hyp,
                            const std::vector<std::string>& ref, double eps = 0.1) {
  if (hyp.empty() || ref.empty()) return 0.0;
  detail::BleuStats st;
  st.accumulate(hyp, ref);
  if (st.match[0] == 0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < 4; ++n) {
    double num = double(st.match[n]);
    double den = double(st.total[n]);
    if (den == 0.0) {
      num = eps;
      den = 1.0;
    } else if (num == 0.0) {
      num = eps;
    }
    log_sum += std::log(num / den);
  }
  return std::min(1.0, st.brevity_penalty() * std::exp(log_sum / 4.0));
}

inline long lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<long> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// LCS-based F-measure, F = ((1 + g^2) P R) / (R + g^2 P) with gamma = 1.2.
inline double rouge_l(const std::vector<std::string>& hyp, const std::vector<std::string>& ref,
                      double gamma = 1.2) {
  if (hyp.empty() || ref.empty()) throw std::runtime_error("rouge_l: empty sequence");
  long lcs = lcs_length(hyp, ref);
  if (lcs == 0) return 0.0;
  double p = double(lcs) / double(hyp.size());
  double r = double(lcs) / double(ref.size());
  double g2 = gamma * gamma;
  return (1.0 + g2) * p * r / (r + g2 * p);
}

struct MetricReport {
  double bleu4 = 0.0;    // corpus-level
  double rouge_l = 0.0;  // mean of sentence scores
  std::vector<double> per_example_bleu;
  std::vector<double> per_example_rouge;
};

inline MetricReport evaluate_corpus(const std::vector<std::vector<std::string>>& hyps,
                                    const std::vector<std::vector<std::string>>& refs) {
  MetricReport rep;
  rep.bleu4 = bleu4(hyps, refs);
  double rsum = 0.0;
  for (size_t i = 0; i < hyps.size(); ++i) {
    rep.per_example_bleu.push_back(bleu_sentence(hyps[i], refs[i]));
    double r = (hyps[i].empty() || refs[i].empty()) ? 0.0 : rouge_l(hyps[i], refs[i]);
    rep.per_example_rouge.push_back(r);
    rsum += r;
  }
  rep.rouge_l = hyps.empty() ? 0.0 : rsum / double(hyps.size());
  return rep;
}

}  // namespace ktg
