#pragma once

// Sentence-level BLEU used both for repeat detection and for evaluation.
//
// Tokens are lower-cased whitespace words. N = min(4, |candidate|) with
// uniform weights. Unigram precision is left unsmoothed so that texts with
// no word in common score 0; higher orders use (m + 1) / (t + 1).
// Brevity penalty is exp(1 - r/c) when the candidate is not longer than the
// reference.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "text2flow/text.hpp"

namespace text2flow {

namespace detail {

inline std::map<std::vector<std::string>, int> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  std::map<std::vector<std::string>, int> out;
  if (toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++out[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                   toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

}  // namespace detail

inline std::vector<std::string> bleu_tokens(std::string_view s) { return text::split_ws(text::lower(s)); }

inline double bleu_tokens_score(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
  if (cand.empty() || ref.empty()) return 0.0;
  const std::size_t max_n = std::min<std::size_t>(4, cand.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= max_n; ++n) {
    const auto c = detail::ngram_counts(cand, n);
    const auto r = detail::ngram_counts(ref, n);
    long matched = 0;
    long total = 0;
    for (const auto& [gram, count] : c) {
      total += count;
      if (auto it = r.find(gram); it != r.end()) matched += std::min(count, it->second);
    }
    double p;
    if (n == 1) {
      if (matched == 0) return 0.0;
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else {
      p = static_cast<double>(matched + 1) / static_cast<double>(total + 1);
    }
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(cand.size());
  const double r = static_cast<double>(ref.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  const double score = bp * std::exp(log_sum / static_cast<double>(max_n));
  return std::clamp(score, 0.0, 1.0);
}

inline double bleu(std::string_view candidate, std::string_view reference) {
  return bleu_tokens_score(bleu_tokens(candidate), bleu_tokens(reference));
}

}  // namespace text2flow
