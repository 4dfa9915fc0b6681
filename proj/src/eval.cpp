#include "sentcomp/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>

namespace sentcomp::eval {

namespace {

std::vector<std::string> lowercased(const std::vector<std::string>& tokens) {
  std::vector<std::string> out = tokens;
  for (auto& t : out)
    std::transform(t.begin(), t.end(), t.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// n-gram key: tokens joined on a separator no tokenizer output contains
std::map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, int n) {
  std::map<std::string, int> counts;
  for (int i = 0; i + n <= static_cast<int>(tokens.size()); ++i) {
    std::string key = tokens[i];
    for (int j = 1; j < n; ++j) key += '\x1f' + tokens[i + j];
    ++counts[key];
  }
  return counts;
}

RougeScore from_overlap(real overlap, real cand_total, real ref_total) {
  RougeScore s;
  s.recall = ref_total > 0 ? overlap / ref_total : 0;
  s.precision = cand_total > 0 ? overlap / cand_total : 0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0;
  return s;
}

}  // namespace

RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n) {
  if (n < 1) throw std::invalid_argument("rouge_n: order must be >= 1");
  auto cand = ngram_counts(lowercased(candidate), n);
  auto ref = ngram_counts(lowercased(reference), n);
  real overlap = 0, cand_total = 0, ref_total = 0;
  for (const auto& [key, count] : cand) {
    cand_total += count;
    auto it = ref.find(key);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  for (const auto& [key, count] : ref) ref_total += count;
  return from_overlap(overlap, cand_total, ref_total);
}

RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference) {
  auto cand = lowercased(candidate);
  auto ref = lowercased(reference);
  size_t m = cand.size(), n = ref.size();
  std::vector<std::vector<int>> lcs(m + 1, std::vector<int>(n + 1, 0));
  for (size_t i = 1; i <= m; ++i)
    for (size_t j = 1; j <= n; ++j)
      lcs[i][j] = cand[i - 1] == ref[j - 1] ? lcs[i - 1][j - 1] + 1
                                            : std::max(lcs[i - 1][j], lcs[i][j - 1]);
  return from_overlap(real(lcs[m][n]), real(m), real(n));
}

RougeSummary rouge_corpus(const std::vector<std::vector<std::string>>& candidates,
                          const std::vector<std::vector<std::string>>& references) {
  if (candidates.size() != references.size())
    throw std::invalid_argument("rouge_corpus: " + std::to_string(candidates.size()) +
                                " candidates vs " + std::to_string(references.size()) +
                                " references");
  if (candidates.empty()) throw std::invalid_argument("rouge_corpus: empty input");
  RougeSummary sum;
  auto fold = [&](RougeScore& acc, const RougeScore& s) {
    acc.recall += s.recall;
    acc.precision += s.precision;
    acc.f1 += s.f1;
  };
  for (size_t i = 0; i < candidates.size(); ++i) {
    fold(sum.r1, rouge_n(candidates[i], references[i], 1));
    fold(sum.r2, rouge_n(candidates[i], references[i], 2));
    fold(sum.rl, rouge_l(candidates[i], references[i]));
  }
  real n = real(candidates.size());
  for (RougeScore* s : {&sum.r1, &sum.r2, &sum.rl}) {
    s->recall /= n;
    s->precision /= n;
    s->f1 /= n;
  }
  return sum;
}

real perplexity_fsc(const model::FscModel& fsc, const std::vector<data::SentencePair>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("perplexity: empty dataset");
  ad::NoGradScope eval;
  real total = 0, tokens = 0;
  for (const auto& pair : pairs) {
    model::EncodedSource src = fsc.q->encode(pair.source);
    total += fsc.log_prob(src, pair.compression).item();
    tokens += real(pair.compression.size()) + 1;
  }
  return std::exp(-total / tokens);
}

real perplexity_lm(const model::LanguageModelPrior& lm,
                   const std::vector<std::vector<std::string>>& sentences) {
  if (sentences.empty()) throw std::invalid_argument("perplexity: empty dataset");
  ad::NoGradScope eval;
  real total = 0, tokens = 0;
  for (const auto& sentence : sentences) {
    total += lm.log_prob(sentence);
    tokens += real(sentence.size()) + 1;
  }
  return std::exp(-total / tokens);
}

}  // namespace sentcomp::eval
