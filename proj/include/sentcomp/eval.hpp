#pragma once

#include <string>
#include <vector>

#include "sentcomp/fsc.hpp"

namespace sentcomp::eval {

// Matching is lowercased and exact: no stemming, no stopword removal, one
// reference, full-length counts.
struct RougeScore {
  real recall = 0;
  real precision = 0;
  real f1 = 0;  // harmonic mean; 0 when precision + recall is 0
};

// Clipped n-gram overlap. Recall divides by the reference n-gram count,
// precision by the candidate's; an empty denominator scores 0.
RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n);

// Longest-common-subsequence variant over whole token sequences.
RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference);

struct RougeSummary {
  RougeScore r1, r2, rl;
};

// Mean of the per-pair scores over aligned candidate/reference lists.
RougeSummary rouge_corpus(const std::vector<std::vector<std::string>>& candidates,
                          const std::vector<std::vector<std::string>>& references);

// exp of the mean per-token negative log-likelihood; the end-of-sequence
// token of every compression counts.
real perplexity_fsc(const model::FscModel& fsc, const std::vector<data::SentencePair>& pairs);
real perplexity_lm(const model::LanguageModelPrior& lm,
                   const std::vector<std::vector<std::string>>& sentences);

}  // namespace sentcomp::eval
