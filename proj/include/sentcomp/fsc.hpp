#pragma once

#include "sentcomp/asc.hpp"

namespace sentcomp::model {

// Supervised compression sharing the ASC pointer network. Each step mixes the
// pointer attention over source positions with a full-vocabulary softmax,
// gated by a selection factor t in (0,1): a word drawn from the source gets
// t*alpha mass summed over its positions plus, when it is also in the
// vocabulary, (1-t)*beta; everything else rides on (1-t)*beta alone. The
// vocabulary softmax excludes <pad> and <s>, which no step may emit, so the
// combined event distribution sums to exactly one.
struct FscModel {
  CompressionNetwork* q = nullptr;  // shared by reference, never owned
  Parameter w_beta;                 // [V, H]
  Parameter m_sel;                  // [2H, H]
  // Also route (1-t)*beta(<unk>) to source words outside the vocabulary.
  // Default off: that mass already belongs to the literal <unk> event and
  // counting it twice breaks normalization.
  bool unk_beta = false;

  FscModel() = default;
  FscModel(CompressionNetwork& shared, std::mt19937_64& rng);

  // beta over the usable vocabulary; entry k corresponds to vocab id k+2.
  Var vocab_scores(const Var& h_c) const;
  // t = sigmoid(eta^T M h_c) with eta the attention-weighted source state.
  Var selection_factor(const Var& stacked_states, const Var& alpha, const Var& h_c) const;

  // The three ingredients of the combined distribution at one decoding step.
  struct Step {
    Var alpha;  // [n+1] pointer attention, EOS position last
    Var beta;   // [V-2] vocabulary distribution
    Var t;      // scalar gate
  };
  Step step(const EncodedSource& src, const Var& h_c) const;

  // log p of emitting `word` (or the end symbol) under the mixed step.
  Var event_log_prob(const EncodedSource& src, const Step& st, const std::string& word,
                     bool is_eos) const;
  // Teacher-forced log p(c|s) including the closing end-symbol step.
  Var log_prob(const EncodedSource& src, const std::vector<std::string>& c) const;
  // Negated sum of log p over labelled pairs.
  Var loss(const std::vector<data::SentencePair>& batch) const;

  // Every event and its probability at one step, for normalization checks
  // and abstractive decoding. The end symbol is keyed "</s>".
  std::vector<std::pair<std::string, real>> event_distribution(const EncodedSource& src,
                                                               const Step& st) const;

  // Head parameters only; the shared pointer parameters live in *q.
  std::vector<Parameter> params() const { return {w_beta, m_sel}; }
};

}  // namespace sentcomp::model
