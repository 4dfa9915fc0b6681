#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sentcomp/fsc.hpp"

namespace sentcomp::decode {

struct DecodeEvent {
  std::string word;  // surface form; empty for the end-of-sequence event
  real log_p = 0;
  bool is_eos = false;
};

// Per-step distribution driver for decoding: an opaque recurrent state, the
// events reachable from it, and the transition taken on an emitted word.
class StepScorer {
 public:
  virtual ~StepScorer() = default;

  struct State {
    std::shared_ptr<const void> payload;  // scorer-private recurrent state
    int step = 1;                         // 1-based index of the next emission
  };

  virtual State initial() const = 0;
  virtual std::vector<DecodeEvent> expand(const State& st) const = 0;
  virtual State advance(const State& st, const std::string& word) const = 0;
  // Log-probability mass of ending a hypothesis without an end-of-sequence
  // event (a model whose length cap truncates the measure); -inf when the
  // model cannot end there.
  virtual real closing_log_prob(const State&) const;
};

struct BeamResult {
  std::vector<std::string> words;
  real log_prob = 0;
  bool finished = false;  // false: length budget ran out with nothing complete
};

// Length-synchronous beam search. End events compete with word events in the
// per-step ranking; one that outranks the k-th surviving word candidate
// retires to a completed pool without consuming a beam slot, anything lower
// is dropped. Ties between candidates keep their expansion order. The best
// completed hypothesis by raw log probability wins; length_norm > 0 instead
// divides each completed score by length^length_norm before the comparison.
// If nothing completes within max_len steps the best open hypothesis is
// returned unfinished.
BeamResult beam_search(const StepScorer& scorer, int k, int max_len, real length_norm = 0);

// Argmax at every step, stopping at the end event or the length budget.
BeamResult greedy_decode(const StepScorer& scorer, int max_len);

// Pointer-only decoding over the source positions. Word events aggregate
// every position where the word occurs; the end event is hidden at step one
// and a hypothesis that reaches the model's length cap closes for free, both
// matching the sampling measure.
class ExtractiveScorer : public StepScorer {
 public:
  ExtractiveScorer(const model::CompressionNetwork& q, const model::EncodedSource& src,
                   int max_len);

  State initial() const override;
  std::vector<DecodeEvent> expand(const State& st) const override;
  State advance(const State& st, const std::string& word) const override;
  real closing_log_prob(const State& st) const override;

 private:
  const model::CompressionNetwork* q_;
  const model::EncodedSource* src_;
  int max_len_;
};

// Combined pointer/vocabulary decoding; sequences only end through the
// explicit end event, which is hidden at step one so the empty output can
// never be produced.
class AbstractiveScorer : public StepScorer {
 public:
  AbstractiveScorer(const model::FscModel& fsc, const model::EncodedSource& src);

  State initial() const override;
  std::vector<DecodeEvent> expand(const State& st) const override;
  State advance(const State& st, const std::string& word) const override;

 private:
  const model::FscModel* fsc_;
  const model::EncodedSource* src_;
};

// Encode, score and search in one call; the length budget is the model's
// compression cap for the source.
BeamResult compress_extractive(const model::CompressionNetwork& q,
                               const std::vector<std::string>& source, int beam,
                               real length_norm = 0);
BeamResult compress_abstractive(const model::FscModel& fsc,
                                const std::vector<std::string>& source, int beam,
                                real length_norm = 0);

}  // namespace sentcomp::decode
