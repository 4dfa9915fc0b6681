#include "sentcomp/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sentcomp::decode {

using ad::NoGradScope;
using ad::Var;
using model::EncodedSource;

namespace {
constexpr real ninf = -std::numeric_limits<real>::infinity();
}

real StepScorer::closing_log_prob(const State&) const { return ninf; }

BeamResult beam_search(const StepScorer& scorer, int k, int max_len, real length_norm) {
  if (k < 1) throw std::invalid_argument("beam_search: width must be >= 1");
  if (max_len < 1) throw std::invalid_argument("beam_search: max_len must be >= 1");

  struct Hyp {
    std::vector<std::string> words;
    real log_p = 0;
    StepScorer::State state;
  };
  std::vector<Hyp> active{{{}, 0, scorer.initial()}};
  std::vector<BeamResult> completed;
  auto retire = [&](const Hyp& h, real extra) {
    completed.push_back({h.words, h.log_p + extra, true});
  };

  for (int t = 1; t <= max_len && !active.empty(); ++t) {
    struct Cand {
      int parent;
      std::string word;  // empty for the end event
      real log_p;
      bool is_eos;
    };
    std::vector<Cand> cands;
    for (size_t i = 0; i < active.size(); ++i) {
      std::vector<DecodeEvent> events = scorer.expand(active[i].state);
      if (events.empty()) {  // the model cannot continue; end here if it may
        real close = scorer.closing_log_prob(active[i].state);
        if (close > ninf) retire(active[i], close);
        continue;
      }
      for (const DecodeEvent& ev : events) {
        if (!(ev.log_p > ninf)) continue;
        cands.push_back({static_cast<int>(i), ev.word, active[i].log_p + ev.log_p, ev.is_eos});
      }
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) { return a.log_p > b.log_p; });
    // walk the ranking: end events retire only while word slots remain open,
    // so a completion survives exactly when it outranks the k-th best word
    // candidate; this keeps the unit beam identical to greedy decoding
    std::vector<Hyp> next;
    for (const Cand& c : cands) {
      if (static_cast<int>(next.size()) == k) break;
      if (c.is_eos) {
        completed.push_back({active[c.parent].words, c.log_p, true});
        continue;
      }
      Hyp h;
      h.words = active[c.parent].words;
      h.words.push_back(c.word);
      h.log_p = c.log_p;
      h.state = scorer.advance(active[c.parent].state, c.word);
      next.push_back(std::move(h));
    }
    active = std::move(next);
    // raw scores only fall along a path, so once the best finished hypothesis
    // matches the best open one nothing better can still appear
    if (length_norm == 0 && !completed.empty() && !active.empty()) {
      real best_done = ninf;
      for (const BeamResult& c : completed) best_done = std::max(best_done, c.log_prob);
      if (best_done >= active.front().log_p) active.clear();
    }
  }
  for (const Hyp& h : active) {
    real close = scorer.closing_log_prob(h.state);
    if (close > ninf) retire(h, close);
  }

  auto final_score = [&](const BeamResult& r) {
    if (length_norm == 0) return r.log_prob;
    return r.log_prob / std::pow(real(std::max<size_t>(r.words.size(), 1)), length_norm);
  };
  if (!completed.empty()) {
    const BeamResult* best = &completed.front();
    for (const BeamResult& c : completed)
      if (final_score(c) > final_score(*best)) best = &c;
    return *best;
  }
  if (!active.empty()) {
    const Hyp* best = &active.front();
    for (const Hyp& h : active)
      if (h.log_p > best->log_p) best = &h;
    return {best->words, best->log_p, false};
  }
  return {{}, ninf, false};
}

BeamResult greedy_decode(const StepScorer& scorer, int max_len) {
  if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
  StepScorer::State st = scorer.initial();
  std::vector<std::string> words;
  real total = 0;
  for (int t = 1; t <= max_len; ++t) {
    std::vector<DecodeEvent> events = scorer.expand(st);
    const DecodeEvent* best = nullptr;
    for (const DecodeEvent& ev : events)
      if (ev.log_p > ninf && (!best || ev.log_p > best->log_p)) best = &ev;
    if (!best) break;
    if (best->is_eos) return {words, total + best->log_p, true};
    words.push_back(best->word);
    total += best->log_p;
    st = scorer.advance(st, best->word);
  }
  real close = scorer.closing_log_prob(st);
  if (close > ninf) return {words, total + close, true};
  return {words, total, false};
}

// ---- pointer-only scorer ----------------------------------------------------

ExtractiveScorer::ExtractiveScorer(const model::CompressionNetwork& q, const EncodedSource& src,
                                   int max_len)
    : q_(&q), src_(&src), max_len_(max_len) {
  if (max_len < 1) throw std::invalid_argument("extractive scorer: max_len must be >= 1");
}

StepScorer::State ExtractiveScorer::initial() const {
  NoGradScope eval;
  auto rnn = std::make_shared<nn::StackedRnn::State>(
      q_->compressor.step(q_->initial_state(*src_), q_->cmp_embed(data::Vocabulary::bos_id)));
  return {std::move(rnn), 1};
}

std::vector<DecodeEvent> ExtractiveScorer::expand(const State& st) const {
  if (st.step > max_len_) return {};
  NoGradScope eval;
  const auto& rnn = *static_cast<const nn::StackedRnn::State*>(st.payload.get());
  Var dist = q_->step_distribution(*src_, q_->compressor.output(rnn), st.step);
  std::vector<DecodeEvent> out;
  std::vector<std::string> seen;
  for (int i = 0; i < src_->n(); ++i) {
    const std::string& w = src_->tokens[i];
    if (std::find(seen.begin(), seen.end(), w) != seen.end()) continue;
    seen.push_back(w);
    real p = 0;
    for (int pos : src_->match.at(w)) p += dist.value().at(pos);
    out.push_back({w, std::log(p), false});
  }
  if (dist.value().numel() == src_->n() + 1)
    out.push_back({"", std::log(dist.value().at(src_->eos_position())), true});
  return out;
}

StepScorer::State ExtractiveScorer::advance(const State& st, const std::string& word) const {
  NoGradScope eval;
  const auto& rnn = *static_cast<const nn::StackedRnn::State*>(st.payload.get());
  auto next = std::make_shared<nn::StackedRnn::State>(
      q_->compressor.step(rnn, q_->cmp_embed(q_->cmp_vocab.id(word))));
  return {std::move(next), st.step + 1};
}

real ExtractiveScorer::closing_log_prob(const State& st) const {
  // at the length cap the measure truncates: no end factor is owed
  return st.step == max_len_ + 1 ? real(0) : ninf;
}

// ---- combined scorer --------------------------------------------------------

AbstractiveScorer::AbstractiveScorer(const model::FscModel& fsc, const EncodedSource& src)
    : fsc_(&fsc), src_(&src) {}

StepScorer::State AbstractiveScorer::initial() const {
  NoGradScope eval;
  const auto& q = *fsc_->q;
  auto rnn = std::make_shared<nn::StackedRnn::State>(
      q.compressor.step(q.initial_state(*src_), q.cmp_embed(data::Vocabulary::bos_id)));
  return {std::move(rnn), 1};
}

std::vector<DecodeEvent> AbstractiveScorer::expand(const State& st) const {
  NoGradScope eval;
  const auto& q = *fsc_->q;
  const auto& rnn = *static_cast<const nn::StackedRnn::State*>(st.payload.get());
  model::FscModel::Step step = fsc_->step(*src_, q.compressor.output(rnn));
  auto events = fsc_->event_distribution(*src_, step);
  std::vector<DecodeEvent> out;
  out.reserve(events.size());
  for (size_t i = 0; i < events.size(); ++i) {
    bool eos = i + 1 == events.size();  // the end event is always listed last
    if (events[i].second <= 0) continue;
    // an empty compression is never a usable output, so the first step hides
    // the end event; scores stay unnormalized, hence exact under the model
    if (eos && st.step == 1) continue;
    out.push_back({eos ? std::string() : events[i].first, std::log(events[i].second), eos});
  }
  return out;
}

StepScorer::State AbstractiveScorer::advance(const State& st, const std::string& word) const {
  NoGradScope eval;
  const auto& q = *fsc_->q;
  const auto& rnn = *static_cast<const nn::StackedRnn::State*>(st.payload.get());
  auto next = std::make_shared<nn::StackedRnn::State>(
      q.compressor.step(rnn, q.cmp_embed(q.cmp_vocab.id(word))));
  return {std::move(next), st.step + 1};
}

// ---- whole-sentence helpers -------------------------------------------------

BeamResult compress_extractive(const model::CompressionNetwork& q,
                               const std::vector<std::string>& source, int beam,
                               real length_norm) {
  NoGradScope eval;
  EncodedSource src = q.encode(source);
  int cap = model::max_compression_length(src.n(), q.cfg);
  ExtractiveScorer scorer(q, src, cap);
  return beam_search(scorer, beam, cap, length_norm);
}

BeamResult compress_abstractive(const model::FscModel& fsc,
                                const std::vector<std::string>& source, int beam,
                                real length_norm) {
  NoGradScope eval;
  const auto& q = *fsc.q;
  EncodedSource src = q.encode(source);
  int cap = model::max_compression_length(src.n(), q.cfg);
  AbstractiveScorer scorer(fsc, src);
  return beam_search(scorer, beam, cap, length_norm);
}

}  // namespace sentcomp::decode
