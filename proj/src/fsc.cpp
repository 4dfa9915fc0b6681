#include "sentcomp/fsc.hpp"

#include <set>

namespace sentcomp::model {

using namespace sentcomp::ad;
using data::Vocabulary;

FscModel::FscModel(CompressionNetwork& shared, std::mt19937_64& rng) : q(&shared) {
  int H = shared.cfg.dim;
  w_beta = {"fsc.w", make_param(nn::uniform_init({shared.cmp_vocab.size(), H}, rng))};
  m_sel = {"fsc.m_sel", make_param(nn::uniform_init({2 * H, H}, rng))};
}

Var FscModel::vocab_scores(const Var& h_c) const {
  Var logits = matmul(w_beta.var, h_c);
  return softmax(slice(logits, 2, q->cmp_vocab.size() - 2));
}

Var FscModel::selection_factor(const Var& stacked_states, const Var& alpha,
                               const Var& h_c) const {
  Var eta = matmul(alpha, stacked_states);  // [2H]
  return sigmoid(dot(matmul(eta, m_sel.var), h_c));
}

FscModel::Step FscModel::step(const EncodedSource& src, const Var& h_c) const {
  Step st;
  st.alpha = softmax(q->pointer_scores(src, h_c));
  st.beta = vocab_scores(h_c);
  st.t = selection_factor(src.stacked, st.alpha, h_c);
  return st;
}

namespace {

// beta index of a vocab id; <pad>/<s> are unmappable and fold into <unk>.
int beta_index(int id) { return id >= 2 ? id - 2 : Vocabulary::unk_id - 2; }

}  // namespace

Var FscModel::event_log_prob(const EncodedSource& src, const Step& st, const std::string& word,
                             bool is_eos) const {
  Var keep = st.t;
  Var spill = affine(st.t, -1, 1);  // 1 - t
  Var p;
  if (is_eos) {
    p = add(mul(keep, pick(st.alpha, src.eos_position())),
            mul(spill, pick(st.beta, beta_index(Vocabulary::eos_id))));
  } else {
    int id = q->cmp_vocab.id(word);
    auto it = src.match.find(word);
    if (it != src.match.end()) {
      Var pointer_mass = mul(keep, pick_sum(st.alpha, it->second));
      if (id != Vocabulary::unk_id)
        p = add(pointer_mass, mul(spill, pick(st.beta, beta_index(id))));
      else if (unk_beta)
        p = add(pointer_mass, mul(spill, pick(st.beta, beta_index(Vocabulary::unk_id))));
      else
        p = pointer_mass;
    } else {
      p = mul(spill, pick(st.beta, beta_index(id)));
    }
  }
  return ad::log(p);
}

Var FscModel::log_prob(const EncodedSource& src, const std::vector<std::string>& c) const {
  if (c.empty()) throw std::invalid_argument("fsc log_prob: empty compression");
  nn::StackedRnn::State state = q->initial_state(src);
  Var input = q->cmp_embed(Vocabulary::bos_id);
  Var total = Var::constant(Tensor::scalar(0));
  for (size_t j = 0; j <= c.size(); ++j) {
    state = q->compressor.step(state, input);
    Step st = step(src, q->compressor.output(state));
    bool is_eos = j == c.size();
    total = add(total, event_log_prob(src, st, is_eos ? "" : c[j], is_eos));
    if (!is_eos) input = q->cmp_embed(q->cmp_vocab.id(c[j]));
  }
  return total;
}

Var FscModel::loss(const std::vector<data::SentencePair>& batch) const {
  if (batch.empty()) throw std::invalid_argument("fsc loss: empty batch");
  Var total = Var::constant(Tensor::scalar(0));
  for (const auto& pair : batch)
    total = add(total, log_prob(q->encode(pair.source), pair.compression));
  return scale(total, -1);
}

std::vector<std::pair<std::string, real>> FscModel::event_distribution(const EncodedSource& src,
                                                                       const Step& st) const {
  NoGradScope no_grad;
  std::vector<std::pair<std::string, real>> out;
  std::set<std::string> source_words(src.tokens.begin(), src.tokens.end());
  for (const auto& w : source_words)
    out.emplace_back(w, ad::exp(event_log_prob(src, st, w, false)).item());
  for (int id = Vocabulary::unk_id; id < q->cmp_vocab.size(); ++id) {
    const std::string& w = q->cmp_vocab.token(id);
    if (source_words.count(w)) continue;  // already counted through the source
    out.emplace_back(w, ad::exp(event_log_prob(src, st, w, false)).item());
  }
  out.emplace_back("</s>", ad::exp(event_log_prob(src, st, "", true)).item());
  return out;
}

}  // namespace sentcomp::model
