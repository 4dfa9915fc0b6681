#include "sentcomp/asc.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace sentcomp::model {

using namespace sentcomp::ad;

int max_compression_length(int source_len, const ModelConfig& cfg) {
  int cap = static_cast<int>(std::ceil(cfg.compression_ratio * source_len));
  return std::max(cfg.min_compression_len, cap);
}

CompressionNetwork::CompressionNetwork(const ModelConfig& cfg, Vocabulary enc_vocab_in,
                                       Vocabulary cmp_vocab_in, std::mt19937_64& rng)
    : cfg(cfg), enc_vocab(std::move(enc_vocab_in)), cmp_vocab(std::move(cmp_vocab_in)) {
  int H = cfg.dim;
  enc_embed = nn::Embedding("enc.embed", enc_vocab.size(), H, rng);
  if (cfg.share_embeddings) {
    if (enc_vocab.index_to_token != cmp_vocab.index_to_token)
      throw std::invalid_argument(
          "CompressionNetwork: share_embeddings requires identical vocabularies");
    cmp_embed = enc_embed;
  } else {
    cmp_embed = nn::Embedding("cmp.embed", cmp_vocab.size(), H, rng);
  }
  enc_fwd = nn::StackedRnn("enc.fwd", nn::CellKind::lstm, cfg.encoder_layers, H, H, true, 0, rng);
  enc_bwd = nn::StackedRnn("enc.bwd", nn::CellKind::lstm, cfg.encoder_layers, H, H, true, 0, rng);
  compressor =
      nn::StackedRnn("cmp.rnn", nn::CellKind::lstm, cfg.compressor_layers, H, H, true, 0, rng);
  w1 = {"cmp.attn.w1", make_param(nn::uniform_init({H, H}, rng))};
  w2t = {"cmp.attn.w2t", make_param(nn::uniform_init({2 * H, H}, rng))};
  w3 = {"cmp.attn.w3", make_param(nn::uniform_init({H}, rng))};
  for (int l = 0; l < cfg.compressor_layers; ++l) {
    std::string nm = "cmp.init.l" + std::to_string(l);
    init_w.push_back({nm + ".w", make_param(nn::uniform_init({2 * H, 2 * H}, rng))});
    init_b.push_back({nm + ".b", make_param(Tensor::zeros({2 * H}))});
  }
}

EncodedSource CompressionNetwork::encode(const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw std::invalid_argument("encode: empty source");
  EncodedSource src;
  src.tokens = tokens;
  std::vector<Var> emb;
  emb.reserve(tokens.size() + 1);
  for (const auto& t : tokens) emb.push_back(enc_embed(enc_vocab.id(t)));
  emb.push_back(enc_embed(Vocabulary::eos_id));
  src.states = nn::encode_bidirectional(enc_fwd, enc_bwd, emb);
  src.stacked = stack_rows(src.states);
  src.attn_proj = matmul(src.stacked, w2t.var);
  for (int i = 0; i < src.n(); ++i) src.match[tokens[i]].push_back(i);
  return src;
}

nn::StackedRnn::State CompressionNetwork::initial_state(const EncodedSource& src) const {
  int H = cfg.dim;
  const Var& last = src.states.back();  // state at the appended </s>
  nn::StackedRnn::State s;
  for (size_t l = 0; l < init_w.size(); ++l) {
    Var hc = add(matmul(init_w[l].var, last), init_b[l].var);
    s.h.push_back(slice(hc, 0, H));
    s.c.push_back(slice(hc, H, H));
  }
  return s;
}

Var CompressionNetwork::pointer_scores(const EncodedSource& src, const Var& h_c) const {
  Var a = matmul(w1.var, h_c);
  return matmul(ad::tanh(add_rowwise(src.attn_proj, a)), w3.var);
}

Var CompressionNetwork::step_distribution(const EncodedSource& src, const Var& h_c,
                                          int step) const {
  Var u = pointer_scores(src, h_c);
  // Nonempty compressions: the EOS position is not a candidate at step 1.
  if (step <= 1) u = slice(u, 0, src.n());
  return softmax(u);
}

CompressionSample CompressionNetwork::sample(const EncodedSource& src, int max_len,
                                             std::mt19937_64& rng) const {
  if (max_len < 1) throw std::invalid_argument("sample: max_len must be at least 1");
  NoGradScope no_grad;
  CompressionSample out;
  nn::StackedRnn::State state = initial_state(src);
  Var input = cmp_embed(Vocabulary::bos_id);
  std::uniform_real_distribution<real> unit(0, 1);
  for (int step = 1;; ++step) {
    state = compressor.step(state, input);
    Var p = step_distribution(src, compressor.output(state), step);
    const Tensor& probs = p.value();
    real draw = unit(rng);
    int pos = 0;
    real acc = 0;
    for (long i = 0; i < probs.numel(); ++i) {
      acc += probs.v[i];
      pos = static_cast<int>(i);
      if (draw < acc) break;
    }
    if (pos == src.eos_position() && step > 1) {
      out.step_log_q.push_back(std::log(probs.at(pos)));
      out.ended_by_eos = true;
      break;
    }
    const std::string& word = src.tokens[pos];
    real word_mass = 0;
    for (int i : src.match.at(word)) word_mass += probs.at(i);
    out.positions.push_back(pos);
    out.words.push_back(word);
    out.ids.push_back(cmp_vocab.id(word));
    out.step_log_q.push_back(std::log(word_mass));
    if (out.length() >= max_len) break;  // cap reached, no EOS factor
    input = cmp_embed(out.ids.back());
  }
  out.total_log_q = 0;
  for (real lq : out.step_log_q) out.total_log_q += lq;
  return out;
}

Var CompressionNetwork::log_prob(const EncodedSource& src, const std::vector<std::string>& c) const {
  if (c.empty()) throw std::invalid_argument("compression_log_prob: empty compression");
  int max_len = max_compression_length(src.n(), cfg);
  if (static_cast<int>(c.size()) > max_len)
    throw std::invalid_argument("compression_log_prob: length " + std::to_string(c.size()) +
                                " exceeds the cap " + std::to_string(max_len));
  nn::StackedRnn::State state = initial_state(src);
  Var input = cmp_embed(Vocabulary::bos_id);
  Var total = Var::constant(Tensor::scalar(0));
  for (size_t j = 0; j < c.size(); ++j) {
    auto it = src.match.find(c[j]);
    if (it == src.match.end())
      throw std::invalid_argument("compression_log_prob: unsupported sequence, word '" + c[j] +
                                  "' does not occur in the source");
    state = compressor.step(state, input);
    Var p = step_distribution(src, compressor.output(state), static_cast<int>(j) + 1);
    total = add(total, ad::log(pick_sum(p, it->second)));
    input = cmp_embed(cmp_vocab.id(c[j]));
  }
  if (static_cast<int>(c.size()) < max_len) {  // the EOS step carries mass too
    state = compressor.step(state, input);
    Var p = step_distribution(src, compressor.output(state), static_cast<int>(c.size()) + 1);
    total = add(total, ad::log(pick(p, src.eos_position())));
  }
  return total;
}

std::vector<std::vector<std::string>> CompressionNetwork::enumerate_compressions(
    const EncodedSource& src, int max_len) const {
  std::set<std::string> distinct(src.tokens.begin(), src.tokens.end());
  double count = 0, span = 1;
  for (int l = 1; l <= max_len; ++l) {
    span *= static_cast<double>(distinct.size());
    count += span;
    if (count > 2e5)
      throw std::invalid_argument("enumerate_compressions: more than 200000 sequences");
  }
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> prefix;
  auto recurse = [&](auto&& self, int depth) -> void {
    if (depth > 0) out.push_back(prefix);
    if (depth == max_len) return;
    for (const auto& w : distinct) {
      prefix.push_back(w);
      self(self, depth + 1);
      prefix.pop_back();
    }
  };
  recurse(recurse, 0);
  return out;
}

std::vector<Parameter> CompressionNetwork::params() const {
  std::vector<Parameter> out = enc_embed.params();
  if (!cfg.share_embeddings)
    for (const auto& p : cmp_embed.params()) out.push_back(p);
  for (const auto& p : enc_fwd.params()) out.push_back(p);
  for (const auto& p : enc_bwd.params()) out.push_back(p);
  for (const auto& p : compressor.params()) out.push_back(p);
  out.push_back(w1);
  out.push_back(w2t);
  out.push_back(w3);
  for (size_t l = 0; l < init_w.size(); ++l) {
    out.push_back(init_w[l]);
    out.push_back(init_b[l]);
  }
  return out;
}

std::vector<Var> reencode_compression(const CompressionNetwork& net,
                                      const std::vector<std::string>& c) {
  if (c.empty()) throw std::invalid_argument("reencode_compression: empty compression");
  nn::StackedRnn::State state = net.compressor.initial_state();
  std::vector<Var> out;
  out.reserve(c.size());
  for (const auto& w : c) {
    state = net.compressor.step(state, net.cmp_embed(net.cmp_vocab.id(w)));
    out.push_back(stop_gradient(net.compressor.output(state)));
  }
  return out;
}

ReconstructionNetwork::ReconstructionNetwork(const ModelConfig& cfg, Vocabulary dec_vocab_in,
                                             std::mt19937_64& rng)
    : cfg(cfg), dec_vocab(std::move(dec_vocab_in)) {
  int H = cfg.dim;
  dec_embed = nn::Embedding("dec.embed", dec_vocab.size(), H, rng);
  decoder = nn::RnnCell("dec.rnn", H, H, rng);
  w4 = {"dec.attn.w4", make_param(nn::uniform_init({H, H}, rng))};
  w5t = {"dec.attn.w5t", make_param(nn::uniform_init({H, H}, rng))};
  w6 = {"dec.attn.w6", make_param(nn::uniform_init({H}, rng))};
  w7 = {"dec.out.w7", make_param(nn::uniform_init({dec_vocab.size(), H}, rng))};
  init_w = {"dec.init.w", make_param(nn::uniform_init({H, H}, rng))};
  init_b = {"dec.init.b", make_param(Tensor::zeros({H}))};
}

Var ReconstructionNetwork::log_prob(const std::vector<std::string>& source,
                                    const std::vector<Var>& hhat) const {
  if (source.empty()) throw std::invalid_argument("reconstruction_log_prob: empty target");
  if (hhat.empty()) throw std::invalid_argument("reconstruction_log_prob: empty compression");
  Var hc = stack_rows(hhat);                // [m, H]
  Var proj = matmul(hc, w5t.var);           // [m, A], rows are W5 hhat_j
  Var h = add(matmul(init_w.var, hhat.back()), init_b.var);
  std::vector<int> targets = dec_vocab.ids(source);
  targets.push_back(Vocabulary::eos_id);
  int prev = Vocabulary::bos_id;
  Var total = Var::constant(Tensor::scalar(0));
  for (int target : targets) {
    h = decoder.step(h, dec_embed(prev));
    Var v = matmul(ad::tanh(add_rowwise(proj, matmul(w4.var, h))), w6.var);
    Var gamma = softmax(v);          // attention over the compression
    Var d = matmul(gamma, hc);       // [H] expected state
    total = add(total, pick(log_softmax(matmul(w7.var, d)), target));
    prev = target;
  }
  return total;
}

std::vector<Parameter> ReconstructionNetwork::params() const {
  std::vector<Parameter> out = dec_embed.params();
  for (const auto& p : decoder.params()) out.push_back(p);
  out.push_back(w4);
  out.push_back(w5t);
  out.push_back(w6);
  out.push_back(w7);
  out.push_back(init_w);
  out.push_back(init_b);
  return out;
}

LanguageModelPrior::LanguageModelPrior(const ModelConfig& cfg, Vocabulary vocab_in,
                                       std::mt19937_64& rng)
    : cfg(cfg), vocab(std::move(vocab_in)) {
  int H = cfg.dim;
  embed = nn::Embedding("lm.embed", vocab.size(), H, rng);
  rnn = nn::StackedRnn("lm.rnn", nn::CellKind::vanilla, cfg.lm_layers, H, H, false,
                       cfg.lm_dropout, rng);
  w_out = {"lm.out.w", make_param(nn::uniform_init({vocab.size(), H}, rng))};
  b_out = {"lm.out.b", make_param(Tensor::zeros({vocab.size()}))};
}

namespace {

Var lm_nll(const LanguageModelPrior& lm, const std::vector<std::string>& tokens,
           std::mt19937_64* dropout_rng) {
  std::vector<int> targets = lm.vocab.ids(tokens);
  targets.push_back(Vocabulary::eos_id);
  nn::StackedRnn::State state = lm.rnn.initial_state();
  int prev = Vocabulary::bos_id;
  Var total = Var::constant(Tensor::scalar(0));
  for (int target : targets) {
    state = lm.rnn.step(state, lm.embed(prev), dropout_rng);
    Var logits = add(matmul(lm.w_out.var, lm.rnn.output(state)), lm.b_out.var);
    total = add(total, pick(log_softmax(logits), target));
    prev = target;
  }
  return total;
}

}  // namespace

real LanguageModelPrior::log_prob(const std::vector<std::string>& c) const {
  NoGradScope no_grad;
  return lm_nll(*this, c, nullptr).item();
}

Var LanguageModelPrior::train_loss(const std::vector<std::string>& sentence,
                                   std::mt19937_64& dropout_rng) const {
  return scale(lm_nll(*this, sentence, &dropout_rng), -1);
}

std::vector<Parameter> LanguageModelPrior::params() const {
  std::vector<Parameter> out = embed.params();
  for (const auto& p : rnn.params()) out.push_back(p);
  out.push_back(w_out);
  out.push_back(b_out);
  return out;
}

LowerBoundTerms lower_bound(const CompressionNetwork& q, const ReconstructionNetwork& p,
                            const LanguageModelPrior& prior, const std::vector<std::string>& s,
                            const std::vector<std::string>& c, real lambda) {
  if (lambda < 0) throw std::invalid_argument("lower_bound: lambda must be non-negative");
  NoGradScope no_grad;
  EncodedSource src = q.encode(s);
  real log_q = q.log_prob(src, c).item();
  real log_p_c = prior.log_prob(c);
  real log_p_s = p.log_prob(s, reencode_compression(q, c)).item();
  LowerBoundTerms out;
  out.reconstruction = log_p_s;
  out.kl_sampled = log_q - log_p_c;
  out.estimate = log_p_s - lambda * out.kl_sampled;
  return out;
}

}  // namespace sentcomp::model
