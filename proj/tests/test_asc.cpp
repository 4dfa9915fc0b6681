#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "sentcomp/asc.hpp"

using namespace sentcomp;
using namespace sentcomp::ad;
using namespace sentcomp::data;
using namespace sentcomp::model;

namespace {

ModelConfig tiny_config(int dim = 6, int layers = 2) {
  ModelConfig cfg;
  cfg.dim = dim;
  cfg.encoder_layers = layers;
  cfg.compressor_layers = layers;
  cfg.lm_layers = layers;
  return cfg;
}

Vocabulary vocab_of(const std::vector<std::string>& tokens, VocabRole role) {
  return build_vocab(tokens, 1000, 1, role);
}

// The default +-0.08 init leaves some gradient coordinates at the 1e-8 scale
// where central differences in double hit their round-off floor; gradient
// checks re-draw at a healthier scale.
void redraw(const std::vector<Parameter>& params, std::mt19937_64& rng, real scale = 0.5) {
  std::uniform_real_distribution<real> dist(-scale, scale);
  for (const auto& p : params)
    for (auto& e : p.value().v) e = dist(rng);
}

struct TinyAsc {
  ModelConfig cfg;
  CompressionNetwork q;
  ReconstructionNetwork p;
  LanguageModelPrior prior;

  TinyAsc(const std::vector<std::string>& lexicon, unsigned seed, int dim = 6, int layers = 2)
      : cfg(tiny_config(dim, layers)) {
    std::mt19937_64 rng(seed);
    Vocabulary v = vocab_of(lexicon, VocabRole::encoder);
    q = CompressionNetwork(cfg, v, vocab_of(lexicon, VocabRole::compressor), rng);
    p = ReconstructionNetwork(cfg, v.prefix(v.size(), VocabRole::decoder), rng);
    prior = LanguageModelPrior(cfg, vocab_of(lexicon, VocabRole::lm), rng);
  }
};

}  // namespace

TEST_CASE("compression length cap") {
  ModelConfig cfg;
  CHECK(max_compression_length(1, cfg) == 2);   // floor kicks in
  CHECK(max_compression_length(2, cfg) == 2);
  CHECK(max_compression_length(5, cfg) == 3);   // ceil(3.0)
  CHECK(max_compression_length(10, cfg) == 6);
}

TEST_CASE("zeroed attention weights give a uniform pointer distribution") {
  TinyAsc m({"a", "b", "c"}, 1);
  m.q.w1.value().fill(0);
  m.q.w2t.value().fill(0);
  EncodedSource src = m.q.encode({"a", "b", "c"});
  auto state = m.q.initial_state(src);
  state = m.q.compressor.step(state, m.q.cmp_embed(Vocabulary::bos_id));
  Var p2 = m.q.step_distribution(src, m.q.compressor.output(state), 2);
  REQUIRE(p2.shape() == std::vector<int>{4});  // 3 words + EOS
  for (int i = 0; i < 4; ++i) CHECK(p2.value().at(i) == doctest::Approx(0.25).epsilon(1e-12));
  Var p1 = m.q.step_distribution(src, m.q.compressor.output(state), 1);
  REQUIRE(p1.shape() == std::vector<int>{3});  // EOS masked at the first step
  for (int i = 0; i < 3; ++i) CHECK(p1.value().at(i) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("pointer distribution normalizes over the augmented support") {
  TinyAsc m({"a", "b", "c", "d"}, 2);
  EncodedSource src = m.q.encode({"d", "b", "a"});
  auto state = m.q.initial_state(src);
  state = m.q.compressor.step(state, m.q.cmp_embed(Vocabulary::bos_id));
  Var p = m.q.step_distribution(src, m.q.compressor.output(state), 2);
  real s = 0;
  for (int i = 0; i < 4; ++i) s += p.value().at(i);
  CHECK(std::fabs(s - 1.0) < 1e-12);
}

TEST_CASE("samples stay inside the source and respect the seed") {
  TinyAsc m({"a", "b", "c", "d", "e"}, 3);
  std::vector<std::string> s{"c", "a", "e", "a"};
  EncodedSource src = m.q.encode(s);
  int max_len = max_compression_length(src.n(), m.cfg);
  std::mt19937_64 rng1(7), rng2(7);
  for (int i = 0; i < 200; ++i) {
    CompressionSample a = m.q.sample(src, max_len, rng1);
    CompressionSample b = m.q.sample(src, max_len, rng2);
    CHECK(a.positions == b.positions);
    CHECK(a.total_log_q == b.total_log_q);
    REQUIRE(a.length() >= 1);
    CHECK(a.length() <= max_len);
    for (const auto& w : a.words)
      CHECK(std::find(s.begin(), s.end(), w) != s.end());
    if (!a.ended_by_eos) CHECK(a.length() == max_len);
  }
}

TEST_CASE("sample rejects a non-positive length cap") {
  TinyAsc m({"a"}, 4);
  EncodedSource src = m.q.encode({"a"});
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(m.q.sample(src, 0, rng), std::invalid_argument);
}

TEST_CASE("sampled log q agrees with compression_log_prob") {
  TinyAsc m({"a", "b", "c"}, 5);
  std::vector<std::string> s{"b", "a", "b"};
  EncodedSource src = m.q.encode(s);
  int max_len = max_compression_length(src.n(), m.cfg);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; ++i) {
    CompressionSample c = m.q.sample(src, max_len, rng);
    real lp = m.q.log_prob(src, c.words).item();
    CHECK(std::fabs(lp - c.total_log_q) < 1e-10);
  }
}

TEST_CASE("masked uniform pointer gives hand-computable log q") {
  TinyAsc m({"a", "b"}, 6);
  m.q.w1.value().fill(0);
  m.q.w2t.value().fill(0);
  EncodedSource src = m.q.encode({"a", "b"});
  // step 1 is uniform over the 2 words, step 2 uniform over 2 words + EOS.
  real lp = m.q.log_prob(src, {"a"}).item();
  CHECK(lp == doctest::Approx(std::log(0.5) + std::log(1.0 / 3)).epsilon(1e-12));
  // at the cap (max_len = 2) there is no EOS factor
  real lp2 = m.q.log_prob(src, {"a", "b"}).item();
  CHECK(lp2 == doctest::Approx(std::log(0.5) + std::log(1.0 / 3)).epsilon(1e-12));
  // repeated word: the event sums both matching positions
  EncodedSource rep = m.q.encode({"a", "a"});
  real lp3 = m.q.log_prob(rep, {"a"}).item();
  CHECK(lp3 == doctest::Approx(std::log(1.0) + std::log(1.0 / 3)).epsilon(1e-12));
}

TEST_CASE("compression probabilities sum to one by enumeration") {
  for (unsigned seed : {1u, 2u, 3u}) {
    TinyAsc m({"a", "b", "c", "d"}, seed);
    for (const auto& s : std::vector<std::vector<std::string>>{
             {"a", "b", "a"}, {"c", "d", "b", "a"}, {"a"}}) {
      EncodedSource src = m.q.encode(s);
      int max_len = max_compression_length(src.n(), m.cfg);
      real total = 0;
      for (const auto& c : m.q.enumerate_compressions(src, max_len))
        total += std::exp(m.q.log_prob(src, c).item());
      CHECK(std::fabs(total - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("unsupported compression words are rejected") {
  TinyAsc m({"a", "b", "z"}, 8);
  EncodedSource src = m.q.encode({"a", "b"});
  try {
    m.q.log_prob(src, {"z"});
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("'z'") != std::string::npos);
  }
}

TEST_CASE("reconstruction loss moves no compressor parameter") {
  TinyAsc m({"a", "b", "c"}, 9);
  std::vector<std::string> s{"a", "c", "b"};
  std::vector<Parameter> phi = m.q.params();
  std::vector<Parameter> theta = m.p.params();
  zero_grad(phi);
  zero_grad(theta);
  {
    Tape tape;
    Var loss = scale(m.p.log_prob(s, reencode_compression(m.q, {"a", "b"})), -1);
    tape.backward(loss);
  }
  for (const auto& p : phi)
    for (long i = 0; i < p.grad().numel(); ++i) CHECK(p.grad().v[i] == 0.0);
  real theta_mass = 0;
  for (const auto& p : theta)
    for (long i = 0; i < p.grad().numel(); ++i) theta_mass += std::fabs(p.grad().v[i]);
  CHECK(theta_mass > 0);
}

TEST_CASE("re-encoded states differ from source-conditioned compressor states") {
  TinyAsc m({"a", "b"}, 10);
  std::vector<std::string> c{"a", "b"};
  EncodedSource src = m.q.encode({"a", "b"});
  auto hhat = reencode_compression(m.q, c);
  auto state = m.q.initial_state(src);
  bool any_diff = false;
  for (size_t j = 0; j < c.size(); ++j) {
    state = m.q.compressor.step(state, m.q.cmp_embed(m.q.cmp_vocab.id(c[j])));
    const Tensor& a = hhat[j].value();
    const Tensor& b = m.q.compressor.output(state).value();
    for (long i = 0; i < a.numel(); ++i)
      if (a.v[i] != b.v[i]) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("finite diff of the reconstruction loss over decoder parameters") {
  TinyAsc m({"a", "b", "c"}, 11, 4, 1);
  std::mt19937_64 rng(31);
  redraw(m.q.params(), rng);
  redraw(m.p.params(), rng);
  std::vector<std::string> s{"b", "a"};
  std::vector<std::string> c{"b"};
  auto f = [&]() { return scale(m.p.log_prob(s, reencode_compression(m.q, c)), -1); };
  auto report = finite_diff_check(f, m.p.params(), 1e-5, 1e-4);
  INFO("max rel err ", report.max_rel_err);
  CHECK(report.passed);
}

TEST_CASE("finite diff of log q over the full pointer network") {
  TinyAsc m({"a", "b", "c"}, 12, 4, 1);
  std::mt19937_64 rng(33);
  redraw(m.q.params(), rng);
  std::vector<std::string> s{"c", "a", "c"};
  std::vector<std::string> c{"c", "a"};
  auto f = [&]() { return m.q.log_prob(m.q.encode(s), c); };
  // wider step: the distant encoder coordinates carry gradients near 1e-7
  // where the 1e-5 step's round-off noise would dominate
  auto report = finite_diff_check(f, m.q.params(), 2e-4, 1e-4);
  INFO("max rel err ", report.max_rel_err);
  CHECK(report.passed);
}

TEST_CASE("singleton compression forces the attention onto one state") {
  TinyAsc m({"a", "b"}, 13, 4, 1);
  // With |c| = 1 the context d_k is the single re-encoded state, so the
  // output distribution is constant across steps and computable by hand.
  std::vector<std::string> s{"a"};
  Tensor h1 = Tensor::vec({0.3, -0.2, 0.1, 0.4});
  Var lp = m.p.log_prob(s, {Var::constant(h1)});
  const Tensor& w7 = m.p.w7.value();
  const Tensor& iw = m.p.init_w.value();
  (void)iw;  // h^d never reaches the output in this degenerate case
  std::vector<real> logits(w7.rows(), 0);
  real mx = -1e30;
  for (int r = 0; r < w7.rows(); ++r) {
    for (int k = 0; k < 4; ++k) logits[r] += w7.at(r, k) * h1.at(k);
    mx = std::max(mx, logits[r]);
  }
  real lse = 0;
  for (real l : logits) lse += std::exp(l - mx);
  lse = mx + std::log(lse);
  int a_id = m.p.dec_vocab.id("a");
  real expect = (logits[a_id] - lse) + (logits[Vocabulary::eos_id] - lse);
  CHECK(lp.item() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("reconstruction log probability is never positive") {
  TinyAsc m({"a", "b", "c", "d"}, 14);
  for (const auto& s : std::vector<std::vector<std::string>>{{"a"}, {"d", "c", "b", "a"}}) {
    Var lp = m.p.log_prob(s, reencode_compression(m.q, {"a", "b"}));
    CHECK(lp.item() <= 0.0);
  }
}

TEST_CASE("uniform untrained language model scores L log(1/V)") {
  TinyAsc m({"a", "b"}, 15);
  for (auto& p : m.prior.params()) p.value().fill(0);
  int V = m.prior.vocab.size();
  real lp = m.prior.log_prob({"a", "b"});
  CHECK(lp == doctest::Approx(3 * std::log(1.0 / V)).epsilon(1e-12));
}

TEST_CASE("language model log probability is monotone in length") {
  TinyAsc m({"a", "b", "c"}, 16);
  std::vector<std::string> c{"a"};
  real prev = m.prior.log_prob(c);
  for (int i = 0; i < 3; ++i) {
    c.push_back("b");
    real cur = m.prior.log_prob(c);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("frozen prior is deterministic across calls") {
  TinyAsc m({"a", "b"}, 17);
  CHECK(m.prior.log_prob({"b", "a"}) == m.prior.log_prob({"b", "a"}));
}

TEST_CASE("lm training loss differentiates through dropout-free eval path") {
  TinyAsc m({"a", "b"}, 18, 4, 1);
  ModelConfig cfg = m.cfg;
  cfg.lm_dropout = 0;  // deterministic f for the finite-difference harness
  std::mt19937_64 rng(3);
  LanguageModelPrior lm(cfg, m.prior.vocab, rng);
  std::mt19937_64 drop(1);
  auto f = [&]() { return lm.train_loss({"a", "b", "a"}, drop); };
  auto report = finite_diff_check(f, lm.params(), 1e-5, 1e-4);
  CHECK(report.passed);
}

TEST_CASE("lambda zero reduces the bound to the reconstruction term") {
  TinyAsc m({"a", "b", "c"}, 19);
  auto terms = lower_bound(m.q, m.p, m.prior, {"a", "b", "c"}, {"a", "b"}, 0);
  CHECK(terms.estimate == terms.reconstruction);
  CHECK_THROWS_AS(lower_bound(m.q, m.p, m.prior, {"a"}, {"a"}, -0.5), std::invalid_argument);
}

TEST_CASE("monte carlo bound estimate matches exhaustive enumeration") {
  TinyAsc m({"a", "b", "c"}, 20, 5, 1);
  std::vector<std::string> s{"a", "c", "b"};
  real lambda = 0.1;
  NoGradScope no_grad;
  EncodedSource src = m.q.encode(s);
  int max_len = max_compression_length(src.n(), m.cfg);
  real exact = 0;
  for (const auto& c : m.q.enumerate_compressions(src, max_len)) {
    real lq = m.q.log_prob(src, c).item();
    real lrec = m.p.log_prob(s, reencode_compression(m.q, c)).item();
    real lpc = m.prior.log_prob(c);
    exact += std::exp(lq) * (lrec - lambda * (lq - lpc));
  }
  std::mt19937_64 rng(77);
  int n = 4000;
  real mean = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    CompressionSample c = m.q.sample(src, max_len, rng);
    real lrec = m.p.log_prob(s, reencode_compression(m.q, c.words)).item();
    real lpc = m.prior.log_prob(c.words);
    real est = lrec - lambda * (c.total_log_q - lpc);
    mean += est;
    sq += est * est;
  }
  mean /= n;
  real se = std::sqrt((sq / n - mean * mean) / n);
  INFO("exact ", exact, " mc ", mean, " se ", se);
  CHECK(std::fabs(mean - exact) <= 3 * se);
}

TEST_CASE("enumerated bound sits below the enumerated evidence at lambda one") {
  for (unsigned seed : {21u, 22u}) {
    TinyAsc m({"a", "b", "c"}, seed, 5, 1);
    std::vector<std::string> s{"b", "a", "b"};
    NoGradScope no_grad;
    EncodedSource src = m.q.encode(s);
    int max_len = max_compression_length(src.n(), m.cfg);
    real bound = 0, evidence = 0;
    for (const auto& c : m.q.enumerate_compressions(src, max_len)) {
      real lq = m.q.log_prob(src, c).item();
      real lrec = m.p.log_prob(s, reencode_compression(m.q, c)).item();
      real lpc = m.prior.log_prob(c);
      bound += std::exp(lq) * (lrec - (lq - lpc));
      evidence += std::exp(lpc + lrec);
    }
    CHECK(bound <= std::log(evidence) + 1e-9);
  }
}

TEST_CASE("shared embeddings reuse the encoder table") {
  ModelConfig cfg = tiny_config(4, 1);
  cfg.share_embeddings = true;
  std::mt19937_64 rng(23);
  Vocabulary v = vocab_of({"a", "b"}, VocabRole::encoder);
  CompressionNetwork q(cfg, v, v, rng);
  CHECK(q.cmp_embed.table.var.node() == q.enc_embed.table.var.node());
  Vocabulary other = vocab_of({"a", "b", "c"}, VocabRole::compressor);
  CHECK_THROWS_AS(CompressionNetwork(cfg, v, other, rng), std::invalid_argument);
}
