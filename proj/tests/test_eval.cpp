#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "sentcomp/eval.hpp"
#include "sentcomp/training.hpp"

using namespace sentcomp;
using namespace sentcomp::ad;
using namespace sentcomp::data;
using namespace sentcomp::model;
using namespace sentcomp::eval;

namespace {

using Tokens = std::vector<std::string>;

std::string lower(std::string s) {
  for (auto& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Independent overlap count: every distinct n-gram contributes the smaller of
// its two occurrence counts.
RougeScore oracle_rouge_n(const Tokens& cand, const Tokens& ref, int n) {
  auto grams = [n](const Tokens& t) {
    std::map<Tokens, int> counts;
    for (int i = 0; i + n <= static_cast<int>(t.size()); ++i) {
      Tokens g;
      for (int j = 0; j < n; ++j) g.push_back(lower(t[i + j]));
      ++counts[g];
    }
    return counts;
  };
  auto c = grams(cand), r = grams(ref);
  real overlap = 0, total_c = 0, total_r = 0;
  for (const auto& [g, cnt] : c) {
    total_c += cnt;
    auto it = r.find(g);
    if (it != r.end()) overlap += std::min(cnt, it->second);
  }
  for (const auto& [g, cnt] : r) total_r += cnt;
  RougeScore out;
  out.recall = total_r > 0 ? overlap / total_r : 0;
  out.precision = total_c > 0 ? overlap / total_c : 0;
  out.f1 = out.recall + out.precision > 0
               ? 2 * out.recall * out.precision / (out.recall + out.precision)
               : 0;
  return out;
}

bool is_subsequence(const Tokens& sub, const Tokens& seq) {
  size_t i = 0;
  for (const auto& w : seq)
    if (i < sub.size() && sub[i] == w) ++i;
  return i == sub.size();
}

// Longest common subsequence by trying every candidate subsequence.
int oracle_lcs(const Tokens& cand, const Tokens& ref) {
  Tokens c, r;
  for (const auto& w : cand) c.push_back(lower(w));
  for (const auto& w : ref) r.push_back(lower(w));
  REQUIRE(c.size() <= 12);
  int best = 0;
  for (unsigned mask = 0; mask < (1u << c.size()); ++mask) {
    Tokens sub;
    for (size_t i = 0; i < c.size(); ++i)
      if (mask & (1u << i)) sub.push_back(c[i]);
    if (is_subsequence(sub, r)) best = std::max(best, static_cast<int>(sub.size()));
  }
  return best;
}

Tokens random_tokens(std::mt19937_64& rng, int max_len, int alphabet = 3) {
  std::uniform_int_distribution<int> len(0, max_len);
  std::uniform_int_distribution<int> pick(0, alphabet - 1);
  Tokens out;
  int n = len(rng);
  for (int i = 0; i < n; ++i) out.push_back(std::string(1, char('a' + pick(rng))));
  return out;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.dim = 5;
  cfg.encoder_layers = 1;
  cfg.compressor_layers = 1;
  return cfg;
}

}  // namespace

TEST_CASE("hand-checked overlap scores") {
  Tokens cand{"a", "b", "c"}, ref{"a", "b", "d"};
  RougeScore r1 = rouge_n(cand, ref, 1);
  CHECK(r1.recall == doctest::Approx(2.0 / 3));
  CHECK(r1.precision == doctest::Approx(2.0 / 3));
  CHECK(r1.f1 == doctest::Approx(2.0 / 3));
  RougeScore r2 = rouge_n(cand, ref, 2);
  CHECK(r2.recall == doctest::Approx(0.5));
  CHECK(r2.precision == doctest::Approx(0.5));
  CHECK(r2.f1 == doctest::Approx(0.5));
  RougeScore rl = rouge_l(cand, ref);  // common subsequence "a b"
  CHECK(rl.recall == doctest::Approx(2.0 / 3));
  CHECK(rl.precision == doctest::Approx(2.0 / 3));
  CHECK(rl.f1 == doctest::Approx(2.0 / 3));
}

TEST_CASE("identical sequences score one and disjoint sequences score zero") {
  Tokens a{"the", "cat", "sat"}, b{"dog", "ran", "far"};
  for (int n : {1, 2}) {
    RougeScore same = rouge_n(a, a, n);
    CHECK(same.recall == 1.0);
    CHECK(same.precision == 1.0);
    CHECK(same.f1 == 1.0);
    RougeScore none = rouge_n(a, b, n);
    CHECK(none.recall == 0.0);
    CHECK(none.precision == 0.0);
    CHECK(none.f1 == 0.0);
  }
  CHECK(rouge_l(a, a).f1 == 1.0);
  CHECK(rouge_l(a, b).f1 == 0.0);
}

TEST_CASE("repeated candidate tokens are clipped to the reference count") {
  RougeScore r = rouge_n({"a", "a", "a"}, {"a"}, 1);
  CHECK(r.recall == 1.0);
  CHECK(r.precision == doctest::Approx(1.0 / 3));
}

TEST_CASE("matching folds case") {
  RougeScore r = rouge_n({"The", "CAT"}, {"the", "cat"}, 1);
  CHECK(r.f1 == 1.0);
  CHECK(rouge_l({"A", "b"}, {"a", "B"}).f1 == 1.0);
}

TEST_CASE("empty inputs score zero without dividing by zero") {
  Tokens empty, some{"a"};
  for (int n : {1, 2}) {
    CHECK(rouge_n(empty, some, n).f1 == 0.0);
    CHECK(rouge_n(some, empty, n).precision == 0.0);
    CHECK(rouge_n(empty, empty, n).f1 == 0.0);
  }
  CHECK(rouge_l(empty, some).f1 == 0.0);
  CHECK(rouge_l(empty, empty).f1 == 0.0);
}

TEST_CASE("the n-gram order must be positive") {
  CHECK_THROWS_AS(rouge_n({"a"}, {"a"}, 0), std::invalid_argument);
}

TEST_CASE("n-gram scores match an independent counting oracle") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    Tokens cand = random_tokens(rng, 8), ref = random_tokens(rng, 8);
    for (int n : {1, 2, 3}) {
      RougeScore got = rouge_n(cand, ref, n);
      RougeScore want = oracle_rouge_n(cand, ref, n);
      CHECK(got.recall == doctest::Approx(want.recall).epsilon(1e-12));
      CHECK(got.precision == doctest::Approx(want.precision).epsilon(1e-12));
      CHECK(got.f1 == doctest::Approx(want.f1).epsilon(1e-12));
    }
  }
}

TEST_CASE("subsequence scores match exhaustive subsequence search") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 40; ++trial) {
    Tokens cand = random_tokens(rng, 8), ref = random_tokens(rng, 8);
    int lcs = oracle_lcs(cand, ref);
    RougeScore got = rouge_l(cand, ref);
    real want_r = ref.empty() ? 0 : real(lcs) / ref.size();
    real want_p = cand.empty() ? 0 : real(lcs) / cand.size();
    CHECK(got.recall == doctest::Approx(want_r).epsilon(1e-12));
    CHECK(got.precision == doctest::Approx(want_p).epsilon(1e-12));
  }
}

TEST_CASE("swapping candidate and reference swaps recall with precision") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    Tokens a = random_tokens(rng, 7), b = random_tokens(rng, 7);
    for (int n : {1, 2}) {
      RougeScore ab = rouge_n(a, b, n), ba = rouge_n(b, a, n);
      CHECK(ab.recall == ba.precision);
      CHECK(ab.precision == ba.recall);
      CHECK(ab.f1 == doctest::Approx(ba.f1).epsilon(1e-12));
    }
    RougeScore ab = rouge_l(a, b), ba = rouge_l(b, a);
    CHECK(ab.recall == ba.precision);
    CHECK(ab.precision == ba.recall);
  }
}

TEST_CASE("scores stay in the unit interval and bigram recall never beats unigram") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 50; ++trial) {
    Tokens cand = random_tokens(rng, 9), ref = random_tokens(rng, 9);
    for (int n : {1, 2, 3}) {
      RougeScore s = rouge_n(cand, ref, n);
      for (real v : {s.recall, s.precision, s.f1}) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
    RougeScore l = rouge_l(cand, ref);
    CHECK(l.f1 >= 0.0);
    CHECK(l.f1 <= 1.0);
    if (ref.size() >= 2)
      CHECK(rouge_n(cand, ref, 1).recall >= rouge_n(cand, ref, 2).recall);
  }
}

TEST_CASE("a candidate that is a subsequence of the reference has full recall under LCS") {
  RougeScore r = rouge_l({"b", "d"}, {"a", "b", "c", "d", "e"});
  CHECK(r.recall == doctest::Approx(2.0 / 5));
  CHECK(r.precision == 1.0);
}

TEST_CASE("corpus scores are the mean of the per-pair scores") {
  std::vector<Tokens> cands = {{"a", "b", "c"}, {"x"}};
  std::vector<Tokens> refs = {{"a", "b", "d"}, {"x"}};
  RougeSummary s = rouge_corpus(cands, refs);
  CHECK(s.r1.f1 == doctest::Approx((2.0 / 3 + 1.0) / 2));
  CHECK(s.r2.f1 == doctest::Approx((0.5 + 0.0) / 2));  // "x" alone has no bigram
  CHECK(s.rl.recall == doctest::Approx((2.0 / 3 + 1.0) / 2));
  CHECK_THROWS_AS(rouge_corpus(cands, {{"a"}}), std::invalid_argument);
  CHECK_THROWS_AS(rouge_corpus({}, {}), std::invalid_argument);
}

TEST_CASE("a flat language model scores perplexity equal to its vocabulary size") {
  std::mt19937_64 rng(31);
  ModelConfig cfg = tiny_config();
  cfg.lm_dropout = 0;
  Vocabulary vocab = build_vocab({"a", "b", "c", "d", "e"}, 1000, 1, VocabRole::lm);
  LanguageModelPrior lm(cfg, vocab, rng);
  for (const auto& p : lm.params()) std::fill(p.value().v.begin(), p.value().v.end(), real(0));
  real ppl = perplexity_lm(lm, {{"a", "b"}, {"c"}});
  CHECK(ppl == doctest::Approx(real(vocab.size())).epsilon(1e-6));
}

TEST_CASE("perplexity is at least one for any model") {
  for (unsigned seed : {1u, 2u, 3u}) {
    std::mt19937_64 rng(seed);
    ModelConfig cfg = tiny_config();
    cfg.lm_dropout = 0;
    Vocabulary vocab = build_vocab({"a", "b", "c"}, 1000, 1, VocabRole::lm);
    LanguageModelPrior lm(cfg, vocab, rng);
    CHECK(perplexity_lm(lm, {{"a", "c", "b"}, {"b"}}) >= 1.0);

    Vocabulary enc = build_vocab({"a", "b", "c"}, 1000, 1, VocabRole::encoder);
    CompressionNetwork q(cfg, enc, enc, rng);
    FscModel fsc(q, rng);
    std::vector<data::SentencePair> pairs = {{{"a", "b", "c"}, {"a", "c"}},
                                             {{"c", "b"}, {"b"}}};
    CHECK(perplexity_fsc(fsc, pairs) >= 1.0);
  }
}

TEST_CASE("perplexity rejects empty datasets") {
  std::mt19937_64 rng(37);
  ModelConfig cfg = tiny_config();
  Vocabulary vocab = build_vocab({"a"}, 1000, 1, VocabRole::lm);
  LanguageModelPrior lm(cfg, vocab, rng);
  CHECK_THROWS_AS(perplexity_lm(lm, {}), std::invalid_argument);
  Vocabulary enc = build_vocab({"a"}, 1000, 1, VocabRole::encoder);
  CompressionNetwork q(cfg, enc, enc, rng);
  FscModel fsc(q, rng);
  CHECK_THROWS_AS(perplexity_fsc(fsc, {}), std::invalid_argument);
}

TEST_CASE("supervised training drives held-out perplexity down") {
  std::mt19937_64 rng(41);
  ModelConfig cfg = tiny_config();
  cfg.lr = 0.01;
  Vocabulary vocab = build_vocab({"north", "south", "east", "west"}, 1000, 1, VocabRole::encoder);
  CompressionNetwork q(cfg, vocab, vocab, rng);
  FscModel fsc(q, rng);
  // every source keeps only its direction words, a rule the model can learn
  std::vector<data::SentencePair> pairs = {
      {{"north", "east", "west"}, {"north", "west"}},
      {{"south", "east"}, {"south"}},
      {{"west", "north"}, {"west"}},
      {{"east", "south", "north"}, {"east", "north"}},
  };
  real before = perplexity_fsc(fsc, pairs);
  train::Adam opt(fsc.params(), cfg.lr);
  for (int step = 0; step < 80; ++step) {
    Tape tape;
    Var loss = scale(fsc.loss(pairs), real(1) / pairs.size());
    tape.backward(loss);
    opt.step();
    ad::zero_grad(fsc.params());
  }
  real after = perplexity_fsc(fsc, pairs);
  CHECK(after < before);
  CHECK(after >= 1.0);
}
