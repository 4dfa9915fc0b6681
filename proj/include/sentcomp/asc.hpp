#pragma once

#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "sentcomp/data.hpp"
#include "sentcomp/layers.hpp"

namespace sentcomp::model {

using ad::Parameter;
using ad::Var;
using data::Vocabulary;

struct ModelConfig {
  int dim = 256;  // hidden units and lookup tables share one size
  int encoder_layers = 3;
  int compressor_layers = 3;
  int lm_layers = 3;
  real lambda = 0.1;
  real lm_dropout = 0.5;
  real compression_ratio = 0.6;  // cap = max(min_compression_len, ceil(ratio*|s|))
  int min_compression_len = 2;
  int samples = 1;  // M, samples per step for the gradient estimator
  int beam = 5;
  int batch_size = 64;
  real lr = 0.0002;
  bool share_embeddings = false;  // compressor reuses the encoder table
  int decoder_vocab_cap = 10004;  // 10k most frequent + 4 reserved
};

// Upper bound on emitted content words for a source of length n.
int max_compression_length(int source_len, const ModelConfig& cfg);

// Source encoded once, reused by every pointer query against it. The source
// is augmented with </s> before encoding, so there are n+1 states and the
// pointer's candidate set is n words plus the EOS position at index n.
struct EncodedSource {
  std::vector<std::string> tokens;  // surface words, without the appended </s>
  std::vector<Var> states;          // n+1 bidirectional states, each [2H]
  Var stacked;                      // [n+1, 2H]
  Var attn_proj;                    // [n+1, A], rows are W2 h^e_i
  std::unordered_map<std::string, std::vector<int>> match;  // word -> positions

  int n() const { return static_cast<int>(tokens.size()); }
  int eos_position() const { return n(); }
};

struct CompressionSample {
  std::vector<int> positions;      // sampled source positions, EOS excluded
  std::vector<std::string> words;  // surface form of each position
  std::vector<int> ids;            // compressor-vocabulary ids of the words
  std::vector<real> step_log_q;    // per step, EOS step included when taken
  real total_log_q = 0;
  bool ended_by_eos = false;

  int length() const { return static_cast<int>(words.size()); }
};

// Pointer-network compression distribution q(c|s): bidirectional encoder,
// LSTM compressor whose initial state is an affine image of the final
// encoder state, and attention scores u_j(i) = w3^T tanh(W1 h^c_j + W2 h^e_i)
// over the augmented source positions. A word that occurs at several source
// positions is one event whose probability sums the matching positions. EOS
// is masked at the first step so compressions are nonempty; a sequence that
// reaches the length cap carries no EOS factor, which keeps the total mass
// over admissible compressions at exactly one.
struct CompressionNetwork {
  ModelConfig cfg;
  Vocabulary enc_vocab, cmp_vocab;
  nn::Embedding enc_embed, cmp_embed;
  nn::StackedRnn enc_fwd, enc_bwd, compressor;
  Parameter w1;   // [A, H]
  Parameter w2t;  // [2H, A], stored transposed so rows project in one matmul
  Parameter w3;   // [A]
  std::vector<Parameter> init_w;  // per compressor layer, [2H, 2H] -> (h0, c0)
  std::vector<Parameter> init_b;  // per compressor layer, [2H]

  CompressionNetwork() = default;
  CompressionNetwork(const ModelConfig& cfg, Vocabulary enc_vocab, Vocabulary cmp_vocab,
                     std::mt19937_64& rng);

  EncodedSource encode(const std::vector<std::string>& tokens) const;
  nn::StackedRnn::State initial_state(const EncodedSource& src) const;
  // Attention scores over the n+1 candidate positions for one compressor state.
  Var pointer_scores(const EncodedSource& src, const Var& h_c) const;
  // Word-event log-probability of the distribution at one step. step is
  // 1-based; the EOS entry is masked out at step 1.
  Var step_distribution(const EncodedSource& src, const Var& h_c, int step) const;

  CompressionSample sample(const EncodedSource& src, int max_len, std::mt19937_64& rng) const;
  // Differentiable log q(c|s) of a word sequence; rejects words outside s.
  Var log_prob(const EncodedSource& src, const std::vector<std::string>& c) const;
  // Every admissible compression of s (distinct word sequences), for oracles.
  std::vector<std::vector<std::string>> enumerate_compressions(const EncodedSource& src,
                                                               int max_len) const;

  std::vector<Parameter> params() const;
};

// Re-runs the compressor over c's embeddings from a zero initial state (the
// source is deliberately blocked) and cuts the gradient on every returned
// state, so a reconstruction loss cannot move the compressor or its table.
std::vector<Var> reencode_compression(const CompressionNetwork& net,
                                      const std::vector<std::string>& c);

// Soft-attention reconstruction p(s|c): 1-layer vanilla RNN decoder over the
// re-encoded compression, output distribution softmax(W7 d_k) over the
// decoder vocabulary.
struct ReconstructionNetwork {
  ModelConfig cfg;
  Vocabulary dec_vocab;
  nn::Embedding dec_embed;
  nn::RnnCell decoder;
  Parameter w4;   // [A, H]
  Parameter w5t;  // [H, A]
  Parameter w6;   // [A]
  Parameter w7;   // [V_dec, H]
  Parameter init_w;  // [H, H], h^d_0 from the last re-encoded state
  Parameter init_b;  // [H]

  ReconstructionNetwork() = default;
  ReconstructionNetwork(const ModelConfig& cfg, Vocabulary dec_vocab, std::mt19937_64& rng);

  // Teacher-forced log p(s|c) including the closing </s> target.
  Var log_prob(const std::vector<std::string>& source, const std::vector<Var>& hhat) const;

  std::vector<Parameter> params() const;
};

// Frozen regulariser p(c): 3-layer vanilla RNN language model. Scoring is
// evaluation-mode (no dropout, no graph); training the prior happens once,
// up front, with dropout on the non-recurrent connections.
struct LanguageModelPrior {
  ModelConfig cfg;
  Vocabulary vocab;
  nn::Embedding embed;
  nn::StackedRnn rnn;
  Parameter w_out;  // [V, H]
  Parameter b_out;  // [V]

  LanguageModelPrior() = default;
  LanguageModelPrior(const ModelConfig& cfg, Vocabulary vocab, std::mt19937_64& rng);

  // log p(c </s>), OOV scored as <unk>; deterministic.
  real log_prob(const std::vector<std::string>& c) const;
  // Differentiable total NLL of one sentence for pre-training.
  Var train_loss(const std::vector<std::string>& sentence, std::mt19937_64& dropout_rng) const;

  std::vector<Parameter> params() const;
};

struct LowerBoundTerms {
  real estimate = 0;        // log p(s|c) - lambda*(log q(c|s) - log p(c))
  real reconstruction = 0;  // log p(s|c)
  real kl_sampled = 0;      // log q(c|s) - log p(c)
};

// Single-sample evaluation of the scaled lower bound for a given compression.
LowerBoundTerms lower_bound(const CompressionNetwork& q, const ReconstructionNetwork& p,
                            const LanguageModelPrior& prior, const std::vector<std::string>& s,
                            const std::vector<std::string>& c, real lambda);

}  // namespace sentcomp::model
