#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "sentcomp/asc.hpp"
#include "sentcomp/fsc.hpp"

namespace sentcomp::train {

using ad::Parameter;
using ad::Var;

enum class TrainMode { fsc_only, asc_only, joint };

TrainMode parse_train_mode(const std::string& name);
std::string train_mode_name(TrainMode mode);

struct TrainingConfig {
  int epochs = 5;
  unsigned long long seed = 0;
  TrainMode mode = TrainMode::joint;
  real clip_norm = 5.0;            // global gradient norm cap; <= 0 disables
  int unlabelled_per_labelled = 1;  // joint interleave: unlabelled batches per labelled batch
};

// A non-finite gradient aborts the optimizer step. The CLI maps this to its
// numeric-failure exit code.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two-part variance-reduction baseline for the score-function estimator: a
// free scalar plus an MLP over the mean-pooled encoder states. The pooled
// input is gradient-blocked, so regressing the baselines never moves the
// encoder.
struct BaselineState {
  Parameter b;  // scalar
  nn::Mlp b_mlp;

  BaselineState() = default;
  BaselineState(int enc_dim, std::mt19937_64& rng);

  Var input_baseline(const model::EncodedSource& src) const;
  std::vector<Parameter> params() const;
};

// Bias-corrected Adam over one parameter group. step() scans gradients first
// and leaves everything untouched if any entry is non-finite.
struct Adam {
  real lr = 0.0002;
  real beta1 = 0.9;
  real beta2 = 0.999;
  real eps = 1e-8;
  long steps = 0;
  std::vector<Parameter> params;
  std::vector<Tensor> m1, m2;  // first/second moments, shaped like their parameters

  Adam() = default;
  Adam(std::vector<Parameter> group, real lr);

  void step();
};

real global_grad_norm(const std::vector<Parameter>& params);
// Scales every gradient by max_norm/norm when the global norm exceeds the
// cap; returns the pre-clip norm. Rejects non-finite gradients.
real clip_global_norm(const std::vector<Parameter>& params, real max_norm);

struct AscBatchStats {
  real elbo = 0;               // mean learning signal over all drawn samples
  real kl_sample = 0;          // mean log q(c|s) - log p(c)
  real mean_clen = 0;          // mean sampled compression length
  real baseline_residual = 0;  // mean squared centred residual
};

// One backward pass over a batch of bare sources. Per sample the surrogate
// combines three independent pathways: -log p(s|c) moves the reconstruction
// side, -(l - b - b(s)) log q(c|s) with a gradient-blocked weight moves the
// pointer network, and the squared residual moves only the baselines.
// Gradients accumulate; callers zero first.
AscBatchStats accumulate_asc_gradients(const model::CompressionNetwork& q,
                                       const model::ReconstructionNetwork& recon,
                                       const model::LanguageModelPrior& prior,
                                       const BaselineState& baselines,
                                       const std::vector<std::vector<std::string>>& batch,
                                       real lambda, int samples, std::mt19937_64& rng);

// Exact lower bound E_q[log p(s|c)] - lambda E_q[log q - log p] by summing
// every admissible compression; backward through the expectation accumulates
// the exact ascent gradients on the pointer and reconstruction parameters.
// Rejects sources whose latent space exceeds cap sequences.
real enumerate_exact_gradient(const model::CompressionNetwork& q,
                              const model::ReconstructionNetwork& recon,
                              const model::LanguageModelPrior& prior,
                              const std::vector<std::string>& source, real lambda,
                              long cap = 100000);

struct StepMetrics {
  long step = 0;
  real elbo = 0;
  real fsc_nll = 0;
  real kl_sample = 0;
  real mean_clen = 0;
  real baseline_residual = 0;
};

std::string metrics_header();  // tab-separated column names
std::string format_metrics(const StepMetrics& m);

// Drives one optimizer step per call. Parameter groups: the pointer network
// plus the supervised head, the reconstruction side, and the baselines; each
// group has its own Adam state but they step together.
class Trainer {
 public:
  Trainer(model::CompressionNetwork& q, model::FscModel* fsc,
          model::ReconstructionNetwork* recon, model::LanguageModelPrior* prior,
          BaselineState* baselines, const model::ModelConfig& cfg, const TrainingConfig& tcfg);

  // Consumes the batches the mode needs and ignores the other one. Fields of
  // the returned metrics that the mode does not produce are NaN.
  StepMetrics semi_supervised_step(const std::vector<data::SentencePair>& labelled,
                                   const std::vector<std::vector<std::string>>& unlabelled);

  model::CompressionNetwork& q;
  model::FscModel* fsc = nullptr;
  model::ReconstructionNetwork* recon = nullptr;
  model::LanguageModelPrior* prior = nullptr;
  BaselineState* baselines = nullptr;
  model::ModelConfig cfg;
  TrainingConfig tcfg;
  Adam opt_phi;       // pointer network + supervised head
  Adam opt_theta;     // reconstruction network
  Adam opt_baseline;  // b and the baseline MLP
  long step_count = 0;
  std::mt19937_64 rng;

 private:
  std::vector<Parameter> stepped_params() const;
};

}  // namespace sentcomp::train
