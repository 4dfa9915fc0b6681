#include "sentcomp/training.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace sentcomp::train {

using ad::NoGradScope;
using ad::Tape;
using model::EncodedSource;

TrainMode parse_train_mode(const std::string& name) {
  if (name == "fsc") return TrainMode::fsc_only;
  if (name == "asc") return TrainMode::asc_only;
  if (name == "joint") return TrainMode::joint;
  throw std::invalid_argument("unknown training mode '" + name + "' (expected fsc, asc or joint)");
}

std::string train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::fsc_only: return "fsc";
    case TrainMode::asc_only: return "asc";
    case TrainMode::joint: return "joint";
  }
  throw std::logic_error("train_mode_name: bad enum value");
}

BaselineState::BaselineState(int enc_dim, std::mt19937_64& rng) {
  b = Parameter{"baseline.b", ad::make_param(Tensor::scalar(0))};
  b_mlp = nn::Mlp("baseline.mlp", {enc_dim, enc_dim, 1}, rng);
}

Var BaselineState::input_baseline(const EncodedSource& src) const {
  Var pooled = src.states[0];
  for (size_t i = 1; i < src.states.size(); ++i) pooled = add(pooled, src.states[i]);
  pooled = stop_gradient(scale(pooled, real(1) / real(src.states.size())));
  return pick(b_mlp.forward(pooled), 0);
}

std::vector<Parameter> BaselineState::params() const {
  std::vector<Parameter> out{b};
  for (const auto& p : b_mlp.params()) out.push_back(p);
  return out;
}

Adam::Adam(std::vector<Parameter> group, real lr) : lr(lr), params(std::move(group)) {
  m1.reserve(params.size());
  m2.reserve(params.size());
  for (const auto& p : params) {
    m1.push_back(Tensor::zeros(p.value().shape));
    m2.push_back(Tensor::zeros(p.value().shape));
  }
}

void Adam::step() {
  for (const auto& p : params)
    for (long i = 0; i < p.grad().numel(); ++i)
      if (!std::isfinite(p.grad().v[i]))
        throw NumericError("adam: non-finite gradient in " + p.name);
  ++steps;
  real bc1 = real(1) - std::pow(beta1, real(steps));
  real bc2 = real(1) - std::pow(beta2, real(steps));
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor& value = params[k].value();
    const Tensor& grad = params[k].grad();
    for (long i = 0; i < value.numel(); ++i) {
      real g = grad.v[i];
      m1[k].v[i] = beta1 * m1[k].v[i] + (real(1) - beta1) * g;
      m2[k].v[i] = beta2 * m2[k].v[i] + (real(1) - beta2) * g * g;
      value.v[i] -= lr * (m1[k].v[i] / bc1) / (std::sqrt(m2[k].v[i] / bc2) + eps);
    }
  }
}

real global_grad_norm(const std::vector<Parameter>& params) {
  real sq = 0;
  for (const auto& p : params)
    for (long i = 0; i < p.grad().numel(); ++i) sq += p.grad().v[i] * p.grad().v[i];
  return std::sqrt(sq);
}

real clip_global_norm(const std::vector<Parameter>& params, real max_norm) {
  real norm = global_grad_norm(params);
  if (!std::isfinite(norm)) throw NumericError("clip: non-finite gradient norm");
  if (norm > max_norm && norm > 0) {
    real s = max_norm / norm;
    for (const auto& p : params)
      for (long i = 0; i < p.grad().numel(); ++i) p.grad().v[i] *= s;
  }
  return norm;
}

AscBatchStats accumulate_asc_gradients(const model::CompressionNetwork& q,
                                       const model::ReconstructionNetwork& recon,
                                       const model::LanguageModelPrior& prior,
                                       const BaselineState& baselines,
                                       const std::vector<std::vector<std::string>>& batch,
                                       real lambda, int samples, std::mt19937_64& rng) {
  if (batch.empty()) throw std::invalid_argument("asc gradients: empty batch");
  if (samples < 1) throw std::invalid_argument("asc gradients: samples must be >= 1");
  Tape tape;
  Var total = Var::scalar(0);
  AscBatchStats stats;
  for (const auto& source : batch) {
    EncodedSource src = q.encode(source);
    Var b_s = baselines.input_baseline(src);
    int max_len = model::max_compression_length(src.n(), q.cfg);
    for (int m = 0; m < samples; ++m) {
      model::CompressionSample cs = q.sample(src, max_len, rng);
      Var log_q = q.log_prob(src, cs.words);
      Var log_p = recon.log_prob(source, reencode_compression(q, cs.words));
      real log_prior = prior.log_prob(cs.words);
      real kl = log_q.item() - log_prior;
      real l = log_p.item() - lambda * kl;
      real coeff = l - baselines.b.value().v[0] - b_s.item();
      // the signal weight enters as a plain number, so only the score
      // function carries it; the residual term reaches just the baselines
      Var residual = add(add(Var::scalar(l), scale(baselines.b.var, -1)), scale(b_s, -1));
      Var sample_loss = add(scale(log_p, -1), scale(log_q, -coeff));
      total = add(total, add(sample_loss, square(residual)));
      stats.elbo += l;
      stats.kl_sample += kl;
      stats.mean_clen += cs.length();
      stats.baseline_residual += coeff * coeff;
    }
  }
  real draws = real(batch.size()) * real(samples);
  tape.backward(scale(total, real(1) / draws));
  stats.elbo /= draws;
  stats.kl_sample /= draws;
  stats.mean_clen /= draws;
  stats.baseline_residual /= draws;
  return stats;
}

real enumerate_exact_gradient(const model::CompressionNetwork& q,
                              const model::ReconstructionNetwork& recon,
                              const model::LanguageModelPrior& prior,
                              const std::vector<std::string>& source, real lambda, long cap) {
  Tape tape;
  EncodedSource src = q.encode(source);
  int max_len = model::max_compression_length(src.n(), q.cfg);
  auto all = q.enumerate_compressions(src, max_len);
  if (static_cast<long>(all.size()) > cap)
    throw std::invalid_argument("enumerate_exact_gradient: " + std::to_string(all.size()) +
                                " latent sequences exceed the cap of " + std::to_string(cap));
  Var total = Var::scalar(0);
  for (const auto& c : all) {
    Var log_q = q.log_prob(src, c);
    Var log_p = recon.log_prob(source, reencode_compression(q, c));
    real log_prior = prior.log_prob(c);
    // l depends on the parameters through both log p and log q; weighting by
    // exp(log q) keeps the expectation itself differentiable
    Var l = add(log_p, scale(add(log_q, Var::scalar(-log_prior)), -lambda));
    total = add(total, mul(exp(log_q), l));
  }
  tape.backward(total);
  return total.item();
}

std::string metrics_header() {
  return "step\telbo\tfsc_nll\tkl_sample\tmean_clen\tbaseline_residual";
}

namespace {

std::string format_real(real x) {
  if (std::isnan(x)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", static_cast<double>(x));
  return buf;
}

}  // namespace

std::string format_metrics(const StepMetrics& m) {
  std::ostringstream out;
  out << m.step << '\t' << format_real(m.elbo) << '\t' << format_real(m.fsc_nll) << '\t'
      << format_real(m.kl_sample) << '\t' << format_real(m.mean_clen) << '\t'
      << format_real(m.baseline_residual);
  return out.str();
}

Trainer::Trainer(model::CompressionNetwork& q_in, model::FscModel* fsc_in,
                 model::ReconstructionNetwork* recon_in, model::LanguageModelPrior* prior_in,
                 BaselineState* baselines_in, const model::ModelConfig& cfg_in,
                 const TrainingConfig& tcfg_in)
    : q(q_in), fsc(fsc_in), recon(recon_in), prior(prior_in), baselines(baselines_in),
      cfg(cfg_in), tcfg(tcfg_in) {
  bool wants_fsc = tcfg.mode != TrainMode::asc_only;
  bool wants_asc = tcfg.mode != TrainMode::fsc_only;
  if (wants_fsc && !fsc)
    throw std::invalid_argument("trainer: mode " + train_mode_name(tcfg.mode) +
                                " needs the supervised head");
  if (wants_asc && (!recon || !prior || !baselines))
    throw std::invalid_argument("trainer: mode " + train_mode_name(tcfg.mode) +
                                " needs the reconstruction side, the prior and the baselines");
  std::vector<Parameter> phi = q.params();
  if (fsc)
    for (const auto& p : fsc->params()) phi.push_back(p);
  opt_phi = Adam(std::move(phi), cfg.lr);
  if (recon) opt_theta = Adam(recon->params(), cfg.lr);
  if (baselines) opt_baseline = Adam(baselines->params(), cfg.lr);
  rng.seed(tcfg.seed);
}

std::vector<Parameter> Trainer::stepped_params() const {
  std::vector<Parameter> out = opt_phi.params;
  if (tcfg.mode != TrainMode::fsc_only) {
    for (const auto& p : opt_theta.params) out.push_back(p);
    for (const auto& p : opt_baseline.params) out.push_back(p);
  }
  return out;
}

StepMetrics Trainer::semi_supervised_step(const std::vector<data::SentencePair>& labelled,
                                          const std::vector<std::vector<std::string>>& unlabelled) {
  bool use_fsc = tcfg.mode != TrainMode::asc_only;
  bool use_asc = tcfg.mode != TrainMode::fsc_only;
  if (use_fsc && labelled.empty())
    throw std::invalid_argument("training step: mode " + train_mode_name(tcfg.mode) +
                                " needs a labelled batch");
  if (use_asc && unlabelled.empty())
    throw std::invalid_argument("training step: mode " + train_mode_name(tcfg.mode) +
                                " needs an unlabelled batch");

  std::vector<Parameter> stepped = stepped_params();
  ad::zero_grad(stepped);

  StepMetrics metrics;
  real nan = std::numeric_limits<real>::quiet_NaN();
  metrics.elbo = metrics.fsc_nll = metrics.kl_sample = nan;
  metrics.mean_clen = metrics.baseline_residual = nan;

  if (use_asc) {
    AscBatchStats stats = accumulate_asc_gradients(q, *recon, *prior, *baselines, unlabelled,
                                                   cfg.lambda, cfg.samples, rng);
    metrics.elbo = stats.elbo;
    metrics.kl_sample = stats.kl_sample;
    metrics.mean_clen = stats.mean_clen;
    metrics.baseline_residual = stats.baseline_residual;
  }
  if (use_fsc) {
    Tape tape;
    Var loss = scale(fsc->loss(labelled), real(1) / real(labelled.size()));
    metrics.fsc_nll = loss.item();
    tape.backward(loss);
  }

  if (tcfg.clip_norm > 0) clip_global_norm(stepped, tcfg.clip_norm);
  opt_phi.step();
  if (use_asc) {
    opt_theta.step();
    opt_baseline.step();
  }

  metrics.step = ++step_count;
  return metrics;
}

}  // namespace sentcomp::train
