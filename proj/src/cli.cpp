#include "sentcomp/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>

#include <CLI11.hpp>

#include "sentcomp/checkpoint.hpp"
#include "sentcomp/decode.hpp"
#include "sentcomp/eval.hpp"

namespace sentcomp::cli {

namespace {

using data::Corpus;
using data::CorpusFormat;
using data::DataError;
using data::Vocabulary;
using data::VocabRole;
using model::EncodedSource;
using model::ModelConfig;
using train::TrainingConfig;
using train::TrainMode;

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

std::vector<std::vector<std::string>> read_token_lines(const std::string& path, bool mask) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(f, line)) out.push_back(data::tokenize(line, mask));
  return out;
}

template <class T>
std::vector<T> cyclic_slice(const std::vector<T>& pool, long start, long count) {
  std::vector<T> out;
  if (pool.empty()) return out;
  long n = static_cast<long>(pool.size());
  count = std::min(count, n);
  for (long i = 0; i < count; ++i) out.push_back(pool[size_t(((start + i) % n + n) % n)]);
  return out;
}

void redraw(const std::vector<ad::Parameter>& params, std::mt19937_64& rng) {
  std::uniform_real_distribution<real> dist(-0.5, 0.5);
  for (const auto& p : params)
    for (auto& e : p.value().v) e = dist(rng);
}

// ---- synth -------------------------------------------------------------------

struct SynthOpts {
  int n_train = 200, n_test = 50, keywords = 30, noise = 10;
  unsigned long long seed = 0;
  std::string out_dir;
};

int do_synth(const SynthOpts& o, std::ostream& out) {
  data::SyntheticData synth = data::generate_synthetic_task(
      o.n_train, o.n_test, data::synthetic_keyword_lexicon(o.keywords),
      data::synthetic_noise_lexicon(o.noise), o.seed);
  std::filesystem::create_directories(o.out_dir);
  data::save_corpus(synth.train, o.out_dir + "/train.tsv", o.out_dir + "/train.txt");
  data::save_corpus(synth.test, o.out_dir + "/test.tsv", o.out_dir + "/test.txt");
  out << "wrote " << synth.train.labelled.size() << " train and " << synth.test.labelled.size()
      << " test pairs under " << o.out_dir << "\n";
  return exit_ok;
}

// ---- lm-train ------------------------------------------------------------------

struct LmTrainOpts {
  std::string data, out_path;
  int vocab_cap = 10004, epochs = 5, batch = 64, dim = 256, layers = 3;
  real lr = 0.0002, dropout = 0.5;
  unsigned long long seed = 0;
  bool raw_digits = false;
};

int do_lm_train(const LmTrainOpts& o, std::ostream& out) {
  Corpus corpus = data::load_corpus({o.data}, CorpusFormat::unlabelled_lines, !o.raw_digits);
  if (corpus.unlabelled.empty()) throw DataError("no sentences in " + o.data);
  Vocabulary vocab = data::build_vocab(corpus.source_tokens(), o.vocab_cap, 1, VocabRole::lm);
  ModelConfig cfg;
  cfg.dim = o.dim;
  cfg.lm_layers = o.layers;
  cfg.lm_dropout = o.dropout;
  cfg.lr = o.lr;
  cfg.batch_size = o.batch;
  std::mt19937_64 rng(o.seed);
  model::LanguageModelPrior prior(cfg, vocab, rng);
  train::Adam opt(prior.params(), o.lr);
  const auto& pool = corpus.unlabelled;
  long steps_per_epoch = (long(pool.size()) + o.batch - 1) / o.batch;
  for (int epoch = 0; epoch < o.epochs; ++epoch) {
    real epoch_nll = 0;
    for (long s = 0; s < steps_per_epoch; ++s) {
      auto batch = cyclic_slice(pool, (long(epoch) * steps_per_epoch + s) * o.batch, o.batch);
      ad::Tape tape;
      ad::Var loss;
      for (const auto& sentence : batch) {
        ad::Var nll = prior.train_loss(sentence, rng);
        loss = loss.defined() ? add(loss, nll) : nll;
      }
      loss = scale(loss, real(1) / real(batch.size()));
      epoch_nll += loss.item();
      tape.backward(loss);
      train::clip_global_norm(prior.params(), 5.0);
      opt.step();
      ad::zero_grad(prior.params());
    }
    out << "epoch " << epoch + 1 << "/" << o.epochs << " mean-nll "
        << epoch_nll / real(steps_per_epoch) << "\n";
  }
  ckpt::save_prior(o.out_path, prior);
  out << "saved prior to " << o.out_path << "\n";
  return exit_ok;
}

// ---- train ---------------------------------------------------------------------

struct TrainOpts {
  std::string mode = "joint";
  std::string labelled, unlabelled, prior_path, resume, metrics_path;
  std::string out_path = "model.ckpt";
  ModelConfig dflt;  // paper defaults come from the config type itself
  real lambda = dflt.lambda, lr = dflt.lr, clip = 5.0;
  real len_ratio = dflt.compression_ratio;
  int batch = dflt.batch_size, beam = dflt.beam, dim = dflt.dim, samples = dflt.samples;
  int layers = dflt.encoder_layers, dec_cap = dflt.decoder_vocab_cap;
  int epochs = 5, enc_cap = 120004, cmp_cap = 70004, ratio = 1;
  unsigned long long seed = 0;
  bool dump_config = false, raw_digits = false;
  bool mode_given = false, epochs_given = false;  // resume honors these only when set
};

int do_train(const TrainOpts& o, std::ostream& out, std::ostream& err) {
  ModelConfig cfg;
  cfg.dim = o.dim;
  cfg.encoder_layers = cfg.compressor_layers = cfg.lm_layers = o.layers;
  cfg.lambda = o.lambda;
  cfg.compression_ratio = o.len_ratio;
  cfg.samples = o.samples;
  cfg.beam = o.beam;
  cfg.batch_size = o.batch;
  cfg.lr = o.lr;
  cfg.decoder_vocab_cap = o.dec_cap;
  TrainingConfig tcfg;
  tcfg.epochs = o.epochs;
  tcfg.seed = o.seed;
  tcfg.mode = train::parse_train_mode(o.mode);
  tcfg.clip_norm = o.clip;
  tcfg.unlabelled_per_labelled = o.ratio;
  if (o.dump_config) {
    out << ckpt::config_json(cfg, tcfg, 2) << "\n";
    return exit_ok;
  }

  // a resumed run takes mode and epoch total from the checkpoint unless the
  // flags are given explicitly, so the checkpoint has to be opened before the
  // data arguments can be validated against the mode
  ckpt::System sys;
  bool resuming = !o.resume.empty();
  if (resuming) {
    sys = ckpt::load_system(o.resume, o.mode_given
                                          ? std::optional<TrainMode>(tcfg.mode)
                                          : std::nullopt);
    if (o.epochs_given) {
      sys.tcfg.epochs = o.epochs;
      sys.trainer->tcfg.epochs = o.epochs;
    }
    out << "resumed from " << o.resume << " at step " << sys.trainer->step_count << "\n";
  }
  TrainMode mode = resuming ? sys.tcfg.mode : tcfg.mode;
  bool use_fsc = mode != TrainMode::asc_only;
  bool use_asc = mode != TrainMode::fsc_only;
  if (use_fsc && o.labelled.empty()) {
    err << "train: mode '" << train::train_mode_name(mode) << "' requires --labelled\n";
    return exit_usage;
  }
  if (use_asc && o.unlabelled.empty()) {
    err << "train: mode '" << train::train_mode_name(mode) << "' requires --unlabelled\n";
    return exit_usage;
  }

  Corpus lab, unlab;
  if (!o.labelled.empty())
    lab = data::load_corpus({o.labelled}, CorpusFormat::paired_tsv, !o.raw_digits);
  if (!o.unlabelled.empty())
    unlab = data::load_corpus({o.unlabelled}, CorpusFormat::unlabelled_lines, !o.raw_digits);
  if (use_fsc && lab.labelled.empty()) throw DataError("no labelled pairs in " + o.labelled);
  if (use_asc && unlab.unlabelled.empty())
    throw DataError("no unlabelled sentences in " + o.unlabelled);

  if (!resuming) {
    std::vector<std::string> source_tokens = lab.source_tokens();
    for (const auto& t : unlab.source_tokens()) source_tokens.push_back(t);
    Vocabulary enc = data::build_vocab(source_tokens, o.enc_cap, 1, VocabRole::encoder);
    // the pointer emits source words, so they belong in the compressor
    // vocabulary alongside the labelled compressions
    std::vector<std::string> cmp_tokens = lab.compression_tokens();
    for (const auto& t : source_tokens) cmp_tokens.push_back(t);
    Vocabulary cmp = data::build_vocab(cmp_tokens, o.cmp_cap, 1, VocabRole::compressor);
    std::unique_ptr<model::LanguageModelPrior> prior;
    if (!o.prior_path.empty()) {
      prior = ckpt::load_prior(o.prior_path);
      if (prior->cfg.dim != cfg.dim)
        throw DataError("prior checkpoint was trained with dim " +
                        std::to_string(prior->cfg.dim) + ", this run uses " +
                        std::to_string(cfg.dim));
    }
    sys = ckpt::build_system(cfg, tcfg, enc, cmp, std::move(prior));
  }

  const auto& L = lab.labelled;
  const auto& U = unlab.unlabelled;
  long batch_size = sys.cfg.batch_size;
  long u_batch = batch_size * std::max(1, sys.tcfg.unlabelled_per_labelled);
  long steps_per_epoch =
      use_fsc ? (long(L.size()) + batch_size - 1) / batch_size
              : (long(U.size()) + u_batch - 1) / u_batch;
  long total_steps = steps_per_epoch * sys.tcfg.epochs;

  std::string metrics_path = o.metrics_path.empty() ? o.out_path + ".metrics" : o.metrics_path;
  bool fresh = sys.trainer->step_count == 0;
  std::ofstream metrics(metrics_path, fresh ? std::ios::trunc : std::ios::app);
  if (!metrics) throw DataError("cannot write metrics stream " + metrics_path);
  if (fresh) metrics << train::metrics_header() << "\n";

  while (sys.trainer->step_count < total_steps) {
    long s = sys.trainer->step_count;
    auto lb = use_fsc ? cyclic_slice(L, s * batch_size, batch_size)
                      : std::vector<data::SentencePair>{};
    auto ub = use_asc ? cyclic_slice(U, s * u_batch, u_batch)
                      : std::vector<std::vector<std::string>>{};
    train::StepMetrics m = sys.trainer->semi_supervised_step(lb, ub);
    metrics << train::format_metrics(m) << "\n";
    if (m.step % steps_per_epoch == 0 || m.step == total_steps)
      out << "step " << m.step << "/" << total_steps << " " << train::format_metrics(m) << "\n";
  }
  metrics.flush();
  ckpt::save_system(o.out_path, sys);
  out << "saved checkpoint to " << o.out_path << " (metrics in " << metrics_path << ")\n";
  return exit_ok;
}

// ---- compress ------------------------------------------------------------------

struct CompressOpts {
  std::string checkpoint, input = "-", output = "-";
  std::string mode = "extractive";
  int beam = 0;  // 0 means the checkpoint's configured width
  real length_norm = 0;
  bool raw_digits = false;
};

int do_compress(const CompressOpts& o, std::ostream& out, std::ostream& err) {
  ckpt::System sys = ckpt::load_system(o.checkpoint);
  if (o.mode == "abstractive" && !sys.fsc)
    throw DataError("checkpoint has no supervised head, abstractive decoding needs one");
  int k = o.beam > 0 ? o.beam : sys.cfg.beam;

  std::ifstream file_in;
  std::istream* in = &std::cin;
  if (o.input != "-") {
    file_in.open(o.input);
    if (!file_in) throw DataError("cannot open " + o.input);
    in = &file_in;
  }
  std::ofstream file_out;
  std::ostream* dst = &out;
  if (o.output != "-") {
    file_out.open(o.output, std::ios::trunc);
    if (!file_out) throw DataError("cannot write " + o.output);
    dst = &file_out;
  }

  std::string line;
  long lineno = 0;
  while (std::getline(*in, line)) {
    ++lineno;
    std::vector<std::string> toks = data::tokenize(line, !o.raw_digits);
    if (toks.empty()) {
      *dst << "\n";
      continue;
    }
    decode::BeamResult r =
        o.mode == "extractive"
            ? decode::compress_extractive(*sys.q, toks, k, o.length_norm)
            : decode::compress_abstractive(*sys.fsc, toks, k, o.length_norm);
    if (!r.finished)
      err << "warning: line " << lineno
          << ": no hypothesis ended within the length budget, emitting the best open one\n";
    *dst << join(r.words) << "\n";
  }
  return exit_ok;
}

// ---- evaluate ------------------------------------------------------------------

struct EvalOpts {
  std::string candidates, references, checkpoint, pairs, lm, sentences;
  bool raw_digits = false;
};

int do_evaluate(const EvalOpts& o, std::ostream& out, std::ostream& err) {
  bool any = false;
  if (o.candidates.empty() != o.references.empty()) {
    err << "evaluate: --candidates and --references must be given together\n";
    return exit_usage;
  }
  if (o.checkpoint.empty() != o.pairs.empty()) {
    err << "evaluate: --checkpoint and --pairs must be given together\n";
    return exit_usage;
  }
  if (o.lm.empty() != o.sentences.empty()) {
    err << "evaluate: --lm and --sentences must be given together\n";
    return exit_usage;
  }
  out << std::fixed << std::setprecision(4);
  if (!o.candidates.empty()) {
    auto cand = read_token_lines(o.candidates, !o.raw_digits);
    auto refs = read_token_lines(o.references, !o.raw_digits);
    if (cand.size() != refs.size())
      throw DataError("candidate and reference files differ in length (" +
                      std::to_string(cand.size()) + " vs " + std::to_string(refs.size()) + ")");
    if (cand.empty()) throw DataError("no sentences to score");
    eval::RougeSummary s = eval::rouge_corpus(cand, refs);
    out << "variant\trecall\tprecision\tf1\n";
    out << "rouge-1\t" << s.r1.recall << "\t" << s.r1.precision << "\t" << s.r1.f1 << "\n";
    out << "rouge-2\t" << s.r2.recall << "\t" << s.r2.precision << "\t" << s.r2.f1 << "\n";
    out << "rouge-l\t" << s.rl.recall << "\t" << s.rl.precision << "\t" << s.rl.f1 << "\n";
    any = true;
  }
  if (!o.checkpoint.empty()) {
    ckpt::System sys = ckpt::load_system(o.checkpoint);
    if (!sys.fsc) throw DataError("checkpoint has no supervised head to score perplexity with");
    Corpus pc = data::load_corpus({o.pairs}, CorpusFormat::paired_tsv, !o.raw_digits);
    out << "fsc-perplexity\t" << eval::perplexity_fsc(*sys.fsc, pc.labelled) << "\n";
    any = true;
  }
  if (!o.lm.empty()) {
    auto prior = ckpt::load_prior(o.lm);
    auto sentences = read_token_lines(o.sentences, !o.raw_digits);
    out << "lm-perplexity\t" << eval::perplexity_lm(*prior, sentences) << "\n";
    any = true;
  }
  if (!any) {
    err << "evaluate: nothing to do, give --candidates/--references, --checkpoint/--pairs or "
           "--lm/--sentences\n";
    return exit_usage;
  }
  return exit_ok;
}

// ---- grad-check and oracle-check -------------------------------------------------

struct CheckOpts {
  unsigned long long seed = 0;
  int trials = 3;
  long mass_trials = 2000;
  real eps = 1e-4;
};

ModelConfig check_config() {
  ModelConfig cfg;
  cfg.dim = 5;
  cfg.encoder_layers = 1;
  cfg.compressor_layers = 1;
  cfg.lm_layers = 1;
  cfg.lm_dropout = 0;
  return cfg;
}

int do_grad_check(const CheckOpts& o, std::ostream& out) {
  bool all_passed = true;
  // eps balances the two error floors of central differences on these
  // composite losses: truncation grows as eps^2 while round-off shrinks
  // with eps, and 1e-4 keeps both an order of magnitude under tolerance
  const real eps = o.eps, tol = 1e-4;
  for (int trial = 0; trial < o.trials; ++trial) {
    std::mt19937_64 rng(o.seed + 100 * trial);
    ModelConfig cfg = check_config();
    Vocabulary enc = data::build_vocab({"a", "b", "c", "d", "e"}, 1000, 1, VocabRole::encoder);
    model::CompressionNetwork q(cfg, enc, enc, rng);
    model::FscModel fsc(q, rng);
    model::ReconstructionNetwork recon(cfg, enc.prefix(enc.size(), VocabRole::decoder), rng);
    redraw(q.params(), rng);
    redraw(fsc.params(), rng);
    redraw(recon.params(), rng);
    std::vector<data::SentencePair> batch = {{{"a", "b", "c"}, {"a", "c"}},
                                             {{"d", "e"}, {"d"}}};
    std::vector<std::string> source = {"b", "a", "d"};
    std::vector<std::string> kept = {"b", "d"};

    auto report = [&](const std::string& name, const ad::FiniteDiffReport& rep) {
      out << "trial " << trial << " " << name << " max-rel-err " << rep.max_rel_err << " "
          << (rep.passed ? "PASS" : "FAIL") << "\n";
      all_passed = all_passed && rep.passed;
    };
    std::vector<ad::Parameter> phi = q.params();
    for (const auto& p : fsc.params()) phi.push_back(p);
    report("supervised-loss", ad::finite_diff_check(
                                  [&] { return fsc.loss(batch); }, phi, eps, tol));
    report("pointer-log-prob", ad::finite_diff_check(
                                   [&] {
                                     return scale(q.log_prob(q.encode(source), kept), -1);
                                   },
                                   q.params(), eps, tol));
    report("reconstruction-loss",
           ad::finite_diff_check(
               [&] {
                 auto hhat = model::reencode_compression(q, kept);
                 return scale(recon.log_prob(source, hhat), -1);
               },
               recon.params(), eps, tol));
  }
  out << (all_passed ? "grad-check: PASS" : "grad-check: FAIL") << "\n";
  return all_passed ? exit_ok : exit_usage;
}

int do_oracle_check(const CheckOpts& o, std::ostream& out) {
  std::mt19937_64 rng(o.seed);
  ModelConfig cfg = check_config();
  std::vector<std::string> lexicon = {"a", "b", "c", "d", "e", "f"};
  Vocabulary vocab = data::build_vocab(lexicon, 1000, 1, VocabRole::encoder);
  model::CompressionNetwork q(cfg, vocab, vocab, rng);
  model::FscModel fsc(q, rng);
  redraw(q.params(), rng);
  redraw(fsc.params(), rng);

  long support_violations = 0;
  real max_mass_dev = 0;
  std::uniform_int_distribution<int> len_dist(2, 5);
  std::uniform_int_distribution<int> word_dist(0, int(lexicon.size()) - 1);
  for (long t = 0; t < o.mass_trials; ++t) {
    std::vector<std::string> source;
    int n = len_dist(rng);
    for (int i = 0; i < n; ++i) source.push_back(lexicon[size_t(word_dist(rng))]);
    ad::NoGradScope eval_mode;
    EncodedSource src = q.encode(source);
    int cap = model::max_compression_length(src.n(), cfg);
    model::CompressionSample smp = q.sample(src, cap, rng);
    if (smp.length() < 1 || smp.length() > cap) ++support_violations;
    for (const auto& w : smp.words)
      if (!src.match.count(w)) ++support_violations;
    model::FscModel::Step st = fsc.step(src, q.compressor.output(q.compressor.step(
                                                 q.initial_state(src),
                                                 q.cmp_embed(Vocabulary::bos_id))));
    real mass = 0;
    for (const auto& [word, p] : fsc.event_distribution(src, st)) mass += p;
    max_mass_dev = std::max(max_mass_dev, std::abs(mass - 1));
  }

  // total probability over the whole latent space of a few tiny sources
  real max_total_dev = 0;
  for (auto source : {std::vector<std::string>{"a", "b"}, std::vector<std::string>{"c", "a", "c"}}) {
    ad::NoGradScope eval_mode;
    EncodedSource src = q.encode(source);
    int cap = model::max_compression_length(src.n(), cfg);
    real total = 0;
    for (const auto& c : q.enumerate_compressions(src, cap))
      total += std::exp(q.log_prob(src, c).item());
    max_total_dev = std::max(max_total_dev, std::abs(total - 1));
  }

  bool passed = support_violations == 0 && max_mass_dev < 1e-9 && max_total_dev < 1e-9;
  out << "support violations: " << support_violations << "/" << o.mass_trials << "\n";
  out << "combined-distribution mass deviation: " << max_mass_dev << "\n";
  out << "pointer total-mass deviation: " << max_total_dev << "\n";
  out << (passed ? "oracle-check: PASS" : "oracle-check: FAIL") << "\n";
  return passed ? exit_ok : exit_usage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"discrete-latent sentence compression: training, decoding, scoring"};
  app.name("sentcomp");

  SynthOpts synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic keyword-compression corpus");
  synth_cmd->add_option("--train", synth.n_train, "training pairs");
  synth_cmd->add_option("--test", synth.n_test, "test pairs");
  synth_cmd->add_option("--keywords", synth.keywords, "keyword lexicon size");
  synth_cmd->add_option("--noise", synth.noise, "noise lexicon size");
  synth_cmd->add_option("--seed", synth.seed, "generator seed");
  synth_cmd->add_option("--out", synth.out_dir, "output directory")->required();

  LmTrainOpts lmo;
  CLI::App* lm_cmd = app.add_subcommand("lm-train", "pre-train the language-model prior");
  lm_cmd->add_option("--data", lmo.data, "unlabelled sentences, one per line")->required();
  lm_cmd->add_option("--out", lmo.out_path, "prior checkpoint path")->required();
  lm_cmd->add_option("--vocab-cap", lmo.vocab_cap, "vocabulary size cap");
  lm_cmd->add_option("--epochs", lmo.epochs, "training epochs");
  lm_cmd->add_option("--batch-size", lmo.batch, "sentences per step");
  lm_cmd->add_option("--lr", lmo.lr, "learning rate");
  lm_cmd->add_option("--dim", lmo.dim, "hidden units");
  lm_cmd->add_option("--layers", lmo.layers, "recurrent layers");
  lm_cmd->add_option("--dropout", lmo.dropout, "dropout on non-recurrent connections");
  lm_cmd->add_option("--seed", lmo.seed, "generator seed");
  lm_cmd->add_flag("--raw-digits", lmo.raw_digits, "keep digits instead of masking them to #");

  TrainOpts to;
  CLI::App* train_cmd = app.add_subcommand("train", "train fsc, asc or the joint model");
  train_cmd->add_option("--mode", to.mode, "fsc, asc or joint")
      ->check(CLI::IsMember({"fsc", "asc", "joint"}));
  train_cmd->add_option("--labelled", to.labelled, "paired tsv: source TAB compression");
  train_cmd->add_option("--unlabelled", to.unlabelled, "bare sources, one per line");
  train_cmd->add_option("--lambda", to.lambda, "divergence weight in the lower bound");
  train_cmd->add_option("--batch-size", to.batch, "pairs per step");
  train_cmd->add_option("--lr", to.lr, "learning rate");
  train_cmd->add_option("--beam", to.beam, "decoding beam width stored in the config");
  train_cmd->add_option("--seed", to.seed, "generator seed");
  train_cmd->add_option("--epochs", to.epochs, "passes over the driving pool");
  train_cmd->add_option("--dim", to.dim, "hidden units");
  train_cmd->add_option("--layers", to.layers, "recurrent layers per stack");
  train_cmd->add_option("--samples", to.samples, "gradient samples per source");
  train_cmd->add_option("--enc-vocab-cap", to.enc_cap, "encoder vocabulary cap");
  train_cmd->add_option("--cmp-vocab-cap", to.cmp_cap, "compressor vocabulary cap");
  train_cmd->add_option("--dec-vocab-cap", to.dec_cap, "decoder vocabulary cap");
  train_cmd->add_option("--clip", to.clip, "global gradient-norm cap, <= 0 disables");
  train_cmd->add_option("--ratio", to.ratio, "unlabelled batches per labelled batch");
  train_cmd->add_option("--prior", to.prior_path, "pre-trained prior checkpoint");
  train_cmd->add_option("--resume", to.resume, "continue from a checkpoint");
  train_cmd->add_option("--out", to.out_path, "checkpoint path to write");
  train_cmd->add_option("--metrics", to.metrics_path, "metrics stream path");
  train_cmd->add_flag("--dump-config", to.dump_config, "print the effective config and exit");
  train_cmd->add_flag("--raw-digits", to.raw_digits, "keep digits instead of masking them to #");

  CompressOpts co;
  CLI::App* compress_cmd = app.add_subcommand("compress", "decode compressions for input sentences");
  compress_cmd->add_option("--checkpoint", co.checkpoint, "trained model")->required();
  compress_cmd->add_option("--mode", co.mode, "extractive or abstractive")
      ->check(CLI::IsMember({"extractive", "abstractive"}));
  compress_cmd->add_option("--input", co.input, "input file, - for stdin");
  compress_cmd->add_option("--output", co.output, "output file, - for stdout");
  compress_cmd->add_option("--beam", co.beam, "beam width, 0 uses the checkpoint's");
  compress_cmd->add_option("--length-norm", co.length_norm,
                           "divide completed scores by length^this (0 keeps raw scores)");
  compress_cmd->add_flag("--raw-digits", co.raw_digits, "keep digits instead of masking them to #");

  EvalOpts eo;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "overlap scores and perplexity");
  eval_cmd->add_option("--candidates", eo.candidates, "decoded compressions, one per line");
  eval_cmd->add_option("--references", eo.references, "gold compressions, one per line");
  eval_cmd->add_option("--checkpoint", eo.checkpoint, "model for conditional perplexity");
  eval_cmd->add_option("--pairs", eo.pairs, "paired tsv scored by the checkpoint");
  eval_cmd->add_option("--lm", eo.lm, "prior checkpoint for sentence perplexity");
  eval_cmd->add_option("--sentences", eo.sentences, "sentences scored by the prior");
  eval_cmd->add_flag("--raw-digits", eo.raw_digits, "keep digits instead of masking them to #");

  CheckOpts gco;
  CLI::App* grad_cmd = app.add_subcommand("grad-check", "finite-difference gradient verification");
  grad_cmd->add_option("--seed", gco.seed, "generator seed");
  grad_cmd->add_option("--trials", gco.trials, "random model instances");
  grad_cmd->add_option("--eps", gco.eps, "central-difference probe step");

  CheckOpts oco;
  CLI::App* oracle_cmd =
      app.add_subcommand("oracle-check", "sampling support and distribution mass verification");
  oracle_cmd->add_option("--seed", oco.seed, "generator seed");
  oracle_cmd->add_option("--trials", oco.mass_trials, "randomized property trials");

  try {
    std::vector<const char*> argv{"sentcomp"};
    for (const auto& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_usage;
  }
  to.mode_given = train_cmd->count("--mode") > 0;
  to.epochs_given = train_cmd->count("--epochs") > 0;

  try {
    if (*synth_cmd) return do_synth(synth, out);
    if (*lm_cmd) return do_lm_train(lmo, out);
    if (*train_cmd) return do_train(to, out, err);
    if (*compress_cmd) return do_compress(co, out, err);
    if (*eval_cmd) return do_evaluate(eo, out, err);
    if (*grad_cmd) return do_grad_check(gco, out);
    if (*oracle_cmd) return do_oracle_check(oco, out);
    out << app.help();
    return exit_usage;
  } catch (const train::NumericError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return exit_numeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return exit_usage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_usage;
  }
}

}  // namespace sentcomp::cli
