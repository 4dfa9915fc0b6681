#pragma once

#include <memory>
#include <optional>
#include <string>

#include "sentcomp/training.hpp"

namespace sentcomp::ckpt {

// Unreadable, corrupt, truncated, or incompatible checkpoint files. The CLI
// maps this to the data-error exit code.
struct CheckpointError : data::DataError {
  using data::DataError::DataError;
};

// Everything one training run owns. The pointer network and the supervised
// head always exist; the reconstruction side, the prior and the baselines
// exist only for modes that use them.
struct System {
  model::ModelConfig cfg;
  train::TrainingConfig tcfg;
  std::unique_ptr<model::CompressionNetwork> q;
  std::unique_ptr<model::FscModel> fsc;
  std::unique_ptr<model::ReconstructionNetwork> recon;
  std::unique_ptr<model::LanguageModelPrior> prior;
  std::unique_ptr<train::BaselineState> baselines;
  std::unique_ptr<train::Trainer> trainer;
};

// Fresh system seeded from tcfg.seed. The decoder vocabulary is the
// top-frequency prefix of the encoder's; the prior, when the mode needs one
// and none is supplied, is built fresh over the compressor vocabulary.
System build_system(const model::ModelConfig& cfg, const train::TrainingConfig& tcfg,
                    const data::Vocabulary& enc_vocab, const data::Vocabulary& cmp_vocab,
                    std::unique_ptr<model::LanguageModelPrior> pretrained_prior = nullptr);

// Versioned binary container: magic, format version, named sections (config
// as JSON, vocabularies, raw little-endian parameter blocks, optimizer
// moments, trainer step counter and generator state), closed by a checksum.
// save -> load -> save produces byte-identical files; load restores every
// parameter and moment bitwise.
void save_system(const std::string& path, const System& system);

// Rebuilds the saved system. mode_override retargets the training mode and
// fails with a missing-component message when the file lacks something the
// new mode needs.
System load_system(const std::string& path,
                   std::optional<train::TrainMode> mode_override = std::nullopt);

// Standalone prior checkpoints, for pre-training the language model once and
// reusing it across runs.
void save_prior(const std::string& path, const model::LanguageModelPrior& prior);
std::unique_ptr<model::LanguageModelPrior> load_prior(const std::string& path);

// The checkpoint's config section as JSON text; indent < 0 is compact.
std::string config_json(const model::ModelConfig& cfg, const train::TrainingConfig& tcfg,
                        int indent = -1);

}  // namespace sentcomp::ckpt
