#include "sentcomp/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace sentcomp::ckpt {

using data::Vocabulary;
using data::VocabRole;
using nlohmann::json;

namespace {

constexpr char magic[4] = {'S', 'C', 'K', 'P'};
constexpr uint32_t format_version = 1;

uint64_t fnv1a(const std::string& bytes, size_t len) {
  uint64_t h = 14695981039346656037ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= static_cast<unsigned char>(bytes[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_real(std::string& out, real v) {
  double d = double(v);
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<uint32_t>(s.size()));
  out += s;
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  size_t end = 0;

  void need(size_t n) const {
    if (pos + n > end) throw CheckpointError("checkpoint: truncated section");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  real real_value() {
    uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, 8);
    return real(d);
  }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  bool done() const { return pos == end; }
};

// ---- section payloads -------------------------------------------------------

std::string encode_vocab(const Vocabulary& v) {
  std::string out;
  put_u32(out, static_cast<uint32_t>(v.role));
  put_u64(out, v.index_to_token.size());
  for (const auto& t : v.index_to_token) put_str(out, t);
  return out;
}

Vocabulary decode_vocab(Reader& r) {
  Vocabulary v;
  v.role = static_cast<VocabRole>(r.u32());
  uint64_t n = r.u64();
  for (uint64_t i = 0; i < n; ++i) {
    std::string t = r.str();
    v.token_to_index.emplace(t, static_cast<int>(v.index_to_token.size()));
    v.index_to_token.push_back(std::move(t));
  }
  const char* reserved[] = {"<pad>", "<s>", "</s>", "<unk>"};
  if (v.size() < 4) throw CheckpointError("checkpoint: vocabulary lost its reserved symbols");
  for (int i = 0; i < 4; ++i)
    if (v.index_to_token[i] != reserved[i])
      throw CheckpointError("checkpoint: vocabulary lost its reserved symbols");
  return v;
}

std::string encode_params(const std::vector<ad::Parameter>& params) {
  std::string out;
  put_u64(out, params.size());
  for (const auto& p : params) {
    put_str(out, p.name);
    const Tensor& t = p.value();
    put_u32(out, static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(out, static_cast<uint32_t>(d));
    put_u64(out, t.v.size());
    for (real x : t.v) put_real(out, x);
  }
  return out;
}

// Restores values into an already-built group; the architecture on both
// sides must agree, so any name or shape drift is a hard error.
void decode_params(Reader& r, const std::vector<ad::Parameter>& params, const char* group) {
  uint64_t n = r.u64();
  if (n != params.size())
    throw CheckpointError(std::string("checkpoint: parameter group '") + group + "' holds " +
                          std::to_string(n) + " entries, expected " +
                          std::to_string(params.size()));
  for (const auto& p : params) {
    std::string name = r.str();
    if (name != p.name)
      throw CheckpointError(std::string("checkpoint: parameter '") + name +
                            "' does not match expected '" + p.name + "'");
    uint32_t rank = r.u32();
    std::vector<int> shape;
    for (uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<int>(r.u32()));
    uint64_t numel = r.u64();
    Tensor& t = p.value();
    if (shape != t.shape || numel != t.v.size())
      throw CheckpointError(std::string("checkpoint: parameter '") + name +
                            "' has a mismatched shape");
    for (auto& x : t.v) x = r.real_value();
  }
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes in a parameter group");
}

std::string encode_adam(const train::Adam& opt) {
  std::string out;
  put_u64(out, static_cast<uint64_t>(opt.steps));
  put_u64(out, opt.params.size());
  for (size_t i = 0; i < opt.params.size(); ++i) {
    put_u64(out, opt.m1[i].v.size());
    for (real x : opt.m1[i].v) put_real(out, x);
    for (real x : opt.m2[i].v) put_real(out, x);
  }
  return out;
}

void decode_adam(Reader& r, train::Adam& opt, const char* group) {
  opt.steps = static_cast<long>(r.u64());
  uint64_t n = r.u64();
  if (n != opt.params.size())
    throw CheckpointError(std::string("checkpoint: optimizer state '") + group +
                          "' does not match its parameter group");
  for (size_t i = 0; i < n; ++i) {
    uint64_t numel = r.u64();
    if (numel != opt.m1[i].v.size())
      throw CheckpointError(std::string("checkpoint: optimizer state '") + group +
                            "' has a mismatched moment shape");
    for (auto& x : opt.m1[i].v) x = r.real_value();
    for (auto& x : opt.m2[i].v) x = r.real_value();
  }
  if (!r.done()) throw CheckpointError("checkpoint: trailing bytes in an optimizer section");
}

json config_to_json(const model::ModelConfig& cfg, const train::TrainingConfig& tcfg) {
  json j;
  j["model"] = {{"dim", cfg.dim},
                {"encoder_layers", cfg.encoder_layers},
                {"compressor_layers", cfg.compressor_layers},
                {"lm_layers", cfg.lm_layers},
                {"lambda", cfg.lambda},
                {"lm_dropout", cfg.lm_dropout},
                {"compression_ratio", cfg.compression_ratio},
                {"min_compression_len", cfg.min_compression_len},
                {"samples", cfg.samples},
                {"beam", cfg.beam},
                {"batch_size", cfg.batch_size},
                {"lr", cfg.lr},
                {"share_embeddings", cfg.share_embeddings},
                {"decoder_vocab_cap", cfg.decoder_vocab_cap}};
  j["training"] = {{"epochs", tcfg.epochs},
                   {"seed", tcfg.seed},
                   {"mode", train::train_mode_name(tcfg.mode)},
                   {"clip_norm", tcfg.clip_norm},
                   {"unlabelled_per_labelled", tcfg.unlabelled_per_labelled}};
  return j;
}

void config_from_json(const json& j, model::ModelConfig& cfg, train::TrainingConfig& tcfg) {
  const json& m = j.at("model");
  cfg.dim = m.at("dim");
  cfg.encoder_layers = m.at("encoder_layers");
  cfg.compressor_layers = m.at("compressor_layers");
  cfg.lm_layers = m.at("lm_layers");
  cfg.lambda = m.at("lambda");
  cfg.lm_dropout = m.at("lm_dropout");
  cfg.compression_ratio = m.at("compression_ratio");
  cfg.min_compression_len = m.at("min_compression_len");
  cfg.samples = m.at("samples");
  cfg.beam = m.at("beam");
  cfg.batch_size = m.at("batch_size");
  cfg.lr = m.at("lr");
  cfg.share_embeddings = m.at("share_embeddings");
  cfg.decoder_vocab_cap = m.at("decoder_vocab_cap");
  const json& t = j.at("training");
  tcfg.epochs = t.at("epochs");
  tcfg.seed = t.at("seed");
  tcfg.mode = train::parse_train_mode(t.at("mode"));
  tcfg.clip_norm = t.at("clip_norm");
  tcfg.unlabelled_per_labelled = t.at("unlabelled_per_labelled");
}

// ---- container --------------------------------------------------------------

void write_container(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& sections) {
  std::string out(magic, 4);
  put_u32(out, format_version);
  for (const auto& [name, payload] : sections) {
    put_str(out, name);
    put_u64(out, payload.size());
    out += payload;
  }
  put_u64(out, fnv1a(out, out.size()));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("checkpoint: cannot open '" + path + "' for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError("checkpoint: write to '" + path + "' failed");
}

std::map<std::string, std::string> read_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("checkpoint: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  std::string buf = ss.str();
  if (buf.size() < 16 || std::memcmp(buf.data(), magic, 4) != 0)
    throw CheckpointError("checkpoint: '" + path + "' is not a checkpoint file");
  Reader header{buf, 4, buf.size()};
  uint32_t version = header.u32();
  if (version != format_version)
    throw CheckpointError("checkpoint: format version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(format_version) + ")");
  Reader tail{buf, buf.size() - 8, buf.size()};
  if (tail.u64() != fnv1a(buf, buf.size() - 8))
    throw CheckpointError("checkpoint: checksum mismatch, file is corrupt or truncated");
  Reader r{buf, 8, buf.size() - 8};
  std::map<std::string, std::string> sections;
  while (!r.done()) {
    std::string name = r.str();
    uint64_t len = r.u64();
    r.need(len);
    if (!sections.emplace(name, buf.substr(r.pos, len)).second)
      throw CheckpointError("checkpoint: duplicate section '" + name + "'");
    r.pos += len;
  }
  return sections;
}

Reader section(const std::map<std::string, std::string>& sections, const std::string& name) {
  auto it = sections.find(name);
  if (it == sections.end())
    throw CheckpointError("checkpoint: missing section '" + name + "'");
  return Reader{it->second, 0, it->second.size()};
}

}  // namespace

System build_system(const model::ModelConfig& cfg, const train::TrainingConfig& tcfg,
                    const Vocabulary& enc_vocab, const Vocabulary& cmp_vocab,
                    std::unique_ptr<model::LanguageModelPrior> pretrained_prior) {
  System sys;
  sys.cfg = cfg;
  sys.tcfg = tcfg;
  std::mt19937_64 rng(tcfg.seed);
  sys.q = std::make_unique<model::CompressionNetwork>(cfg, enc_vocab, cmp_vocab, rng);
  sys.fsc = std::make_unique<model::FscModel>(*sys.q, rng);
  if (tcfg.mode != train::TrainMode::fsc_only) {
    sys.recon = std::make_unique<model::ReconstructionNetwork>(
        cfg, enc_vocab.prefix(cfg.decoder_vocab_cap, VocabRole::decoder), rng);
    sys.baselines = std::make_unique<train::BaselineState>(2 * cfg.dim, rng);
    if (!pretrained_prior)
      pretrained_prior = std::make_unique<model::LanguageModelPrior>(
          cfg, cmp_vocab.prefix(cmp_vocab.size(), VocabRole::lm), rng);
  }
  sys.prior = std::move(pretrained_prior);
  sys.trainer = std::make_unique<train::Trainer>(*sys.q, sys.fsc.get(), sys.recon.get(),
                                                 sys.prior.get(), sys.baselines.get(), cfg, tcfg);
  return sys;
}

std::string config_json(const model::ModelConfig& cfg, const train::TrainingConfig& tcfg,
                        int indent) {
  return config_to_json(cfg, tcfg).dump(indent);
}

void save_system(const std::string& path, const System& system) {
  if (!system.q || !system.trainer)
    throw std::invalid_argument("save_system: system is not fully built");
  std::vector<std::pair<std::string, std::string>> sections;
  sections.emplace_back("config", config_to_json(system.cfg, system.tcfg).dump());
  sections.emplace_back("vocab.enc", encode_vocab(system.q->enc_vocab));
  sections.emplace_back("vocab.cmp", encode_vocab(system.q->cmp_vocab));
  sections.emplace_back("params.q", encode_params(system.q->params()));
  if (system.fsc) sections.emplace_back("params.fsc", encode_params(system.fsc->params()));
  if (system.recon) {
    sections.emplace_back("vocab.dec", encode_vocab(system.recon->dec_vocab));
    sections.emplace_back("params.recon", encode_params(system.recon->params()));
  }
  if (system.prior) {
    sections.emplace_back("vocab.lm", encode_vocab(system.prior->vocab));
    sections.emplace_back("params.prior", encode_params(system.prior->params()));
  }
  if (system.baselines)
    sections.emplace_back("params.baseline", encode_params(system.baselines->params()));
  sections.emplace_back("adam.phi", encode_adam(system.trainer->opt_phi));
  sections.emplace_back("adam.theta", encode_adam(system.trainer->opt_theta));
  sections.emplace_back("adam.baseline", encode_adam(system.trainer->opt_baseline));
  std::string ts;
  put_u64(ts, static_cast<uint64_t>(system.trainer->step_count));
  std::ostringstream rs;
  rs << system.trainer->rng;
  put_str(ts, rs.str());
  sections.emplace_back("trainer", ts);
  write_container(path, sections);
}

System load_system(const std::string& path, std::optional<train::TrainMode> mode_override) {
  auto sections = read_container(path);
  System sys;
  {
    Reader r = section(sections, "config");
    config_from_json(json::parse(r.buf), sys.cfg, sys.tcfg);
  }
  if (mode_override) sys.tcfg.mode = *mode_override;
  bool wants_asc = sys.tcfg.mode != train::TrainMode::fsc_only;
  if (!sections.count("params.q"))
    throw CheckpointError("checkpoint: no pointer network stored in '" + path + "'");
  if (sys.tcfg.mode != train::TrainMode::asc_only && !sections.count("params.fsc"))
    throw CheckpointError("checkpoint: no supervised head stored, but mode '" +
                          train::train_mode_name(sys.tcfg.mode) + "' needs one");
  if (wants_asc) {
    const char* missing = !sections.count("params.recon")  ? "reconstruction network"
                          : !sections.count("params.prior") ? "language-model prior"
                          : !sections.count("params.baseline") ? "baselines"
                                                               : nullptr;
    if (missing)
      throw CheckpointError(std::string("checkpoint: no ") + missing + " stored, but mode '" +
                            train::train_mode_name(sys.tcfg.mode) + "' needs one");
  }

  // construction order mirrors build_system so parameter lists line up
  std::mt19937_64 seed_rng(0);
  {
    Reader re = section(sections, "vocab.enc");
    Reader rc = section(sections, "vocab.cmp");
    sys.q = std::make_unique<model::CompressionNetwork>(sys.cfg, decode_vocab(re),
                                                        decode_vocab(rc), seed_rng);
  }
  Reader r = section(sections, "params.q");
  decode_params(r, sys.q->params(), "params.q");
  if (sections.count("params.fsc")) {
    sys.fsc = std::make_unique<model::FscModel>(*sys.q, seed_rng);
    Reader rf = section(sections, "params.fsc");
    decode_params(rf, sys.fsc->params(), "params.fsc");
  }
  if (sections.count("params.recon")) {
    Reader rv = section(sections, "vocab.dec");
    sys.recon =
        std::make_unique<model::ReconstructionNetwork>(sys.cfg, decode_vocab(rv), seed_rng);
    Reader rp = section(sections, "params.recon");
    decode_params(rp, sys.recon->params(), "params.recon");
  }
  if (sections.count("params.prior")) {
    Reader rv = section(sections, "vocab.lm");
    sys.prior =
        std::make_unique<model::LanguageModelPrior>(sys.cfg, decode_vocab(rv), seed_rng);
    Reader rp = section(sections, "params.prior");
    decode_params(rp, sys.prior->params(), "params.prior");
  }
  if (sections.count("params.baseline")) {
    sys.baselines = std::make_unique<train::BaselineState>(2 * sys.cfg.dim, seed_rng);
    Reader rp = section(sections, "params.baseline");
    decode_params(rp, sys.baselines->params(), "params.baseline");
  }

  sys.trainer = std::make_unique<train::Trainer>(*sys.q, sys.fsc.get(), sys.recon.get(),
                                                 sys.prior.get(), sys.baselines.get(), sys.cfg,
                                                 sys.tcfg);
  {
    Reader ra = section(sections, "adam.phi");
    decode_adam(ra, sys.trainer->opt_phi, "adam.phi");
    Reader rt = section(sections, "adam.theta");
    decode_adam(rt, sys.trainer->opt_theta, "adam.theta");
    Reader rb = section(sections, "adam.baseline");
    decode_adam(rb, sys.trainer->opt_baseline, "adam.baseline");
    Reader rs = section(sections, "trainer");
    sys.trainer->step_count = static_cast<long>(rs.u64());
    std::istringstream state(rs.str());
    state >> sys.trainer->rng;
    if (!state) throw CheckpointError("checkpoint: generator state is unreadable");
  }
  return sys;
}

void save_prior(const std::string& path, const model::LanguageModelPrior& prior) {
  std::vector<std::pair<std::string, std::string>> sections;
  sections.emplace_back("config", config_to_json(prior.cfg, train::TrainingConfig{}).dump());
  sections.emplace_back("vocab.lm", encode_vocab(prior.vocab));
  sections.emplace_back("params.prior", encode_params(prior.params()));
  write_container(path, sections);
}

std::unique_ptr<model::LanguageModelPrior> load_prior(const std::string& path) {
  auto sections = read_container(path);
  if (!sections.count("params.prior"))
    throw CheckpointError("checkpoint: no language-model prior stored in '" + path + "'");
  model::ModelConfig cfg;
  train::TrainingConfig tcfg;
  {
    Reader r = section(sections, "config");
    config_from_json(json::parse(r.buf), cfg, tcfg);
  }
  std::mt19937_64 seed_rng(0);
  Reader rv = section(sections, "vocab.lm");
  auto prior = std::make_unique<model::LanguageModelPrior>(cfg, decode_vocab(rv), seed_rng);
  Reader rp = section(sections, "params.prior");
  decode_params(rp, prior->params(), "params.prior");
  return prior;
}

}  // namespace sentcomp::ckpt
