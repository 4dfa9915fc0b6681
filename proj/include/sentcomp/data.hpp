#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace sentcomp::data {

// Bad input files, malformed lines, misaligned pairs. The CLI maps this to
// exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class VocabRole { encoder, compressor, decoder, lm };

struct Vocabulary {
  static constexpr int pad_id = 0;
  static constexpr int bos_id = 1;
  static constexpr int eos_id = 2;
  static constexpr int unk_id = 3;

  VocabRole role = VocabRole::encoder;
  std::vector<std::string> index_to_token;
  std::unordered_map<std::string, int> token_to_index;

  int size() const { return static_cast<int>(index_to_token.size()); }
  int id(const std::string& token) const {
    auto it = token_to_index.find(token);
    return it == token_to_index.end() ? unk_id : it->second;
  }
  const std::string& token(int id) const;
  std::vector<int> ids(const std::vector<std::string>& tokens) const;

  // Top-frequency prefix view; keeps reserved symbols. The decoder vocabulary
  // is the encoder vocabulary truncated this way.
  Vocabulary prefix(int max_size, VocabRole new_role) const;
};

// Ranks by frequency, ties broken lexicographically, truncates to max_size
// counting the four reserved symbols. Tokens below min_count are dropped.
Vocabulary build_vocab(const std::vector<std::string>& tokens, int max_size, int min_count,
                       VocabRole role);

struct SentencePair {
  std::vector<std::string> source;
  std::vector<std::string> compression;
};

enum class Split { train, validation, test };

struct Corpus {
  std::vector<SentencePair> labelled;
  std::vector<std::vector<std::string>> unlabelled;
  Split split = Split::train;

  // Every surface token across both pools, for vocabulary building.
  std::vector<std::string> source_tokens() const;
  std::vector<std::string> compression_tokens() const;
};

enum class CorpusFormat { paired_tsv, parallel_files, unlabelled_lines };

// Digits become '#', e.g. "4.2" -> "#.#".
std::string mask_digits(std::string token);

// Whitespace split of a pre-tokenized line, with optional digit masking.
std::vector<std::string> tokenize(const std::string& line, bool mask);

// paired_tsv and unlabelled_lines take one path; parallel_files takes the
// source path and the compression path. Malformed input reports the file and
// 1-based line number.
Corpus load_corpus(const std::vector<std::string>& paths, CorpusFormat format,
                   bool mask = true, Split split = Split::train);

void save_corpus(const Corpus& corpus, const std::string& labelled_path,
                 const std::string& unlabelled_path);

struct SyntheticData {
  Corpus train;
  Corpus test;
};

// Each source interleaves 2-4 keywords (order kept) with 3-8 noise tokens;
// the gold compression is exactly the keyword subsequence. Vocabularies must
// not overlap. Deterministic for a fixed seed.
SyntheticData generate_synthetic_task(int n_train, int n_test,
                                      const std::vector<std::string>& keyword_vocab,
                                      const std::vector<std::string>& noise_vocab,
                                      unsigned long long seed);

// Letter-only token factories for the synthetic task (digit masking must not
// be able to collapse them).
std::vector<std::string> synthetic_keyword_lexicon(int n);
std::vector<std::string> synthetic_noise_lexicon(int n);

}  // namespace sentcomp::data
