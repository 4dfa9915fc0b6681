#include "sentcomp/data.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace sentcomp::data {

namespace {

const char* kReserved[4] = {"<pad>", "<s>", "</s>", "<unk>"};

bool is_reserved(const std::string& t) {
  for (const char* r : kReserved)
    if (t == r) return true;
  return false;
}

}  // namespace

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("Vocabulary::token: id " + std::to_string(id) +
                            " out of range for size " + std::to_string(size()));
  return index_to_token[id];
}

std::vector<int> Vocabulary::ids(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

Vocabulary Vocabulary::prefix(int max_size, VocabRole new_role) const {
  if (max_size <= 4) throw std::invalid_argument("Vocabulary::prefix: max_size must exceed 4");
  Vocabulary out;
  out.role = new_role;
  int n = std::min(max_size, size());
  for (int i = 0; i < n; ++i) {
    out.index_to_token.push_back(index_to_token[i]);
    out.token_to_index[index_to_token[i]] = i;
  }
  return out;
}

Vocabulary build_vocab(const std::vector<std::string>& tokens, int max_size, int min_count,
                       VocabRole role) {
  if (max_size <= 4) throw std::invalid_argument("build_vocab: max_size must exceed 4");
  if (tokens.empty()) throw DataError("build_vocab: empty token stream");
  std::map<std::string, long> counts;  // ordered map gives the lexicographic tie-break for free
  for (const auto& t : tokens)
    if (!is_reserved(t)) ++counts[t];
  std::vector<std::pair<std::string, long>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  v.role = role;
  for (const char* r : kReserved) {
    v.token_to_index[r] = v.size();
    v.index_to_token.push_back(r);
  }
  for (const auto& [tok, cnt] : ranked) {
    if (v.size() >= max_size) break;
    if (cnt < min_count) continue;
    v.token_to_index[tok] = v.size();
    v.index_to_token.push_back(tok);
  }
  return v;
}

std::vector<std::string> Corpus::source_tokens() const {
  std::vector<std::string> out;
  for (const auto& p : labelled)
    for (const auto& t : p.source) out.push_back(t);
  for (const auto& s : unlabelled)
    for (const auto& t : s) out.push_back(t);
  return out;
}

std::vector<std::string> Corpus::compression_tokens() const {
  std::vector<std::string> out;
  for (const auto& p : labelled)
    for (const auto& t : p.compression) out.push_back(t);
  return out;
}

std::string mask_digits(std::string token) {
  for (auto& ch : token)
    if (ch >= '0' && ch <= '9') ch = '#';
  return token;
}

std::vector<std::string> tokenize(const std::string& line, bool mask) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(mask ? mask_digits(std::move(tok)) : std::move(tok));
  return out;
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

[[noreturn]] void bad_line(const std::string& path, size_t lineno, const std::string& why) {
  throw DataError(path + ":" + std::to_string(lineno) + ": " + why);
}

}  // namespace

Corpus load_corpus(const std::vector<std::string>& paths, CorpusFormat format, bool mask,
                   Split split) {
  Corpus corpus;
  corpus.split = split;
  switch (format) {
    case CorpusFormat::paired_tsv: {
      if (paths.size() != 1) throw DataError("paired-tsv takes exactly one path");
      auto lines = read_lines(paths[0]);
      for (size_t i = 0; i < lines.size(); ++i) {
        size_t tab = lines[i].find('\t');
        if (tab == std::string::npos) bad_line(paths[0], i + 1, "missing TAB separator");
        if (lines[i].find('\t', tab + 1) != std::string::npos)
          bad_line(paths[0], i + 1, "more than one TAB separator");
        SentencePair p;
        p.source = tokenize(lines[i].substr(0, tab), mask);
        p.compression = tokenize(lines[i].substr(tab + 1), mask);
        if (p.source.empty()) bad_line(paths[0], i + 1, "empty source field");
        if (p.compression.empty()) bad_line(paths[0], i + 1, "empty compression field");
        corpus.labelled.push_back(std::move(p));
      }
      break;
    }
    case CorpusFormat::parallel_files: {
      if (paths.size() != 2)
        throw DataError("parallel-files takes the source path and the compression path");
      auto src = read_lines(paths[0]);
      auto cmp = read_lines(paths[1]);
      if (src.size() != cmp.size())
        bad_line(src.size() < cmp.size() ? paths[0] : paths[1],
                 std::min(src.size(), cmp.size()) + 1,
                 "parallel files disagree on line count (" + std::to_string(src.size()) + " vs " +
                     std::to_string(cmp.size()) + ")");
      for (size_t i = 0; i < src.size(); ++i) {
        SentencePair p;
        p.source = tokenize(src[i], mask);
        p.compression = tokenize(cmp[i], mask);
        if (p.source.empty()) bad_line(paths[0], i + 1, "empty source line");
        if (p.compression.empty()) bad_line(paths[1], i + 1, "empty compression line");
        corpus.labelled.push_back(std::move(p));
      }
      break;
    }
    case CorpusFormat::unlabelled_lines: {
      if (paths.size() != 1) throw DataError("unlabelled-lines takes exactly one path");
      auto lines = read_lines(paths[0]);
      for (size_t i = 0; i < lines.size(); ++i) {
        auto toks = tokenize(lines[i], mask);
        if (toks.empty()) bad_line(paths[0], i + 1, "empty line");
        corpus.unlabelled.push_back(std::move(toks));
      }
      break;
    }
  }
  return corpus;
}

namespace {

std::string join(const std::vector<std::string>& toks) {
  std::string out;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& labelled_path,
                 const std::string& unlabelled_path) {
  if (!corpus.labelled.empty()) {
    std::ofstream out(labelled_path);
    if (!out) throw DataError("cannot write " + labelled_path);
    for (const auto& p : corpus.labelled)
      out << join(p.source) << '\t' << join(p.compression) << '\n';
  }
  if (!corpus.unlabelled.empty()) {
    std::ofstream out(unlabelled_path);
    if (!out) throw DataError("cannot write " + unlabelled_path);
    for (const auto& s : corpus.unlabelled) out << join(s) << '\n';
  }
}

namespace {

Corpus synth_split(int n, const std::vector<std::string>& kw, const std::vector<std::string>& noise,
                   std::mt19937_64& rng, Split split) {
  Corpus corpus;
  corpus.split = split;
  std::uniform_int_distribution<int> n_kw(2, 4);
  std::uniform_int_distribution<int> n_noise(3, 8);
  std::uniform_int_distribution<size_t> pick_kw(0, kw.size() - 1);
  std::uniform_int_distribution<size_t> pick_noise(0, noise.size() - 1);
  for (int i = 0; i < n; ++i) {
    int k = n_kw(rng);
    int m = n_noise(rng);
    SentencePair p;
    for (int j = 0; j < k; ++j) p.compression.push_back(kw[pick_kw(rng)]);
    // Choose which of the k+m slots hold keywords; order inside each group
    // is preserved.
    std::vector<int> slots(k + m, 0);
    for (int j = 0; j < k; ++j) slots[j] = 1;
    std::shuffle(slots.begin(), slots.end(), rng);
    size_t next_kw = 0;
    for (int s : slots)
      p.source.push_back(s ? p.compression[next_kw++] : noise[pick_noise(rng)]);
    corpus.labelled.push_back(std::move(p));
  }
  return corpus;
}

std::string letters(int value, int width) {
  std::string out(width, 'a');
  for (int i = width - 1; i >= 0; --i) {
    out[i] = static_cast<char>('a' + value % 26);
    value /= 26;
  }
  return out;
}

}  // namespace

SyntheticData generate_synthetic_task(int n_train, int n_test,
                                      const std::vector<std::string>& keyword_vocab,
                                      const std::vector<std::string>& noise_vocab,
                                      unsigned long long seed) {
  if (keyword_vocab.empty() || noise_vocab.empty())
    throw std::invalid_argument("generate_synthetic_task: empty lexicon");
  for (const auto& k : keyword_vocab)
    if (std::find(noise_vocab.begin(), noise_vocab.end(), k) != noise_vocab.end())
      throw std::invalid_argument("generate_synthetic_task: lexicons overlap on '" + k + "'");
  std::mt19937_64 rng(seed);
  SyntheticData data;
  data.train = synth_split(n_train, keyword_vocab, noise_vocab, rng, Split::train);
  data.test = synth_split(n_test, keyword_vocab, noise_vocab, rng, Split::test);
  return data;
}

std::vector<std::string> synthetic_keyword_lexicon(int n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back("k" + letters(i, 3));
  return out;
}

std::vector<std::string> synthetic_noise_lexicon(int n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back("x" + letters(i, 2));
  return out;
}

}  // namespace sentcomp::data
