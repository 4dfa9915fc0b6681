#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "sentcomp/data.hpp"

using namespace sentcomp::data;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("/tmp/sentcomp_test_" + name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("vocab ranks by frequency") {
  Vocabulary v = build_vocab({"a", "a", "b"}, 6, 1, VocabRole::encoder);
  CHECK(v.id("a") == 4);
  CHECK(v.id("b") == 5);
}

TEST_CASE("vocab breaks frequency ties lexicographically") {
  Vocabulary v = build_vocab({"b", "a"}, 6, 1, VocabRole::encoder);
  CHECK(v.id("a") == 4);
  CHECK(v.id("b") == 5);
}

TEST_CASE("reserved symbols sit at fixed indices") {
  Vocabulary v = build_vocab({"word"}, 10, 1, VocabRole::encoder);
  CHECK(v.id("<pad>") == 0);
  CHECK(v.id("<s>") == 1);
  CHECK(v.id("</s>") == 2);
  CHECK(v.id("<unk>") == 3);
  CHECK(Vocabulary::pad_id == 0);
  CHECK(Vocabulary::eos_id == 2);
}

TEST_CASE("vocab truncates to max_size counting reserved symbols") {
  Vocabulary v = build_vocab({"a", "a", "a", "b", "b", "c"}, 6, 1, VocabRole::encoder);
  CHECK(v.size() == 6);
  CHECK(v.id("a") == 4);
  CHECK(v.id("b") == 5);
  CHECK(v.id("c") == Vocabulary::unk_id);
}

TEST_CASE("vocab respects min_count") {
  Vocabulary v = build_vocab({"a", "a", "b"}, 10, 2, VocabRole::encoder);
  CHECK(v.id("a") == 4);
  CHECK(v.id("b") == Vocabulary::unk_id);
  CHECK(v.size() == 5);
}

TEST_CASE("vocab rejects empty stream and tiny max_size") {
  CHECK_THROWS_AS(build_vocab({}, 10, 1, VocabRole::encoder), DataError);
  CHECK_THROWS_AS(build_vocab({"a"}, 4, 1, VocabRole::encoder), std::invalid_argument);
}

TEST_CASE("vocab is deterministic") {
  std::vector<std::string> stream{"z", "q", "z", "m", "q", "z", "m", "m", "k"};
  Vocabulary a = build_vocab(stream, 8, 1, VocabRole::encoder);
  Vocabulary b = build_vocab(stream, 8, 1, VocabRole::encoder);
  CHECK(a.index_to_token == b.index_to_token);
}

TEST_CASE("decoder vocab is the top-frequency prefix of the encoder vocab") {
  std::vector<std::string> stream;
  for (int i = 0; i < 30; ++i) stream.push_back("w" + std::to_string(i % 10));
  for (int i = 0; i < 3; ++i) stream.push_back("rare" + std::to_string(i));
  Vocabulary enc = build_vocab(stream, 100, 1, VocabRole::encoder);
  Vocabulary dec = enc.prefix(8, VocabRole::decoder);
  CHECK(dec.size() == 8);
  for (int i = 0; i < dec.size(); ++i) CHECK(dec.token(i) == enc.token(i));
  CHECK(dec.id(enc.token(9)) == Vocabulary::unk_id);
}

TEST_CASE("digit masking") {
  CHECK(mask_digits("4.2") == "#.#");
  CHECK(tokenize("rose 4.2 percent", true) ==
        std::vector<std::string>{"rose", "#.#", "percent"});
  CHECK(tokenize("rose 4.2 percent", false) ==
        std::vector<std::string>{"rose", "4.2", "percent"});
}

TEST_CASE("paired tsv loads one pair per line") {
  TempFile f("pairs.tsv", "a b c\ta c\nd e\td\nf g h i\tf i\n");
  Corpus c = load_corpus({f.path}, CorpusFormat::paired_tsv);
  CHECK(c.labelled.size() == 3);
  CHECK(c.labelled[1].source == std::vector<std::string>{"d", "e"});
  CHECK(c.labelled[1].compression == std::vector<std::string>{"d"});
}

TEST_CASE("paired tsv rejects an empty compression field with the line number") {
  TempFile f("bad.tsv", "a b\ta\nc d\t\n");
  try {
    load_corpus({f.path}, CorpusFormat::paired_tsv);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find(":2:") != std::string::npos);
    CHECK(msg.find("compression") != std::string::npos);
  }
}

TEST_CASE("paired tsv rejects a line without a tab") {
  TempFile f("notab.tsv", "a b\ta\nno tab here\n");
  try {
    load_corpus({f.path}, CorpusFormat::paired_tsv);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
}

TEST_CASE("parallel files must align") {
  TempFile src("par.src", "a b\nc d\ne f\n");
  TempFile cmp("par.cmp", "a\nc\n");
  try {
    load_corpus({src.path, cmp.path}, CorpusFormat::parallel_files);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find(":3:") != std::string::npos);
    CHECK(msg.find("3 vs 2") != std::string::npos);
  }
}

TEST_CASE("unlabelled lines load and digit masking applies") {
  TempFile f("unlab.txt", "stocks rose 4.2 percent\nthe end\n");
  Corpus c = load_corpus({f.path}, CorpusFormat::unlabelled_lines);
  CHECK(c.unlabelled.size() == 2);
  CHECK(c.unlabelled[0] == std::vector<std::string>{"stocks", "rose", "#.#", "percent"});
}

TEST_CASE("corpus round-trips through save and load") {
  SyntheticData data = generate_synthetic_task(20, 5, synthetic_keyword_lexicon(50),
                                               synthetic_noise_lexicon(10), 99);
  save_corpus(data.train, "/tmp/sentcomp_test_rt.tsv", "/tmp/sentcomp_test_rt.txt");
  Corpus loaded = load_corpus({"/tmp/sentcomp_test_rt.tsv"}, CorpusFormat::paired_tsv);
  REQUIRE(loaded.labelled.size() == data.train.labelled.size());
  for (size_t i = 0; i < loaded.labelled.size(); ++i) {
    CHECK(loaded.labelled[i].source == data.train.labelled[i].source);
    CHECK(loaded.labelled[i].compression == data.train.labelled[i].compression);
  }
  std::remove("/tmp/sentcomp_test_rt.tsv");
}

TEST_CASE("synthetic gold compressions are extractive subsequences") {
  SyntheticData data = generate_synthetic_task(100, 10, synthetic_keyword_lexicon(40),
                                               synthetic_noise_lexicon(8), 7);
  for (const auto& p : data.train.labelled) {
    CHECK(p.compression.size() >= 2);
    CHECK(p.compression.size() <= 4);
    CHECK(p.source.size() >= p.compression.size() + 3);
    size_t j = 0;
    for (const auto& tok : p.source)
      if (j < p.compression.size() && tok == p.compression[j]) ++j;
    CHECK(j == p.compression.size());
  }
}

TEST_CASE("synthetic generation is deterministic by seed") {
  auto a = generate_synthetic_task(10, 2, synthetic_keyword_lexicon(20),
                                   synthetic_noise_lexicon(5), 42);
  auto b = generate_synthetic_task(10, 2, synthetic_keyword_lexicon(20),
                                   synthetic_noise_lexicon(5), 42);
  REQUIRE(a.train.labelled.size() == b.train.labelled.size());
  for (size_t i = 0; i < a.train.labelled.size(); ++i) {
    CHECK(a.train.labelled[i].source == b.train.labelled[i].source);
    CHECK(a.train.labelled[i].compression == b.train.labelled[i].compression);
  }
}

TEST_CASE("synthetic generation rejects overlapping lexicons") {
  CHECK_THROWS_AS(generate_synthetic_task(1, 1, {"same"}, {"same"}, 1), std::invalid_argument);
}

TEST_CASE("synthetic lexicons are digit-free and disjoint") {
  auto kw = synthetic_keyword_lexicon(300);
  auto nz = synthetic_noise_lexicon(10);
  for (const auto& t : kw) CHECK(t == mask_digits(t));
  for (const auto& t : nz) {
    CHECK(t == mask_digits(t));
    CHECK(std::find(kw.begin(), kw.end(), t) == kw.end());
  }
}
