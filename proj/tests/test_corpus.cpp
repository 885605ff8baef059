#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tdan/corpus.hpp"
#include "tdan/embedding.hpp"
#include "test_util.hpp"

using namespace tdan;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) {
    path = (std::filesystem::temp_directory_path() / name).string();
  }
  ~TempFile() { std::remove(path.c_str()); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

}  // namespace

TEST_CASE("tokenize lowercases and separates punctuation") {
  CHECK(tokenize("Best thing ever.") ==
        std::vector<std::string>{"best", "thing", "ever", "."});
  CHECK(tokenize("").empty());
  CHECK(tokenize("  \t\n ").empty());
  CHECK(tokenize("don't stop") == std::vector<std::string>{"don", "'", "t", "stop"});
}

TEST_CASE("frozen tokenization maps unknown words to <unk>") {
  Vocabulary vocab = Vocabulary::build({{"the", "the", "book", "book"}}, 2);
  auto ids = tokenize_frozen("the nephilim", vocab);
  REQUIRE(ids.size() == 2);
  CHECK(ids[0] == vocab.id("the"));
  CHECK(ids[1] == Vocabulary::kUnkId);
}

TEST_CASE("vocabulary round-trips ids and applies the frequency cutoff") {
  Vocabulary vocab =
      Vocabulary::build({{"apple", "apple", "pear", "pear", "once"}}, 2);
  CHECK(vocab.contains("apple"));
  CHECK(vocab.contains("pear"));
  CHECK_FALSE(vocab.contains("once"));
  for (int id = 0; id < vocab.size(); ++id) CHECK(vocab.id(vocab.word(id)) == id);
}

TEST_CASE("load_corpus_jsonl parses and counts documents") {
  TempFile f("tdan_corpus_ok.jsonl");
  write_file(f.path,
             R"({"text":"good book","domain":"source","label":"pos"})"
             "\n"
             R"({"text":"bad dvd","domain":"source","label":"neg"})"
             "\n"
             R"({"text":"a kitchen thing","domain":"target"})"
             "\n");
  auto docs = load_corpus_jsonl(f.path);
  REQUIRE(docs.size() == 3);
  auto counts = count_corpus(docs);
  CHECK(counts.total == 3);
  CHECK(counts.source == 2);
  CHECK(counts.target == 1);
  CHECK(counts.labeled == 2);
  CHECK(counts.positive == 1);
  CHECK(counts.negative == 1);
}

TEST_CASE("load_corpus_jsonl rejects bad labels and malformed lines") {
  TempFile f("tdan_corpus_bad.jsonl");
  SUBCASE("unknown label names the line") {
    write_file(f.path,
               R"({"text":"ok","domain":"source","label":"pos"})"
               "\n"
               R"({"text":"meh","domain":"source","label":"5stars"})"
               "\n");
    CHECK_THROWS_WITH_AS(load_corpus_jsonl(f.path),
                         doctest::Contains("line 2"), Error);
  }
  SUBCASE("malformed json names the line") {
    write_file(f.path, "{not json}\n");
    CHECK_THROWS_WITH_AS(load_corpus_jsonl(f.path), doctest::Contains("line 1"),
                         Error);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_corpus_jsonl("/nonexistent"), Error); }
}

TEST_CASE("balanced corpus counts match the labels") {
  TempFile f("tdan_corpus_balanced.jsonl");
  std::string content;
  for (int i = 0; i < 60; ++i) {
    content += R"({"text":"review )" + std::to_string(i) + R"(","domain":"source","label":")" +
               (i % 2 == 0 ? "pos" : "neg") + "\"}\n";
  }
  write_file(f.path, content);
  auto counts = count_corpus(load_corpus_jsonl(f.path));
  CHECK(counts.positive == 30);
  CHECK(counts.negative == 30);
}

namespace {

DomainPairDataset target_only_dataset(int n_pos, int n_neg) {
  std::vector<RawDocument> raw;
  for (int i = 0; i < n_pos + n_neg; ++i) {
    RawDocument d;
    d.text = "word" + std::to_string(i % 7);
    d.domain = Domain::kTarget;
    d.label = i < n_pos ? Label::kPositive : Label::kNegative;
    raw.push_back(d);
  }
  // a couple of source docs so the dataset is a valid pair
  for (int i = 0; i < 4; ++i) {
    RawDocument d;
    d.text = "src";
    d.domain = Domain::kSource;
    d.label = i % 2 == 0 ? Label::kPositive : Label::kNegative;
    raw.push_back(d);
  }
  return assemble_dataset(raw, 1);
}

}  // namespace

TEST_CASE("split_dataset produces a balanced dev set and the remainder as test") {
  DomainPairDataset ds = target_only_dataset(3000, 3000);
  split_dataset(ds, 1000, 99);
  CHECK(ds.dev.size() == 1000);
  CHECK(ds.test.size() == 5000);

  int dev_pos = 0;
  for (int id : ds.dev) dev_pos += ds.docs[id].label == Label::kPositive;
  CHECK(dev_pos == 500);

  // disjoint and target-only
  std::set<int> dev_set(ds.dev.begin(), ds.dev.end());
  for (int id : ds.test) {
    CHECK_FALSE(dev_set.count(id));
    CHECK(ds.docs[id].domain == Domain::kTarget);
  }
}

TEST_CASE("split_dataset is deterministic under the seed") {
  DomainPairDataset a = target_only_dataset(300, 300);
  DomainPairDataset b = target_only_dataset(300, 300);
  split_dataset(a, 100, 7);
  split_dataset(b, 100, 7);
  CHECK(a.dev == b.dev);
  CHECK(a.test == b.test);

  DomainPairDataset c = target_only_dataset(300, 300);
  split_dataset(c, 100, 8);
  CHECK(c.dev != a.dev);
}

TEST_CASE("split_dataset errors when a class runs short") {
  DomainPairDataset ds = target_only_dataset(400, 600);
  CHECK_THROWS_AS(split_dataset(ds, 1000, 1), Error);
}

TEST_CASE("synthetic generation plants markers consistently") {
  SyntheticSpec spec = testutil::pipeline_spec(500);
  auto docs = generate_synthetic_docs(spec, 42);
  REQUIRE(docs.size() == 1000);

  int n_source = 0, n_target = 0;
  for (const auto& doc : docs) {
    (doc.domain == Domain::kSource ? n_source : n_target)++;
    const auto tokens = tokenize(doc.text);
    const auto& own = *doc.label == Label::kPositive ? spec.pos_markers
                                                     : spec.neg_markers;
    const auto& opposite = *doc.label == Label::kPositive ? spec.neg_markers
                                                          : spec.pos_markers;
    bool has_own = false;
    for (const auto& t : tokens) {
      if (std::find(own.begin(), own.end(), t) != own.end()) has_own = true;
      CHECK(std::find(opposite.begin(), opposite.end(), t) == opposite.end());
    }
    CHECK(has_own);

    // domain decided by planted background words
    const auto& own_bg = doc.domain == Domain::kSource ? spec.source_background
                                                       : spec.target_background;
    const auto& other_bg = doc.domain == Domain::kSource ? spec.target_background
                                                         : spec.source_background;
    bool has_bg = false;
    for (const auto& t : tokens) {
      if (std::find(own_bg.begin(), own_bg.end(), t) != own_bg.end()) has_bg = true;
      CHECK(std::find(other_bg.begin(), other_bg.end(), t) == other_bg.end());
    }
    CHECK(has_bg);
  }
  CHECK(n_source == 500);
  CHECK(n_target == 500);
}

TEST_CASE("synthetic generation is byte-identical under the seed") {
  SyntheticSpec spec = testutil::pipeline_spec(50);
  auto a = generate_synthetic_docs(spec, 7);
  auto b = generate_synthetic_docs(spec, 7);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].text == b[i].text);
}

TEST_CASE("synthetic generation rejects empty marker sets") {
  SyntheticSpec spec = testutil::pipeline_spec(10);
  spec.pos_markers.clear();
  CHECK_THROWS_AS(generate_synthetic_docs(spec, 1), Error);
}

TEST_CASE("embedding loader copies covered rows and reports the rest") {
  Vocabulary vocab = Vocabulary::build({{"good", "good", "rare", "rare"}}, 2);
  TempFile f("tdan_embeddings.txt");
  std::string line = "good";
  for (int i = 0; i < 4; ++i) line += " " + std::to_string(0.25 * (i + 1));
  write_file(f.path, line + "\n");

  EmbeddingTable table = load_embeddings(f.path, vocab, 4, 3);
  const int good = vocab.id("good");
  CHECK(table.covered[good]);
  CHECK(table.row(good)[0] == doctest::Approx(0.25));
  CHECK(table.row(good)[3] == doctest::Approx(1.0));

  const int rare = vocab.id("rare");
  CHECK_FALSE(table.covered[rare]);
  double norm = 0.0;
  for (int c = 0; c < 4; ++c) norm += std::abs(table.row(rare)[c]);
  CHECK(norm > 0.0);  // xavier fallback, not zeros

  for (int c = 0; c < 4; ++c) CHECK(table.row(Vocabulary::kPadId)[c] == 0.0);
}

TEST_CASE("embedding loader rejects a dimension mismatch") {
  Vocabulary vocab = Vocabulary::build({{"good", "good"}}, 1);
  TempFile f("tdan_embeddings_bad.txt");
  write_file(f.path, "good 0.1 0.2\n");
  CHECK_THROWS_AS(load_embeddings(f.path, vocab, 300, 3), Error);
}

TEST_CASE("dataset save/load round-trip") {
  SyntheticSpec spec = testutil::pipeline_spec(30);
  DomainPairDataset ds = generate_synthetic_pair(spec, 11, 10);
  TempFile f("tdan_dataset.json");
  save_dataset(f.path, ds, "S-T");
  DomainPairDataset loaded = load_dataset(f.path);
  CHECK(loaded.docs.size() == ds.docs.size());
  CHECK(loaded.vocab.words() == ds.vocab.words());
  CHECK(loaded.dev == ds.dev);
  CHECK(loaded.test == ds.test);
  CHECK(loaded.source_labeled == ds.source_labeled);
  for (std::size_t i = 0; i < ds.docs.size(); ++i)
    CHECK(loaded.docs[i].tokens == ds.docs[i].tokens);
}
