#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tdan/common.hpp"

namespace tdan {

// A tokenized review. `tokens` index into the Vocabulary that produced them.
// Label is absent for unlabeled source data and for target data used in
// adversarial training.
struct Document {
  int id = -1;
  std::string text;
  std::vector<int> tokens;
  std::optional<Label> label;
  Domain domain = Domain::kSource;
};

// Immutable after build(); ids 0..2 are reserved.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kSpecificTokenId = 2;
  static constexpr const char* kPadWord = "<pad>";
  static constexpr const char* kUnkWord = "<unk>";
  static constexpr const char* kSpecificTokenWord = "<specific_token>";

  Vocabulary();

  // Counts word frequencies over the tokenized texts and keeps words with
  // frequency >= min_freq. Assignment order is (frequency desc, word asc)
  // so builds are deterministic.
  static Vocabulary build(const std::vector<std::vector<std::string>>& token_lists,
                          int min_freq);

  static Vocabulary from_words(const std::vector<std::string>& non_reserved_words);

  // Frozen lookup: unknown words map to <unk>.
  int id(const std::string& word) const;
  bool contains(const std::string& word) const;
  const std::string& word(int id) const;
  int size() const { return static_cast<int>(id_to_word_.size()); }

  const std::vector<std::string>& words() const { return id_to_word_; }

  // Fingerprint over the id-ordered word list.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> id_to_word_;
  std::unordered_map<std::string, int> word_to_id_;
};

// Lowercases and splits on whitespace; punctuation characters become
// single-character tokens. Empty text yields an empty sequence.
std::vector<std::string> tokenize(std::string_view text);

// tokenize + frozen vocab lookup (unknown -> <unk>).
std::vector<int> tokenize_frozen(std::string_view text, const Vocabulary& vocab);

// One source/target pair assembled for a cross-domain task. Documents are
// stored once; the index vectors below refer into `docs` by id.
struct DomainPairDataset {
  Vocabulary vocab;
  std::vector<Document> docs;  // docs[i].id == i

  std::vector<int> source_labeled;
  std::vector<int> source_unlabeled;  // accepted but unused by training
  std::vector<int> target_unlabeled;  // every target doc, labels ignored
  std::vector<int> dev;               // target ids, label-balanced
  std::vector<int> test;              // target ids, label-balanced

  int n_source() const {
    return static_cast<int>(source_labeled.size() + source_unlabeled.size());
  }
  int n_target() const { return static_cast<int>(target_unlabeled.size()); }
};

// Raw (untokenized) documents as read from a JSONL corpus file.
struct RawDocument {
  std::string text;
  Domain domain = Domain::kSource;
  std::optional<Label> label;
};

struct CorpusCounts {
  int total = 0;
  int source = 0;
  int target = 0;
  int labeled = 0;
  int positive = 0;
  int negative = 0;
};

// Reads one JSON object per line with fields text, domain, optional label.
// Malformed lines and unknown label strings raise Error naming the line.
std::vector<RawDocument> load_corpus_jsonl(const std::string& path);

CorpusCounts count_corpus(const std::vector<RawDocument>& docs);

// Tokenizes raw documents, builds the vocabulary over all of them and
// assembles the dataset (dev/test split not yet applied).
DomainPairDataset assemble_dataset(const std::vector<RawDocument>& raw,
                                   int vocab_min_freq);

// Draws a label-balanced dev set of dev_size target documents; the remainder
// becomes the test set (trimmed to class balance). Deterministic under seed.
// Fills dataset.dev / dataset.test in place.
void split_dataset(DomainPairDataset& dataset, int dev_size, std::uint64_t seed);

// Synthetic corpus generator used as the test fixture. Labels are decided by
// planted sentiment markers and domains by planted background words.
struct SyntheticSpec {
  int docs_per_domain = 500;
  int len_min = 8;
  int len_max = 20;
  std::vector<std::string> pos_markers;
  std::vector<std::string> neg_markers;
  std::vector<std::string> source_background;
  std::vector<std::string> target_background;
  std::vector<std::string> shared_words;
  int markers_min = 1;
  int markers_max = 3;
  int background_min = 2;
  int background_max = 5;
};

// Raw synthetic documents for both domains, in generation order.
std::vector<RawDocument> generate_synthetic_docs(const SyntheticSpec& spec,
                                                 std::uint64_t seed);

// Full pipeline fixture: generate, assemble (min_freq 1) and split.
DomainPairDataset generate_synthetic_pair(const SyntheticSpec& spec, std::uint64_t seed,
                                          int dev_size);

// JSONL writer for raw documents (one object per line, keys text/domain/label).
void write_corpus_jsonl(const std::string& path, const std::vector<RawDocument>& docs);

// Dataset artifact (versioned JSON).
void save_dataset(const std::string& path, const DomainPairDataset& dataset,
                  const std::string& task);
DomainPairDataset load_dataset(const std::string& path);

}  // namespace tdan
