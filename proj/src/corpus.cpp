#include "tdan/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <random>

#include <json.hpp>

namespace tdan {

using nlohmann::json;

Vocabulary::Vocabulary() {
  id_to_word_ = {kPadWord, kUnkWord, kSpecificTokenWord};
  for (int i = 0; i < static_cast<int>(id_to_word_.size()); ++i)
    word_to_id_[id_to_word_[i]] = i;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& token_lists,
                             int min_freq) {
  std::map<std::string, int> freq;
  for (const auto& tokens : token_lists)
    for (const auto& t : tokens) ++freq[t];

  std::vector<std::pair<std::string, int>> kept;
  for (const auto& [word, n] : freq)
    if (n >= min_freq) kept.emplace_back(word, n);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  for (const auto& [word, n] : kept) {
    (void)n;
    v.word_to_id_[word] = static_cast<int>(v.id_to_word_.size());
    v.id_to_word_.push_back(word);
  }
  return v;
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& non_reserved_words) {
  Vocabulary v;
  for (const auto& w : non_reserved_words) {
    if (v.word_to_id_.count(w))
      throw Error("vocabulary: duplicate word '" + w + "'");
    v.word_to_id_[w] = static_cast<int>(v.id_to_word_.size());
    v.id_to_word_.push_back(w);
  }
  return v;
}

int Vocabulary::id(const std::string& word) const {
  auto it = word_to_id_.find(word);
  return it == word_to_id_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(const std::string& word) const {
  return word_to_id_.count(word) > 0;
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || id >= size())
    throw Error("vocabulary: id " + std::to_string(id) + " out of range");
  return id_to_word_[id];
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& w : id_to_word_) {
    h = fnv1a(w, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
  }
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.push_back(current);
      current.clear();
    }
  };
  for (unsigned char c : text) {
    if (c < 0x80 && std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c))
                                 : static_cast<char>(c));
    }
  }
  flush();
  return out;
}

std::vector<int> tokenize_frozen(std::string_view text, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (const auto& w : tokenize(text)) ids.push_back(vocab.id(w));
  return ids;
}

namespace {

Label parse_label(const std::string& s, int line_no) {
  if (s == "pos" || s == "positive") return Label::kPositive;
  if (s == "neg" || s == "negative") return Label::kNegative;
  throw Error("corpus line " + std::to_string(line_no) + ": unknown label '" + s + "'");
}

Domain parse_domain(const std::string& s, int line_no) {
  if (s == "source") return Domain::kSource;
  if (s == "target") return Domain::kTarget;
  throw Error("corpus line " + std::to_string(line_no) + ": unknown domain '" + s + "'");
}

}  // namespace

std::vector<RawDocument> load_corpus_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus file: " + path);
  std::vector<RawDocument> docs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("text") ||
        !j.contains("domain") || !j["text"].is_string() || !j["domain"].is_string()) {
      throw Error("corpus line " + std::to_string(line_no) + ": malformed entry");
    }
    RawDocument doc;
    doc.text = j["text"].get<std::string>();
    doc.domain = parse_domain(j["domain"].get<std::string>(), line_no);
    if (j.contains("label") && !j["label"].is_null()) {
      if (!j["label"].is_string())
        throw Error("corpus line " + std::to_string(line_no) + ": malformed label");
      doc.label = parse_label(j["label"].get<std::string>(), line_no);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

CorpusCounts count_corpus(const std::vector<RawDocument>& docs) {
  CorpusCounts c;
  c.total = static_cast<int>(docs.size());
  for (const auto& d : docs) {
    if (d.domain == Domain::kSource)
      ++c.source;
    else
      ++c.target;
    if (d.label) {
      ++c.labeled;
      if (*d.label == Label::kPositive)
        ++c.positive;
      else
        ++c.negative;
    }
  }
  return c;
}

DomainPairDataset assemble_dataset(const std::vector<RawDocument>& raw,
                                   int vocab_min_freq) {
  std::vector<std::vector<std::string>> token_lists;
  token_lists.reserve(raw.size());
  for (const auto& d : raw) token_lists.push_back(tokenize(d.text));

  DomainPairDataset ds;
  ds.vocab = Vocabulary::build(token_lists, vocab_min_freq);
  ds.docs.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Document doc;
    doc.id = static_cast<int>(i);
    doc.text = raw[i].text;
    doc.domain = raw[i].domain;
    doc.label = raw[i].label;
    doc.tokens.reserve(token_lists[i].size());
    for (const auto& w : token_lists[i]) doc.tokens.push_back(ds.vocab.id(w));
    if (doc.domain == Domain::kSource) {
      if (doc.label)
        ds.source_labeled.push_back(doc.id);
      else
        ds.source_unlabeled.push_back(doc.id);
    } else {
      ds.target_unlabeled.push_back(doc.id);
    }
    ds.docs.push_back(std::move(doc));
  }
  return ds;
}

void split_dataset(DomainPairDataset& dataset, int dev_size, std::uint64_t seed) {
  if (dev_size <= 0 || dev_size % 2 != 0)
    throw Error("split: dev_size must be positive and even, got " +
                std::to_string(dev_size));
  std::vector<int> pos, neg;
  for (int id : dataset.target_unlabeled) {
    const auto& doc = dataset.docs[id];
    if (!doc.label) continue;
    (*doc.label == Label::kPositive ? pos : neg).push_back(id);
  }
  const int per_class = dev_size / 2;
  if (static_cast<int>(pos.size()) < per_class ||
      static_cast<int>(neg.size()) < per_class) {
    throw Error("split: need " + std::to_string(per_class) +
                " labeled target documents per class, have pos=" +
                std::to_string(pos.size()) + " neg=" + std::to_string(neg.size()));
  }
  std::mt19937_64 rng(mix_seed(seed, "split"));
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);

  dataset.dev.clear();
  dataset.test.clear();
  dataset.dev.insert(dataset.dev.end(), pos.begin(), pos.begin() + per_class);
  dataset.dev.insert(dataset.dev.end(), neg.begin(), neg.begin() + per_class);

  // Remainder forms the test set, trimmed so both classes stay balanced.
  const int rem_pos = static_cast<int>(pos.size()) - per_class;
  const int rem_neg = static_cast<int>(neg.size()) - per_class;
  const int per_class_test = std::min(rem_pos, rem_neg);
  dataset.test.insert(dataset.test.end(), pos.begin() + per_class,
                      pos.begin() + per_class + per_class_test);
  dataset.test.insert(dataset.test.end(), neg.begin() + per_class,
                      neg.begin() + per_class + per_class_test);
  std::sort(dataset.dev.begin(), dataset.dev.end());
  std::sort(dataset.test.begin(), dataset.test.end());
}

namespace {

void validate_synthetic_spec(const SyntheticSpec& spec) {
  if (spec.pos_markers.empty() || spec.neg_markers.empty())
    throw Error("synthetic spec: marker sets must be nonempty");
  if (spec.source_background.empty() || spec.target_background.empty())
    throw Error("synthetic spec: background sets must be nonempty");
  if (spec.docs_per_domain <= 0) throw Error("synthetic spec: docs_per_domain <= 0");
  if (spec.len_min <= 0 || spec.len_max < spec.len_min)
    throw Error("synthetic spec: bad length range");
  auto contains = [](const std::vector<std::string>& set, const std::string& w) {
    return std::find(set.begin(), set.end(), w) != set.end();
  };
  for (const auto& m : spec.pos_markers)
    if (contains(spec.neg_markers, m))
      throw Error("synthetic spec: marker '" + m + "' present in both polarities");
  for (const auto* set : {&spec.shared_words, &spec.source_background,
                          &spec.target_background}) {
    for (const auto& w : *set)
      if (contains(spec.pos_markers, w) || contains(spec.neg_markers, w))
        throw Error("synthetic spec: marker '" + w + "' reused as non-marker word");
  }
}

const std::string& pick(const std::vector<std::string>& set, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, set.size() - 1);
  return set[d(rng)];
}

}  // namespace

std::vector<RawDocument> generate_synthetic_docs(const SyntheticSpec& spec,
                                                 std::uint64_t seed) {
  validate_synthetic_spec(spec);
  std::mt19937_64 rng(mix_seed(seed, "synth"));
  std::vector<RawDocument> docs;
  docs.reserve(2 * spec.docs_per_domain);
  for (Domain domain : {Domain::kSource, Domain::kTarget}) {
    const auto& background = domain == Domain::kSource ? spec.source_background
                                                       : spec.target_background;
    for (int i = 0; i < spec.docs_per_domain; ++i) {
      const Label label = i % 2 == 0 ? Label::kPositive : Label::kNegative;
      const auto& markers =
          label == Label::kPositive ? spec.pos_markers : spec.neg_markers;
      std::uniform_int_distribution<int> len_d(spec.len_min, spec.len_max);
      std::uniform_int_distribution<int> mark_d(spec.markers_min, spec.markers_max);
      std::uniform_int_distribution<int> bg_d(spec.background_min, spec.background_max);
      const int len = len_d(rng);
      const int n_markers = std::max(1, mark_d(rng));
      const int n_bg = std::max(1, bg_d(rng));

      std::vector<std::string> words;
      for (int m = 0; m < n_markers; ++m) words.push_back(pick(markers, rng));
      for (int b = 0; b < n_bg; ++b) words.push_back(pick(background, rng));
      const auto& filler = spec.shared_words.empty() ? background : spec.shared_words;
      while (static_cast<int>(words.size()) < len) words.push_back(pick(filler, rng));
      std::shuffle(words.begin(), words.end(), rng);

      RawDocument doc;
      doc.domain = domain;
      doc.label = label;
      for (std::size_t w = 0; w < words.size(); ++w) {
        if (w) doc.text += ' ';
        doc.text += words[w];
      }
      docs.push_back(std::move(doc));
    }
  }
  return docs;
}

DomainPairDataset generate_synthetic_pair(const SyntheticSpec& spec, std::uint64_t seed,
                                          int dev_size) {
  auto raw = generate_synthetic_docs(spec, seed);
  DomainPairDataset ds = assemble_dataset(raw, /*vocab_min_freq=*/1);
  split_dataset(ds, dev_size, seed);
  return ds;
}

void write_corpus_jsonl(const std::string& path, const std::vector<RawDocument>& docs) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write corpus file: " + path);
  for (const auto& d : docs) {
    json j;
    j["text"] = d.text;
    j["domain"] = to_string(d.domain);
    if (d.label) j["label"] = to_string(*d.label);
    out << j.dump() << '\n';
  }
}

void save_dataset(const std::string& path, const DomainPairDataset& dataset,
                  const std::string& task) {
  json j;
  j["version"] = 1;
  j["task"] = task;
  j["vocab"] = std::vector<std::string>(dataset.vocab.words().begin() + 3,
                                        dataset.vocab.words().end());
  json docs = json::array();
  for (const auto& d : dataset.docs) {
    json doc;
    doc["id"] = d.id;
    doc["domain"] = to_string(d.domain);
    if (d.label) doc["label"] = to_string(*d.label);
    doc["text"] = d.text;
    doc["tokens"] = d.tokens;
    docs.push_back(std::move(doc));
  }
  j["docs"] = std::move(docs);
  j["dev"] = dataset.dev;
  j["test"] = dataset.test;
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file: " + path);
  out << j.dump(2) << '\n';
}

DomainPairDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("dataset file " + path + ": " + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw Error("dataset file " + path + ": unsupported version");

  DomainPairDataset ds;
  ds.vocab = Vocabulary::from_words(j["vocab"].get<std::vector<std::string>>());
  for (const auto& doc_j : j["docs"]) {
    Document doc;
    doc.id = doc_j["id"].get<int>();
    doc.text = doc_j["text"].get<std::string>();
    doc.domain = doc_j["domain"].get<std::string>() == "source" ? Domain::kSource
                                                                : Domain::kTarget;
    if (doc_j.contains("label"))
      doc.label = doc_j["label"].get<std::string>() == "pos" ? Label::kPositive
                                                             : Label::kNegative;
    doc.tokens = doc_j["tokens"].get<std::vector<int>>();
    for (int t : doc.tokens)
      if (t < 0 || t >= ds.vocab.size())
        throw Error("dataset file " + path + ": token id out of range in doc " +
                    std::to_string(doc.id));
    if (doc.id != static_cast<int>(ds.docs.size()))
      throw Error("dataset file " + path + ": non-sequential doc ids");
    if (doc.domain == Domain::kSource) {
      if (doc.label)
        ds.source_labeled.push_back(doc.id);
      else
        ds.source_unlabeled.push_back(doc.id);
    } else {
      ds.target_unlabeled.push_back(doc.id);
    }
    ds.docs.push_back(std::move(doc));
  }
  ds.dev = j["dev"].get<std::vector<int>>();
  ds.test = j["test"].get<std::vector<int>>();
  return ds;
}

}  // namespace tdan
