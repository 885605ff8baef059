#include "tdan/embedding.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace tdan {

double EmbeddingTable::coverage_ratio() const {
  if (covered.empty()) return 0.0;
  std::size_t n = 0;
  for (bool c : covered) n += c;
  return static_cast<double>(n) / covered.size();
}

namespace {

void xavier_fill(double* row, int dim, int fan_sum, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / fan_sum);
  std::uniform_real_distribution<double> d(-limit, limit);
  for (int i = 0; i < dim; ++i) row[i] = d(rng);
}

}  // namespace

EmbeddingTable random_embeddings(const Vocabulary& vocab, int dim, std::uint64_t seed) {
  EmbeddingTable table;
  table.dim = dim;
  table.values.assign(static_cast<std::size_t>(vocab.size()) * dim, 0.0);
  table.covered.assign(vocab.size(), false);
  std::mt19937_64 rng(mix_seed(seed, "embedding"));
  for (int r = 0; r < vocab.size(); ++r) {
    if (r == Vocabulary::kPadId) continue;  // stays zero
    xavier_fill(table.row(r), dim, vocab.size() + dim, rng);
  }
  return table;
}

EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                               int dim, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open embedding file: " + path);

  EmbeddingTable table = random_embeddings(vocab, dim, seed);

  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (first) {
      first = false;
      // word2vec text files may start with a "count dim" header
      long header_count = 0;
      char* end = nullptr;
      header_count = std::strtol(word.c_str(), &end, 10);
      if (end && *end == '\0' && header_count > 0) {
        long header_dim = 0;
        if (ss >> header_dim && header_dim != dim)
          throw Error("embedding file " + path + ": dimension " +
                      std::to_string(header_dim) + " != expected " +
                      std::to_string(dim));
        continue;
      }
    }
    std::vector<double> vec;
    vec.reserve(dim);
    double x;
    while (ss >> x) vec.push_back(x);
    if (static_cast<int>(vec.size()) != dim)
      throw Error("embedding file " + path + " line " + std::to_string(line_no) +
                  ": got " + std::to_string(vec.size()) + " dims, expected " +
                  std::to_string(dim));
    if (!vocab.contains(word)) continue;
    const int id = vocab.id(word);
    if (id == Vocabulary::kPadId) continue;
    std::copy(vec.begin(), vec.end(), table.row(id));
    table.covered[id] = true;
  }
  return table;
}

}  // namespace tdan
