#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdan/corpus.hpp"

namespace tdan {

// V x dim word vector table. The <pad> row is all zeros; rows for words not
// covered by a pretrained file are xavier-initialized.
struct EmbeddingTable {
  int dim = 0;
  std::vector<double> values;  // row-major, vocab.size() rows
  std::vector<bool> covered;

  int rows() const { return dim == 0 ? 0 : static_cast<int>(values.size()) / dim; }
  double* row(int r) { return values.data() + static_cast<std::size_t>(r) * dim; }
  const double* row(int r) const {
    return values.data() + static_cast<std::size_t>(r) * dim;
  }
  double coverage_ratio() const;
};

// Xavier-initialized table with a zero <pad> row; used when no pretrained
// file is supplied.
EmbeddingTable random_embeddings(const Vocabulary& vocab, int dim, std::uint64_t seed);

// Loads word2vec text format (optional "count dim" header, then one word and
// `dim` floats per line). Throws on dimension mismatch.
EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab,
                               int dim, std::uint64_t seed);

}  // namespace tdan
