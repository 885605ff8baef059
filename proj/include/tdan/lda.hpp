#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdan/corpus.hpp"

namespace tdan {

struct LdaConfig {
  int k = 50;
  double alpha = 0.0;  // <= 0 selects the 50/k heuristic
  double eta = 0.01;
  int gibbs_iterations = 500;
  int fold_in_iterations = 50;
  std::uint64_t seed = 0;

  double resolved_alpha() const { return alpha > 0.0 ? alpha : 50.0 / k; }
  void validate() const;
};

// Trained LDA model. beta is V x k row-major (row = word, column = topic);
// every column is a topic's word distribution and sums to 1. doc_theta holds
// one simplex row per training document, indexed by document id.
struct TopicModel {
  int k = 0;
  int vocab_size = 0;
  std::uint64_t vocab_hash = 0;
  LdaConfig config;
  std::vector<double> beta;
  std::vector<std::vector<double>> doc_theta;
  std::vector<double> ll_history;  // per-sweep token log-likelihood

  double beta_at(int word, int topic) const {
    return beta[static_cast<std::size_t>(word) * k + topic];
  }
};

// Per-token topic assignments plus the count matrices the sampler maintains.
struct GibbsState {
  std::vector<std::vector<int>> assignments;  // per doc, per token
  std::vector<std::vector<int>> n_dk;         // doc x topic
  std::vector<std::vector<int>> n_kv;         // topic x word
  std::vector<long long> n_k;                 // per-topic totals

  long long total_assignments() const;
};

// Collapsed Gibbs sampling over the full corpus (both domains). Empty
// documents are skipped with a warning and receive a uniform theta.
// Deterministic under config.seed. If out_state is non-null the final
// sampler state is copied there.
TopicModel fit_lda(const std::vector<Document>& docs, const Vocabulary& vocab,
                   const LdaConfig& config, GibbsState* out_state = nullptr);

// Fold-in Gibbs for an unseen document against frozen beta. Empty documents
// yield a uniform vector with a warning.
std::vector<double> infer_theta(const TopicModel& model, const std::vector<int>& tokens,
                                int fold_in_iterations, std::uint64_t seed);

// Stored theta for training documents, fold-in for anything else.
std::vector<double> resolve_theta(const TopicModel& model, const Document& doc);

// Token log-likelihood sum_tokens log sum_k theta[k] * beta[v][k].
double log_likelihood(const TopicModel& model, const std::vector<Document>& docs);

void save_topic_model(const std::string& path, const TopicModel& model);
TopicModel load_topic_model(const std::string& path);

}  // namespace tdan
