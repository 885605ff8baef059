#pragma once

// Shared test fixtures and oracles. Everything here is independent of the
// implementation paths it checks: the gradient oracle uses central finite
// differences, the extraction oracle re-implements the extraction procedure
// from scratch, and the topic-recovery fixture samples from a known
// topic-word matrix.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "tdan/autodiff.hpp"
#include "tdan/corpus.hpp"
#include "tdan/dsw.hpp"
#include "tdan/lda.hpp"
#include "tdan/model.hpp"

namespace tdan::testutil {

// --- finite-difference gradient oracle -----------------------------------

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Rebuilds the loss via make_loss() around perturbed leaf values and compares
// central differences against the analytic gradients. Returns the max
// relative error over every component of every leaf.
inline double grad_check(const std::vector<ad::Var>& leaves,
                         const std::function<ad::Var()>& make_loss, double h = 1e-5) {
  ad::Var loss = make_loss();
  ad::backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const auto& leaf : leaves) analytic.push_back(leaf->ensure_grad());

  double max_err = 0.0;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto& values = leaves[l]->value;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = make_loss()->value[0];
      values[i] = saved - h;
      const double down = make_loss()->value[0];
      values[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      max_err = std::max(max_err, rel_err(analytic[l][i], fd));
    }
  }
  return max_err;
}

// Scalarizes a matrix output as u^T X v with fixed pseudo-random weights so
// every element participates in the checked loss.
inline ad::Var rank1_loss(const ad::Var& x, std::uint64_t seed = 13) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.2, 1.0);
  auto u = ad::make_tensor(x->rows(), 1);
  auto v = ad::make_tensor(x->cols(), 1);
  for (auto& e : u->value) e = d(rng);
  for (auto& e : v->value) e = d(rng);
  return ad::matmul(u, ad::matmul(x, v), /*trans_a=*/true);
}

inline ad::Var random_leaf(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  auto t = ad::make_tensor(rows, cols, /*requires_grad=*/true);
  for (auto& e : t->value) e = d(rng);
  return t;
}

// --- extraction oracle ----------------------------------------------------

// Straightforward second implementation of the extraction rule, written
// independently of the pipeline code: classify topics by average occurrence
// difference, then keep each word whose most related topic (argmax over beta
// element-wise-times theta) is specific to the document's domain. Kept
// deliberately naive.
inline std::map<int, std::vector<int>> extraction_oracle(const DomainPairDataset& ds,
                                                         const TopicModel& model,
                                                         double tol, int cap) {
  const int k = model.k;

  std::vector<double> p_s(k, 0.0), p_t(k, 0.0);
  int n_s = 0, n_t = 0;
  for (const auto& doc : ds.docs) {
    const auto& theta = model.doc_theta[doc.id];
    if (doc.domain == Domain::kSource) {
      ++n_s;
      for (int t = 0; t < k; ++t) p_s[t] += theta[t];
    } else {
      ++n_t;
      for (int t = 0; t < k; ++t) p_t[t] += theta[t];
    }
  }
  for (int t = 0; t < k; ++t) {
    p_s[t] /= n_s;
    p_t[t] /= n_t;
  }

  std::vector<bool> in_source(k, false), in_target(k, false);
  for (int t = 0; t < k; ++t) {
    if (p_s[t] - p_t[t] > tol)
      in_source[t] = true;
    else if (p_t[t] - p_s[t] > tol)
      in_target[t] = true;
  }

  std::map<int, std::vector<int>> out;
  for (const auto& doc : ds.docs) {
    const auto& theta = model.doc_theta[doc.id];
    std::vector<int> seq{Vocabulary::kSpecificTokenId};
    for (int w : doc.tokens) {
      if (static_cast<int>(seq.size()) >= cap) break;
      // p_d row for this word: beta[w][l] * theta[l] over topics l
      int best = 0;
      for (int l = 1; l < k; ++l)
        if (model.beta_at(w, l) * theta[l] > model.beta_at(w, best) * theta[best])
          best = l;
      const bool keep =
          doc.domain == Domain::kSource ? in_source[best] : in_target[best];
      if (keep) seq.push_back(w);
    }
    out[doc.id] = std::move(seq);
  }
  return out;
}

// --- synthetic fixtures ----------------------------------------------------

// Marker/background fixture for pipeline tests: shared sentiment markers,
// disjoint per-domain background vocabularies.
inline SyntheticSpec pipeline_spec(int docs_per_domain = 200) {
  SyntheticSpec spec;
  spec.docs_per_domain = docs_per_domain;
  spec.len_min = 15;
  spec.len_max = 30;
  spec.pos_markers = {"good", "great", "love"};
  spec.neg_markers = {"bad", "awful", "hate"};
  spec.source_background = {"book", "author", "read", "chapter", "novel", "page"};
  spec.target_background = {"coffee", "cup", "blender", "kitchen", "blade", "grind"};
  spec.shared_words = {"the", "it", "this", "was", "a", "really", "very", "one"};
  spec.markers_min = 1;
  spec.markers_max = 2;
  spec.background_min = 3;
  spec.background_max = 6;
  return spec;
}

// Desk-scale LDA settings for the pipeline fixture: a sharper document-topic
// prior than the 50/k default, which over-smooths the short synthetic
// documents until no topic clears the tolerance bound.
inline LdaConfig pipeline_lda(std::uint64_t seed, int k = 10, int sweeps = 150) {
  LdaConfig cfg;
  cfg.k = k;
  cfg.alpha = 0.5;
  cfg.gibbs_iterations = sweeps;
  cfg.seed = seed;
  return cfg;
}

// Known-beta corpus for topic recovery: `topics` disjoint supports of
// `words_per_topic` words each, uniform within the support.
struct RecoveryFixture {
  std::vector<Document> docs;
  Vocabulary vocab;
  std::vector<double> true_beta;  // V x k row-major, like TopicModel::beta
};

inline RecoveryFixture recovery_corpus(int topics, int words_per_topic, int n_docs,
                                       int doc_len, std::uint64_t seed) {
  RecoveryFixture fx;
  std::vector<std::string> words;
  for (int t = 0; t < topics; ++t)
    for (int w = 0; w < words_per_topic; ++w)
      words.push_back("w" + std::to_string(t) + "_" + std::to_string(w));
  fx.vocab = Vocabulary::from_words(words);

  const int V = fx.vocab.size();
  fx.true_beta.assign(static_cast<std::size_t>(V) * topics, 0.0);
  for (int t = 0; t < topics; ++t)
    for (int w = 0; w < words_per_topic; ++w) {
      const int word_id = fx.vocab.id(words[t * words_per_topic + w]);
      fx.true_beta[static_cast<std::size_t>(word_id) * topics + t] =
          1.0 / words_per_topic;
    }

  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(0.5, 1.0);
  std::uniform_int_distribution<int> word_d(0, words_per_topic - 1);
  for (int d = 0; d < n_docs; ++d) {
    std::vector<double> theta(topics);
    double total = 0.0;
    for (auto& x : theta) {
      x = gamma(rng);
      total += x;
    }
    for (auto& x : theta) x /= total;
    Document doc;
    doc.id = d;
    doc.domain = d % 2 == 0 ? Domain::kSource : Domain::kTarget;
    std::discrete_distribution<int> topic_d(theta.begin(), theta.end());
    for (int j = 0; j < doc_len; ++j) {
      const int t = topic_d(rng);
      const std::string& w = words[t * words_per_topic + word_d(rng)];
      doc.tokens.push_back(fx.vocab.id(w));
    }
    fx.docs.push_back(std::move(doc));
  }
  return fx;
}

inline double tv_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::abs(a[i] - b[i]);
  return tv / 2.0;
}

// Greedy-matches learned topics to true topics by total variation and
// returns the worst matched distance.
inline double greedy_match_tv(const std::vector<double>& learned_beta,
                              const std::vector<double>& true_beta, int V, int k) {
  auto column = [V, k](const std::vector<double>& beta, int t) {
    std::vector<double> col(V);
    for (int v = 0; v < V; ++v) col[v] = beta[static_cast<std::size_t>(v) * k + t];
    return col;
  };
  std::vector<bool> used(k, false);
  double worst = 0.0;
  for (int true_t = 0; true_t < k; ++true_t) {
    const auto truth = column(true_beta, true_t);
    double best = 2.0;
    int best_l = -1;
    for (int l = 0; l < k; ++l) {
      if (used[l]) continue;
      const double tv = tv_distance(truth, column(learned_beta, l));
      if (tv < best) {
        best = tv;
        best_l = l;
      }
    }
    used[best_l] = true;
    worst = std::max(worst, best);
  }
  return worst;
}

// Tiny network configuration for gradient checks and fast training tests.
inline ModelConfig tiny_config(int vocab_size, Variant variant = Variant::kTdan) {
  ModelConfig cfg;
  cfg.vocab_size = vocab_size;
  cfg.d_h = 8;
  cfg.san_layers = 1;
  cfg.dspwan_layers = 1;
  cfg.heads = 2;
  cfg.ffn_dim = 16;
  cfg.d_l = 6;
  cfg.d_sp_max = 4;
  cfg.dropout = 0.0;
  cfg.variant = variant;
  return cfg;
}

}  // namespace tdan::testutil
