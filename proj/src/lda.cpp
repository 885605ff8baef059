#include "tdan/lda.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <random>

#include <json.hpp>

namespace tdan {

using nlohmann::json;

void LdaConfig::validate() const {
  if (k < 2) throw Error("lda: topic count must be >= 2, got " + std::to_string(k));
  if (eta <= 0.0) throw Error("lda: eta must be positive");
  if (alpha < 0.0) throw Error("lda: alpha must be positive (or 0 for the default)");
  if (gibbs_iterations <= 0) throw Error("lda: gibbs_iterations must be positive");
}

long long GibbsState::total_assignments() const {
  long long n = 0;
  for (const auto& doc : assignments) n += static_cast<long long>(doc.size());
  return n;
}

namespace {

// Current-count token log-likelihood, evaluated with the same smoothed
// estimators used for the final beta/theta.
double state_log_likelihood(const std::vector<Document>& docs, const GibbsState& state,
                            int k, int vocab_size, double alpha, double eta) {
  double ll = 0.0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto& tokens = docs[d].tokens;
    if (tokens.empty()) continue;
    const double len = static_cast<double>(tokens.size());
    for (int v : tokens) {
      double p = 0.0;
      for (int t = 0; t < k; ++t) {
        const double theta = (state.n_dk[d][t] + alpha) / (len + k * alpha);
        const double phi =
            (state.n_kv[t][v] + eta) / (state.n_k[t] + vocab_size * eta);
        p += theta * phi;
      }
      ll += std::log(p);
    }
  }
  return ll;
}

}  // namespace

TopicModel fit_lda(const std::vector<Document>& docs, const Vocabulary& vocab,
                   const LdaConfig& config, GibbsState* out_state) {
  config.validate();
  if (docs.empty()) throw Error("lda: empty corpus");
  const int k = config.k;
  const int V = vocab.size();
  const double alpha = config.resolved_alpha();
  const double eta = config.eta;

  int nonempty = 0;
  for (const auto& doc : docs) {
    if (doc.tokens.empty())
      std::cerr << "lda: warning: skipping empty document " << doc.id << "\n";
    else
      ++nonempty;
  }
  if (nonempty == 0) throw Error("lda: corpus has no nonempty documents");

  GibbsState state;
  state.assignments.resize(docs.size());
  state.n_dk.assign(docs.size(), std::vector<int>(k, 0));
  state.n_kv.assign(k, std::vector<int>(V, 0));
  state.n_k.assign(k, 0);

  std::mt19937_64 rng(mix_seed(config.seed, "lda"));
  std::uniform_int_distribution<int> topic_d(0, k - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  for (std::size_t d = 0; d < docs.size(); ++d) {
    const auto& tokens = docs[d].tokens;
    state.assignments[d].resize(tokens.size());
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      const int t = topic_d(rng);
      state.assignments[d][j] = t;
      ++state.n_dk[d][t];
      ++state.n_kv[t][tokens[j]];
      ++state.n_k[t];
    }
  }

  TopicModel model;
  model.k = k;
  model.vocab_size = V;
  model.vocab_hash = vocab.hash();
  model.config = config;
  model.ll_history.reserve(config.gibbs_iterations);

  std::vector<double> weights(k);
  for (int sweep = 0; sweep < config.gibbs_iterations; ++sweep) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      const auto& tokens = docs[d].tokens;
      for (std::size_t j = 0; j < tokens.size(); ++j) {
        const int v = tokens[j];
        const int old_t = state.assignments[d][j];
        --state.n_dk[d][old_t];
        --state.n_kv[old_t][v];
        --state.n_k[old_t];

        double total = 0.0;
        for (int t = 0; t < k; ++t) {
          total += (state.n_dk[d][t] + alpha) * (state.n_kv[t][v] + eta) /
                   (state.n_k[t] + V * eta);
          weights[t] = total;
        }
        const double r = unit(rng) * total;
        int new_t = 0;
        while (new_t < k - 1 && weights[new_t] <= r) ++new_t;

        state.assignments[d][j] = new_t;
        ++state.n_dk[d][new_t];
        ++state.n_kv[new_t][v];
        ++state.n_k[new_t];
      }
    }
    model.ll_history.push_back(
        state_log_likelihood(docs, state, k, V, alpha, eta));
  }

  // Smoothed point estimates at the final sweep.
  model.beta.assign(static_cast<std::size_t>(V) * k, 0.0);
  for (int t = 0; t < k; ++t) {
    const double denom = state.n_k[t] + V * eta;
    for (int v = 0; v < V; ++v)
      model.beta[static_cast<std::size_t>(v) * k + t] = (state.n_kv[t][v] + eta) / denom;
  }
  model.doc_theta.resize(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    auto& theta = model.doc_theta[d];
    theta.assign(k, 0.0);
    const double len = static_cast<double>(docs[d].tokens.size());
    if (docs[d].tokens.empty()) {
      theta.assign(k, 1.0 / k);
    } else {
      for (int t = 0; t < k; ++t)
        theta[t] = (state.n_dk[d][t] + alpha) / (len + k * alpha);
    }
  }

  if (out_state) *out_state = std::move(state);
  return model;
}

std::vector<double> infer_theta(const TopicModel& model, const std::vector<int>& tokens,
                                int fold_in_iterations, std::uint64_t seed) {
  const int k = model.k;
  if (tokens.empty()) {
    std::cerr << "lda: warning: inferring theta for empty document, returning uniform\n";
    return std::vector<double>(k, 1.0 / k);
  }
  const double alpha = model.config.resolved_alpha();
  std::mt19937_64 rng(mix_seed(seed, "fold-in"));
  std::uniform_int_distribution<int> topic_d(0, k - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<int> z(tokens.size());
  std::vector<int> n_dk(k, 0);
  for (std::size_t j = 0; j < tokens.size(); ++j) {
    z[j] = topic_d(rng);
    ++n_dk[z[j]];
  }
  std::vector<double> weights(k);
  for (int sweep = 0; sweep < fold_in_iterations; ++sweep) {
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      const int v = tokens[j];
      --n_dk[z[j]];
      double total = 0.0;
      for (int t = 0; t < k; ++t) {
        total += (n_dk[t] + alpha) * model.beta_at(v, t);
        weights[t] = total;
      }
      const double r = unit(rng) * total;
      int new_t = 0;
      while (new_t < k - 1 && weights[new_t] <= r) ++new_t;
      z[j] = new_t;
      ++n_dk[new_t];
    }
  }
  std::vector<double> theta(k);
  const double len = static_cast<double>(tokens.size());
  for (int t = 0; t < k; ++t) theta[t] = (n_dk[t] + alpha) / (len + k * alpha);
  return theta;
}

std::vector<double> resolve_theta(const TopicModel& model, const Document& doc) {
  if (doc.id >= 0 && doc.id < static_cast<int>(model.doc_theta.size()))
    return model.doc_theta[doc.id];
  return infer_theta(model, doc.tokens, model.config.fold_in_iterations,
                     mix_seed(model.config.seed, "resolve") ^ doc.id);
}

double log_likelihood(const TopicModel& model, const std::vector<Document>& docs) {
  double ll = 0.0;
  for (const auto& doc : docs) {
    const auto theta = resolve_theta(model, doc);
    for (int v : doc.tokens) {
      double p = 0.0;
      for (int t = 0; t < model.k; ++t) p += theta[t] * model.beta_at(v, t);
      ll += std::log(p);
    }
  }
  return ll;
}

void save_topic_model(const std::string& path, const TopicModel& model) {
  json j;
  j["version"] = 1;
  j["k"] = model.k;
  j["vocab_size"] = model.vocab_size;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(model.vocab_hash));
  j["vocab_hash"] = std::string(buf);
  j["alpha"] = model.config.resolved_alpha();
  j["eta"] = model.config.eta;
  j["gibbs_iterations"] = model.config.gibbs_iterations;
  j["fold_in_iterations"] = model.config.fold_in_iterations;
  j["seed"] = model.config.seed;
  j["beta"] = model.beta;
  j["doc_theta"] = model.doc_theta;
  j["ll_history"] = model.ll_history;
  std::ofstream out(path);
  if (!out) throw Error("cannot write topic model file: " + path);
  out << j.dump() << '\n';
}

TopicModel load_topic_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open topic model file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("topic model file " + path + ": " + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw Error("topic model file " + path + ": unsupported version");
  TopicModel m;
  m.k = j["k"].get<int>();
  m.vocab_size = j["vocab_size"].get<int>();
  m.vocab_hash = std::stoull(j["vocab_hash"].get<std::string>(), nullptr, 16);
  m.config.k = m.k;
  m.config.alpha = j["alpha"].get<double>();
  m.config.eta = j["eta"].get<double>();
  m.config.gibbs_iterations = j["gibbs_iterations"].get<int>();
  m.config.fold_in_iterations = j["fold_in_iterations"].get<int>();
  m.config.seed = j["seed"].get<std::uint64_t>();
  m.beta = j["beta"].get<std::vector<double>>();
  m.doc_theta = j["doc_theta"].get<std::vector<std::vector<double>>>();
  m.ll_history = j["ll_history"].get<std::vector<double>>();
  if (m.beta.size() != static_cast<std::size_t>(m.vocab_size) * m.k)
    throw Error("topic model file " + path + ": beta size mismatch");
  return m;
}

}  // namespace tdan
