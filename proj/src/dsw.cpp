#include "tdan/dsw.hpp"

#include <fstream>

#include <json.hpp>

namespace tdan {

using nlohmann::json;

std::vector<double> average_topic_distribution(
    const std::vector<std::vector<double>>& thetas) {
  if (thetas.empty()) throw Error("average_topic_distribution: empty list");
  const std::size_t k = thetas.front().size();
  std::vector<double> mean(k, 0.0);
  for (const auto& theta : thetas) {
    if (theta.size() != k)
      throw Error("average_topic_distribution: inconsistent vector lengths");
    for (std::size_t t = 0; t < k; ++t) mean[t] += theta[t];
  }
  for (auto& x : mean) x /= static_cast<double>(thetas.size());
  return mean;
}

DomainTopicProfile compute_domain_profile(const TopicModel& model,
                                          const DomainPairDataset& dataset) {
  std::vector<std::vector<double>> source, target;
  for (const auto& doc : dataset.docs) {
    if (doc.id >= static_cast<int>(model.doc_theta.size()))
      throw Error("domain profile: document " + std::to_string(doc.id) +
                  " has no stored theta; topic model was trained on a different corpus");
    (doc.domain == Domain::kSource ? source : target)
        .push_back(model.doc_theta[doc.id]);
  }
  if (source.empty() || target.empty())
    throw Error("domain profile: both domains must be nonempty");
  return {average_topic_distribution(source), average_topic_distribution(target)};
}

SpecificTopicSets classify_specific_topics(const DomainTopicProfile& profile,
                                           double tol) {
  if (tol <= 0.0) throw Error("classify_specific_topics: tol must be positive");
  if (profile.p_s.size() != profile.p_t.size())
    throw Error("classify_specific_topics: profile length mismatch");
  SpecificTopicSets sets;
  for (std::size_t t = 0; t < profile.p_s.size(); ++t) {
    if (profile.p_s[t] - profile.p_t[t] > tol)
      sets.source_specific.insert(static_cast<int>(t));
    else if (profile.p_t[t] - profile.p_s[t] > tol)
      sets.target_specific.insert(static_cast<int>(t));
  }
  return sets;
}

int most_related_topic(const TopicModel& model, const std::vector<double>& theta,
                       int word) {
  if (word < 0 || word >= model.vocab_size)
    throw Error("most_related_topic: word id out of range");
  int best = 0;
  double best_score = model.beta_at(word, 0) * theta[0];
  for (int t = 1; t < model.k; ++t) {
    const double score = model.beta_at(word, t) * theta[t];
    if (score > best_score) {
      best_score = score;
      best = t;
    }
  }
  return best;
}

std::map<int, DomainSpecificWords> extract_domain_specific_words(
    const DomainPairDataset& dataset, const TopicModel& model,
    const SpecificTopicSets& sets, int d_sp_max) {
  if (d_sp_max < 1) throw Error("extract: d_sp_max must be >= 1");
  std::map<int, DomainSpecificWords> out;
  for (const auto& doc : dataset.docs) {
    const auto& specific = doc.domain == Domain::kSource ? sets.source_specific
                                                         : sets.target_specific;
    const auto theta = resolve_theta(model, doc);
    DomainSpecificWords words;
    words.tokens.push_back(Vocabulary::kSpecificTokenId);
    for (int v : doc.tokens) {
      if (static_cast<int>(words.tokens.size()) >= d_sp_max) break;
      if (specific.count(most_related_topic(model, theta, v)))
        words.tokens.push_back(v);
    }
    out.emplace(doc.id, std::move(words));
  }
  return out;
}

void save_extraction(const std::string& path,
                     const std::map<int, DomainSpecificWords>& extraction,
                     const DomainPairDataset& dataset) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write extraction file: " + path);
  for (const auto& [doc_id, words] : extraction) {
    json j;
    j["doc_id"] = doc_id;
    j["domain"] = to_string(dataset.docs[doc_id].domain);
    std::vector<std::string> strs;
    strs.reserve(words.tokens.size());
    for (int v : words.tokens) strs.push_back(dataset.vocab.word(v));
    j["specific_words"] = strs;
    out << j.dump() << '\n';
  }
}

std::map<int, DomainSpecificWords> load_extraction(const std::string& path,
                                                   const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open extraction file: " + path);
  std::map<int, DomainSpecificWords> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("doc_id") || !j.contains("specific_words"))
      throw Error("extraction file " + path + " line " + std::to_string(line_no) +
                  ": malformed entry");
    DomainSpecificWords words;
    for (const auto& s : j["specific_words"])
      words.tokens.push_back(vocab.id(s.get<std::string>()));
    if (words.tokens.empty() || words.tokens.front() != Vocabulary::kSpecificTokenId)
      throw Error("extraction file " + path + " line " + std::to_string(line_no) +
                  ": sequence must start with " +
                  std::string(Vocabulary::kSpecificTokenWord));
    out.emplace(j["doc_id"].get<int>(), std::move(words));
  }
  return out;
}

}  // namespace tdan
