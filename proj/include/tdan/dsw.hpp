#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "tdan/corpus.hpp"
#include "tdan/lda.hpp"

namespace tdan {

// Average topic occurrence possibilities of the two domains.
struct DomainTopicProfile {
  std::vector<double> p_s;
  std::vector<double> p_t;
};

struct SpecificTopicSets {
  std::set<int> source_specific;
  std::set<int> target_specific;
};

// Ordered token-id sequence of one document's domain-specific words;
// <specific_token> is always the first element.
struct DomainSpecificWords {
  std::vector<int> tokens;
};

// Arithmetic mean of simplex vectors; errors on an empty list.
std::vector<double> average_topic_distribution(
    const std::vector<std::vector<double>>& thetas);

// Per-domain averages of the stored training thetas.
DomainTopicProfile compute_domain_profile(const TopicModel& model,
                                          const DomainPairDataset& dataset);

// Topic t is source-specific iff p_s[t] - p_t[t] > tol (strict), and
// symmetrically for the target side.
SpecificTopicSets classify_specific_topics(const DomainTopicProfile& profile,
                                           double tol);

// argmax over topics of beta[word][l] * p_i[l]; ties go to the smallest id.
int most_related_topic(const TopicModel& model, const std::vector<double>& theta,
                       int word);

// Runs the extraction over every document: a word is kept iff its most
// related topic lies in the document-domain's specific set. Original order
// and duplicates are preserved; sequences are capped at d_sp_max tokens
// (including the leading <specific_token>).
std::map<int, DomainSpecificWords> extract_domain_specific_words(
    const DomainPairDataset& dataset, const TopicModel& model,
    const SpecificTopicSets& sets, int d_sp_max = 64);

// JSONL dump: one {doc_id, domain, specific_words} object per document.
void save_extraction(const std::string& path,
                     const std::map<int, DomainSpecificWords>& extraction,
                     const DomainPairDataset& dataset);
std::map<int, DomainSpecificWords> load_extraction(const std::string& path,
                                                   const Vocabulary& vocab);

}  // namespace tdan
