#include "tdan/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

namespace tdan {

using ad::Var;
using nlohmann::json;

void TrainConfig::validate() const {
  if (batch <= 0 || batch % 2 != 0)
    throw Error("train config: batch must be positive and even, got " +
                std::to_string(batch));
  if (max_epochs <= 0) throw Error("train config: max_epochs must be positive");
  if (patience <= 0 || patience > max_epochs)
    throw Error("train config: patience must be in 1..max_epochs");
  if (rho < 0.0) throw Error("train config: rho must be >= 0");
  if (lambda_cap < 0.0) throw Error("train config: lambda_cap must be >= 0");
}

double lambda_schedule(int t, int max_epochs, double cap) {
  if (t < 0 || t > max_epochs) throw Error("lambda_schedule: t out of range 0..T");
  const double progress = static_cast<double>(t) / max_epochs;
  const double raw = 2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0;
  return std::min(raw, cap);
}

BatchComposer::BatchComposer(std::vector<int> source_ids, std::vector<int> target_ids,
                             int half, std::uint64_t seed)
    : source_(std::move(source_ids)),
      target_(std::move(target_ids)),
      half_(half),
      rng_(mix_seed(seed, "batches")) {
  if (source_.empty() || target_.empty())
    throw Error("batch composer: both document pools must be nonempty");
  if (half_ <= 0) throw Error("batch composer: batch half must be positive");
  const std::size_t larger = std::max(source_.size(), target_.size());
  steps_ = static_cast<int>((larger + half_ - 1) / half_);
  std::shuffle(source_.begin(), source_.end(), rng_);
  std::shuffle(target_.begin(), target_.end(), rng_);
}

int BatchComposer::take(std::vector<int>& pool, std::size_t& cursor) {
  if (cursor >= pool.size()) {
    std::shuffle(pool.begin(), pool.end(), rng_);
    cursor = 0;
  }
  return pool[cursor++];
}

BatchComposer::Batch BatchComposer::next() {
  Batch b;
  b.source.reserve(half_);
  b.target.reserve(half_);
  for (int i = 0; i < half_; ++i) b.source.push_back(take(source_, source_cursor_));
  for (int i = 0; i < half_; ++i) b.target.push_back(take(target_, target_cursor_));
  return b;
}

namespace {

const DomainSpecificWords& specific_for(
    const std::map<int, DomainSpecificWords>& extraction, int doc_id) {
  auto it = extraction.find(doc_id);
  if (it == extraction.end())
    throw Error("no extraction entry for document " + std::to_string(doc_id) +
                "; run the extraction step first");
  return it->second;
}

}  // namespace

LossBreakdown compute_losses(TdanModel& model, const DomainPairDataset& data,
                             const std::map<int, DomainSpecificWords>& extraction,
                             const BatchComposer::Batch& batch, double rho,
                             double lambda, bool training,
                             std::uint64_t dropout_seed) {
  if (batch.source.empty() || batch.target.empty())
    throw Error("compute_losses: batch halves must be nonempty");

  std::vector<Var> sent_terms;
  std::vector<Var> dom_terms;
  std::uint64_t doc_index = 0;
  for (int id : batch.source) {
    const Document& doc = data.docs[id];
    if (!doc.label)
      throw Error("compute_losses: unlabeled source document " + std::to_string(id) +
                  " in the sentiment half");
    auto fwd = model.forward(doc.tokens, specific_for(extraction, id).tokens, lambda,
                             training, dropout_seed + doc_index++);
    sent_terms.push_back(
        ad::cross_entropy(fwd.sentiment_logits, {static_cast<int>(*doc.label)}));
    dom_terms.push_back(ad::cross_entropy(fwd.domain_logits, {0}));
  }
  for (int id : batch.target) {
    const Document& doc = data.docs[id];
    auto fwd = model.forward(doc.tokens, specific_for(extraction, id).tokens, lambda,
                             training, dropout_seed + doc_index++);
    dom_terms.push_back(ad::cross_entropy(fwd.domain_logits, {1}));
  }

  auto mean_of = [](const std::vector<Var>& terms) {
    Var total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = ad::add(total, terms[i]);
    return ad::scale(total, 1.0 / terms.size());
  };

  LossBreakdown out;
  out.l_cls = mean_of(sent_terms);
  out.l_dom = mean_of(dom_terms);
  out.l_total = ad::add(out.l_cls, ad::scale(out.l_dom, rho));
  return out;
}

double evaluate_accuracy(TdanModel& model, const DomainPairDataset& data,
                         const std::map<int, DomainSpecificWords>& extraction,
                         const std::vector<int>& doc_ids) {
  if (doc_ids.empty()) throw Error("evaluate_accuracy: empty document set");
  int correct = 0;
  for (int id : doc_ids) {
    const Document& doc = data.docs[id];
    if (!doc.label)
      throw Error("evaluate_accuracy: document " + std::to_string(id) + " is unlabeled");
    auto fwd = model.forward(doc.tokens, specific_for(extraction, id).tokens, 0.0,
                             /*training=*/false, 0);
    const auto& logits = fwd.sentiment_logits->value;
    const int pred = logits[1] > logits[0] ? 1 : 0;
    correct += pred == static_cast<int>(*doc.label);
  }
  return static_cast<double>(correct) / doc_ids.size();
}

double domain_accuracy(TdanModel& model, const DomainPairDataset& data,
                       const std::map<int, DomainSpecificWords>& extraction,
                       const std::vector<int>& doc_ids) {
  if (doc_ids.empty()) throw Error("domain_accuracy: empty document set");
  int correct = 0;
  for (int id : doc_ids) {
    const Document& doc = data.docs[id];
    auto fwd = model.forward(doc.tokens, specific_for(extraction, id).tokens, 0.0,
                             /*training=*/false, 0);
    const auto& logits = fwd.domain_logits->value;
    const int pred = logits[1] > logits[0] ? 1 : 0;
    correct += pred == (doc.domain == Domain::kTarget ? 1 : 0);
  }
  return static_cast<double>(correct) / doc_ids.size();
}

TrainResult train(TdanModel& model, const DomainPairDataset& data,
                  const std::map<int, DomainSpecificWords>& extraction,
                  const std::vector<int>& dev_ids, const TrainConfig& config) {
  config.validate();
  if (data.source_labeled.empty())
    throw Error("train: no labeled source documents");
  if (data.target_unlabeled.empty()) throw Error("train: no target documents");
  if (dev_ids.empty()) throw Error("train: empty dev set");

  auto trainable = model.trainable_params();
  ad::Adam optimizer({.lr = config.lr, .weight_decay = config.weight_decay});

  TrainResult result;
  result.best_dev_accuracy = evaluate_accuracy(model, data, extraction, dev_ids);
  result.best_epoch = 0;
  result.best_values = model.snapshot_values();

  int epochs_since_improvement = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const double lambda = lambda_schedule(epoch, config.max_epochs, config.lambda_cap);
    BatchComposer composer(data.source_labeled, data.target_unlabeled, config.batch / 2,
                           mix_seed(config.seed, "epoch-" + std::to_string(epoch)));
    double sum_cls = 0.0, sum_dom = 0.0, sum_total = 0.0;
    for (int step = 0; step < composer.steps_per_epoch(); ++step) {
      auto batch = composer.next();
      const std::uint64_t dropout_seed = mix_seed(
          config.seed, "drop-e" + std::to_string(epoch) + "-s" + std::to_string(step));
      auto losses = compute_losses(model, data, extraction, batch, config.rho, lambda,
                                   /*training=*/true, dropout_seed);
      const double total = losses.l_total->value[0];
      if (std::isnan(total))
        throw Error("train: NaN loss at epoch " + std::to_string(epoch) + " step " +
                    std::to_string(step));
      sum_cls += losses.l_cls->value[0];
      sum_dom += losses.l_dom->value[0];
      sum_total += total;
      ad::backward(losses.l_total);
      optimizer.step(trainable);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.lambda = lambda;
    const int steps = composer.steps_per_epoch();
    entry.l_cls = sum_cls / steps;
    entry.l_dom = sum_dom / steps;
    entry.l_total = sum_total / steps;
    entry.dev_accuracy = evaluate_accuracy(model, data, extraction, dev_ids);
    result.log.push_back(entry);
    result.epochs_run = epoch;

    if (entry.dev_accuracy > result.best_dev_accuracy) {
      result.best_dev_accuracy = entry.dev_accuracy;
      result.best_epoch = epoch;
      result.best_values = model.snapshot_values();
      epochs_since_improvement = 0;
    } else {
      ++epochs_since_improvement;
    }
    if (epochs_since_improvement >= config.patience) break;
  }
  return result;
}

void fit_domain_probe(TdanModel& model, const DomainPairDataset& data,
                      const std::map<int, DomainSpecificWords>& extraction,
                      int epochs, const TrainConfig& config) {
  // Fresh head, frozen features: lambda=0 zeroes every gradient upstream of
  // the reversal layer, so only the head parameters move.
  std::mt19937_64 rng(mix_seed(config.seed, "probe"));
  std::vector<ad::Parameter> head;
  for (auto& p : model.params()) {
    if (p.name == "domain.w") {
      ad::xavier_fill(p.var->value.data(), p.var->value.size(),
                      p.var->rows() + p.var->cols(), rng);
      head.push_back(p);
    } else if (p.name == "domain.bias") {
      std::fill(p.var->value.begin(), p.var->value.end(), 0.0);
      head.push_back(p);
    }
  }
  if (head.size() != 2) throw Error("domain probe: domain head parameters not found");

  ad::Adam optimizer({.lr = config.lr, .weight_decay = config.weight_decay});
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    BatchComposer composer(data.source_labeled, data.target_unlabeled, config.batch / 2,
                           mix_seed(config.seed, "probe-" + std::to_string(epoch)));
    for (int step = 0; step < composer.steps_per_epoch(); ++step) {
      auto batch = composer.next();
      auto losses = compute_losses(model, data, extraction, batch, /*rho=*/1.0,
                                   /*lambda=*/0.0, /*training=*/false, 0);
      ad::backward(losses.l_dom);
      optimizer.step(head);
    }
  }
}

void save_train_log(const std::string& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write training log: " + path);
  for (const auto& e : log) {
    json j;
    j["epoch"] = e.epoch;
    j["lambda"] = e.lambda;
    j["L_cls"] = e.l_cls;
    j["L_dom"] = e.l_dom;
    j["L_total"] = e.l_total;
    j["dev_accuracy"] = e.dev_accuracy;
    out << j.dump() << '\n';
  }
}

}  // namespace tdan
