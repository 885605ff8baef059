#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tdan/adam.hpp"
#include "tdan/corpus.hpp"
#include "tdan/dsw.hpp"
#include "tdan/model.hpp"

namespace tdan {

struct TrainConfig {
  double rho = 1.0;
  double lr = 2e-4;
  double weight_decay = 5e-5;
  int batch = 40;  // half source, half target
  int max_epochs = 50;
  int patience = 10;
  double lambda_cap = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// min(2/(1+exp(-10 t/T)) - 1, cap); 0 at t=0, nondecreasing, capped.
double lambda_schedule(int t, int max_epochs, double cap);

// One balanced batch: batch/2 labeled source documents and batch/2 target
// documents. An epoch's sequence of batches is a deterministic function of
// the seed; the smaller pool cycles with a reshuffle.
class BatchComposer {
 public:
  struct Batch {
    std::vector<int> source;
    std::vector<int> target;
  };

  BatchComposer(std::vector<int> source_ids, std::vector<int> target_ids, int half,
                std::uint64_t seed);

  Batch next();
  int steps_per_epoch() const { return steps_; }

 private:
  int take(std::vector<int>& pool, std::size_t& cursor);

  std::vector<int> source_;
  std::vector<int> target_;
  std::size_t source_cursor_ = 0;
  std::size_t target_cursor_ = 0;
  int half_;
  int steps_;
  std::mt19937_64 rng_;
};

struct LossBreakdown {
  ad::Var l_cls;
  ad::Var l_dom;
  ad::Var l_total;
};

// L_cls over the labeled source half only; L_dom over the whole batch;
// L_total = L_cls + rho * L_dom.
LossBreakdown compute_losses(TdanModel& model, const DomainPairDataset& data,
                             const std::map<int, DomainSpecificWords>& extraction,
                             const BatchComposer::Batch& batch, double rho,
                             double lambda, bool training,
                             std::uint64_t dropout_seed);

// Fraction of documents whose argmax sentiment prediction matches the label.
double evaluate_accuracy(TdanModel& model, const DomainPairDataset& data,
                         const std::map<int, DomainSpecificWords>& extraction,
                         const std::vector<int>& doc_ids);

// Fraction with correct domain prediction (source=0, target=1).
double domain_accuracy(TdanModel& model, const DomainPairDataset& data,
                       const std::map<int, DomainSpecificWords>& extraction,
                       const std::vector<int>& doc_ids);

struct EpochLog {
  int epoch = 0;
  double lambda = 0.0;
  double l_cls = 0.0;
  double l_dom = 0.0;
  double l_total = 0.0;
  double dev_accuracy = 0.0;
};

struct TrainResult {
  std::vector<std::vector<double>> best_values;  // parameter snapshot at best dev
  double best_dev_accuracy = 0.0;
  int best_epoch = 0;
  int epochs_run = 0;
  std::vector<EpochLog> log;
};

// Full loop: per-epoch lambda from the schedule, balanced batches, Adam
// updates, dev evaluation each epoch, early stop after `patience` epochs
// without strict improvement. The model is left at its final-epoch values;
// result.best_values holds the best-dev checkpoint.
TrainResult train(TdanModel& model, const DomainPairDataset& data,
                  const std::map<int, DomainSpecificWords>& extraction,
                  const std::vector<int>& dev_ids, const TrainConfig& config);

// Re-initializes the domain head and fits it alone (lambda=0 freezes every
// upstream parameter through the reversal layer) to measure how much domain
// information the frozen features still carry.
void fit_domain_probe(TdanModel& model, const DomainPairDataset& data,
                      const std::map<int, DomainSpecificWords>& extraction,
                      int epochs, const TrainConfig& config);

void save_train_log(const std::string& path, const std::vector<EpochLog>& log);

}  // namespace tdan
