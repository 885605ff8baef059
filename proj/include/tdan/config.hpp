#pragma once

#include <optional>
#include <string>

#include "tdan/corpus.hpp"
#include "tdan/lda.hpp"
#include "tdan/model.hpp"
#include "tdan/train.hpp"

namespace tdan {

// Aggregate configuration consumed by the CLI. Loaded from versioned JSON;
// unknown keys are rejected so typos fail fast.
struct RunConfig {
  std::string task = "S-T";
  std::uint64_t seed = 0;
  double tol = 0.08;
  int vocab_min_freq = 2;
  int dev_size = 1000;

  LdaConfig lda;
  ModelConfig model;  // vocab_size filled from the dataset at model build time
  TrainConfig train;

  std::string source_corpus;
  std::string target_corpus;
  std::string embeddings;  // optional; empty means random init
  std::string out_dir = ".";

  std::optional<SyntheticSpec> synthetic;
};

RunConfig load_run_config(const std::string& path);

}  // namespace tdan
