#pragma once

#include <vector>

#include "tdan/autodiff.hpp"

namespace tdan::ad {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 5e-5;
};

// Adam with classic coupled L2 decay (decay added to the gradient before the
// moment update). Moments are kept positionally, so the parameter list bound
// at step() must stay stable across calls.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  // Applies one update to every parameter and clears the gradients.
  // Throws on NaN gradients.
  void step(std::vector<Parameter>& params);

  int step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  int step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace tdan::ad
