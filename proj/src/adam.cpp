#include "tdan/adam.hpp"

#include <cmath>

namespace tdan::ad {

void Adam::step(std::vector<Parameter>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].var->size(), 0.0);
      v_[i].assign(params[i].var->size(), 0.0);
    }
  }
  if (m_.size() != params.size())
    throw Error("adam: parameter list changed between steps");

  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, step_);
  const double bc2 = 1.0 - std::pow(config_.beta2, step_);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = *params[i].var;
    if (m_[i].size() != t.size())
      throw Error("adam: parameter '" + params[i].name + "' changed shape");
    auto& grad = t.ensure_grad();
    for (std::size_t j = 0; j < t.size(); ++j) {
      double g = grad[j];
      if (std::isnan(g))
        throw Error("adam: NaN gradient in parameter '" + params[i].name + "'");
      g += config_.weight_decay * t.value[j];
      m_[i][j] = config_.beta1 * m_[i][j] + (1.0 - config_.beta1) * g;
      v_[i][j] = config_.beta2 * v_[i][j] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m_[i][j] / bc1;
      const double v_hat = v_[i][j] / bc2;
      t.value[j] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
  }
}

}  // namespace tdan::ad
