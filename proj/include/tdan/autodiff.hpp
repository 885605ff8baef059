#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tdan/common.hpp"

namespace tdan::ad {

class Tensor;
using Var = std::shared_ptr<Tensor>;

// Dense 2D tensor (row-major) doubling as a node of the computation graph.
// Vectors are 1 x d or n x 1; scalars are 1 x 1. Ops record a backward step
// on the result node; backward() replays them in reverse topological order.
class Tensor {
 public:
  Tensor(int rows, int cols, bool requires_grad);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return value.size(); }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }

  double& at(int r, int c) { return value[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const {
    return value[static_cast<std::size_t>(r) * cols_ + c];
  }

  // Allocates grad storage on demand; zero-filled.
  std::vector<double>& ensure_grad();

  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<Var> parents;
  std::function<void()> backward_step;

 private:
  int rows_;
  int cols_;
};

Var make_tensor(int rows, int cols, bool requires_grad = false);
Var make_scalar(double v);
Var from_values(int rows, int cols, std::vector<double> values,
                bool requires_grad = false);

// --- differentiable ops ------------------------------------------------

// (trans_a ? a^T : a) * (trans_b ? b^T : b)
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);

// Same shape, or b broadcast as a 1 x cols row vector.
Var add(const Var& a, const Var& b);

Var scale(const Var& a, double c);
Var relu(const Var& a);
Var tanh_op(const Var& a);

// axis 1: each row sums to 1; axis 0: each column sums to 1. -inf entries
// come out exactly 0; a fully masked row/column is an error.
Var softmax(const Var& a, int axis);

Var concat(const std::vector<Var>& parts, int axis);

// table is V x d; result stacks the looked-up rows. Gradients scatter-add
// back into the table.
Var embedding_lookup(const Var& table, const std::vector<int>& ids);

// Row-wise layer normalization with learnable gain/bias (both 1 x d).
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

// Inverted dropout; identity when training is false. Deterministic per seed.
Var dropout(const Var& x, double rate, bool training, std::uint64_t seed);

// Mean negative log-likelihood over rows of logits (n x C) at the target
// class indices.
Var cross_entropy(const Var& logits, const std::vector<int>& targets);

// Identity forward; backward multiplies the upstream gradient by -lambda.
Var gradient_reversal(const Var& x, double lambda);

Var sum(const Var& a);

// Populates grads of every reachable requires_grad tensor. loss must be
// scalar. Reachable grads are zeroed first, so each call yields exactly the
// gradients of this graph.
void backward(const Var& loss);

// --- parameters ---------------------------------------------------------

struct Parameter {
  std::string name;
  Var var;
};

// Xavier-uniform matrix parameter: U(-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))).
Parameter xavier_parameter(const std::string& name, int rows, int cols,
                           std::mt19937_64& rng);
Parameter constant_parameter(const std::string& name, int rows, int cols, double fill);

void xavier_fill(double* data, std::size_t n, int fan_sum, std::mt19937_64& rng);

}  // namespace tdan::ad
