#include "tdan/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace tdan::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

RowMat effective(const Tensor& t, bool trans) {
  ConstMap m(t.value.data(), t.rows(), t.cols());
  return trans ? RowMat(m.transpose()) : RowMat(m);
}

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

Tensor::Tensor(int rows, int cols, bool rg)
    : value(static_cast<std::size_t>(rows) * cols, 0.0),
      requires_grad(rg),
      rows_(rows),
      cols_(cols) {
  if (rows <= 0 || cols <= 0)
    throw Error("tensor: dimensions must be positive, got " + std::to_string(rows) +
                "x" + std::to_string(cols));
}

std::vector<double>& Tensor::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Var make_tensor(int rows, int cols, bool requires_grad) {
  return std::make_shared<Tensor>(rows, cols, requires_grad);
}

Var make_scalar(double v) {
  auto t = make_tensor(1, 1);
  t->value[0] = v;
  return t;
}

Var from_values(int rows, int cols, std::vector<double> values, bool requires_grad) {
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw Error("from_values: value count does not match shape");
  auto t = make_tensor(rows, cols, requires_grad);
  t->value = std::move(values);
  return t;
}

namespace {

Var result_of(int rows, int cols, std::vector<Var> parents) {
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  auto out = make_tensor(rows, cols, rg);
  out->parents = std::move(parents);
  return out;
}

}  // namespace

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  const int n = trans_a ? a->cols() : a->rows();
  const int m = trans_a ? a->rows() : a->cols();
  const int m2 = trans_b ? b->cols() : b->rows();
  const int p = trans_b ? b->rows() : b->cols();
  if (m != m2)
    throw Error("matmul: shape mismatch " + shape_str(*a) + (trans_a ? "^T" : "") +
                " * " + shape_str(*b) + (trans_b ? "^T" : ""));
  auto out = result_of(n, p, {a, b});
  MutMap(out->value.data(), n, p) = effective(*a, trans_a) * effective(*b, trans_b);
  if (out->requires_grad) {
    Tensor* ap = a.get();
    Tensor* bp = b.get();
    Tensor* op = out.get();
    out->backward_step = [ap, bp, op, trans_a, trans_b, n, m, p] {
      ConstMap g(op->grad.data(), n, p);
      if (ap->requires_grad) {
        RowMat d_eff = g * effective(*bp, trans_b).transpose();  // n x m
        MutMap ga(ap->ensure_grad().data(), ap->rows(), ap->cols());
        if (trans_a)
          ga += d_eff.transpose();
        else
          ga += d_eff;
      }
      if (bp->requires_grad) {
        RowMat d_eff = effective(*ap, trans_a).transpose() * g;  // m x p
        MutMap gb(bp->ensure_grad().data(), bp->rows(), bp->cols());
        if (trans_b)
          gb += d_eff.transpose();
        else
          gb += d_eff;
      }
    };
  }
  return out;
}

Var add(const Var& a, const Var& b) {
  const bool same = a->rows() == b->rows() && a->cols() == b->cols();
  const bool row_broadcast = b->rows() == 1 && b->cols() == a->cols();
  if (!same && !row_broadcast)
    throw Error("add: shape mismatch " + shape_str(*a) + " + " + shape_str(*b));
  auto out = result_of(a->rows(), a->cols(), {a, b});
  for (int r = 0; r < a->rows(); ++r)
    for (int c = 0; c < a->cols(); ++c)
      out->at(r, c) = a->at(r, c) + (same ? b->at(r, c) : b->at(0, c));
  if (out->requires_grad) {
    Tensor* ap = a.get();
    Tensor* bp = b.get();
    Tensor* op = out.get();
    out->backward_step = [ap, bp, op, same] {
      if (ap->requires_grad) {
        auto& ga = ap->ensure_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += op->grad[i];
      }
      if (bp->requires_grad) {
        auto& gb = bp->ensure_grad();
        if (same) {
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += op->grad[i];
        } else {
          for (int r = 0; r < op->rows(); ++r)
            for (int c = 0; c < op->cols(); ++c)
              gb[c] += op->grad[static_cast<std::size_t>(r) * op->cols() + c];
        }
      }
    };
  }
  return out;
}

Var scale(const Var& a, double c) {
  auto out = result_of(a->rows(), a->cols(), {a});
  for (std::size_t i = 0; i < a->value.size(); ++i) out->value[i] = a->value[i] * c;
  if (out->requires_grad) {
    Tensor* ap = a.get();
    Tensor* op = out.get();
    out->backward_step = [ap, op, c] {
      auto& ga = ap->ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * op->grad[i];
    };
  }
  return out;
}

Var relu(const Var& a) {
  auto out = result_of(a->rows(), a->cols(), {a});
  for (std::size_t i = 0; i < a->value.size(); ++i)
    out->value[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
  if (out->requires_grad) {
    Tensor* ap = a.get();
    Tensor* op = out.get();
    out->backward_step = [ap, op] {
      auto& ga = ap->ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i)
        if (ap->value[i] > 0.0) ga[i] += op->grad[i];
    };
  }
  return out;
}

Var tanh_op(const Var& a) {
  auto out = result_of(a->rows(), a->cols(), {a});
  for (std::size_t i = 0; i < a->value.size(); ++i)
    out->value[i] = std::tanh(a->value[i]);
  if (out->requires_grad) {
    Tensor* ap = a.get();
    Tensor* op = out.get();
    out->backward_step = [ap, op] {
      auto& ga = ap->ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga[i] += (1.0 - op->value[i] * op->value[i]) * op->grad[i];
    };
  }
  return out;
}

namespace {

// Shared softmax kernel over a strided lane (row or column).
void softmax_lane(const double* in, double* out, int n, std::ptrdiff_t stride) {
  double mx = kNegInf;
  for (int i = 0; i < n; ++i) mx = std::max(mx, in[i * stride]);
  if (mx == kNegInf) throw Error("softmax: fully masked lane");
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = std::exp(in[i * stride] - mx);
    out[i * stride] = e;
    total += e;
  }
  for (int i = 0; i < n; ++i) out[i * stride] /= total;
}

void softmax_lane_backward(const double* y, const double* gy, double* gx, int n,
                           std::ptrdiff_t stride) {
  double dot = 0.0;
  for (int i = 0; i < n; ++i) dot += y[i * stride] * gy[i * stride];
  for (int i = 0; i < n; ++i)
    gx[i * stride] += y[i * stride] * (gy[i * stride] - dot);
}

}  // namespace

Var softmax(const Var& a, int axis) {
  if (axis != 0 && axis != 1) throw Error("softmax: axis must be 0 or 1");
  auto out = result_of(a->rows(), a->cols(), {a});
  const int rows = a->rows(), cols = a->cols();
  if (axis == 1) {
    for (int r = 0; r < rows; ++r)
      softmax_lane(a->value.data() + static_cast<std::size_t>(r) * cols,
                   out->value.data() + static_cast<std::size_t>(r) * cols, cols, 1);
  } else {
    for (int c = 0; c < cols; ++c)
      softmax_lane(a->value.data() + c, out->value.data() + c, rows, cols);
  }
  if (out->requires_grad) {
    Tensor* ap = a.get();
    Tensor* op = out.get();
    out->backward_step = [ap, op, axis, rows, cols] {
      auto& ga = ap->ensure_grad();
      if (axis == 1) {
        for (int r = 0; r < rows; ++r) {
          const std::size_t off = static_cast<std::size_t>(r) * cols;
          softmax_lane_backward(op->value.data() + off, op->grad.data() + off,
                                ga.data() + off, cols, 1);
        }
      } else {
        for (int c = 0; c < cols; ++c)
          softmax_lane_backward(op->value.data() + c, op->grad.data() + c,
                                ga.data() + c, rows, cols);
      }
    };
  }
  return out;
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw Error("concat: no inputs");
  if (axis != 0 && axis != 1) throw Error("concat: axis must be 0 or 1");
  int rows = parts[0]->rows(), cols = parts[0]->cols();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (axis == 0) {
      if (parts[i]->cols() != cols)
        throw Error("concat: column mismatch " + shape_str(*parts[0]) + " vs " +
                    shape_str(*parts[i]));
      rows += parts[i]->rows();
    } else {
      if (parts[i]->rows() != rows)
        throw Error("concat: row mismatch " + shape_str(*parts[0]) + " vs " +
                    shape_str(*parts[i]));
      cols += parts[i]->cols();
    }
  }
  auto out = result_of(rows, cols, parts);
  if (axis == 0) {
    int r0 = 0;
    for (const auto& p : parts) {
      std::copy(p->value.begin(), p->value.end(),
                out->value.begin() + static_cast<std::size_t>(r0) * cols);
      r0 += p->rows();
    }
  } else {
    int c0 = 0;
    for (const auto& p : parts) {
      for (int r = 0; r < rows; ++r)
        std::copy(p->value.begin() + static_cast<std::size_t>(r) * p->cols(),
                  p->value.begin() + static_cast<std::size_t>(r + 1) * p->cols(),
                  out->value.begin() + static_cast<std::size_t>(r) * cols + c0);
      c0 += p->cols();
    }
  }
  if (out->requires_grad) {
    Tensor* op = out.get();
    std::vector<Tensor*> raw;
    for (const auto& p : parts) raw.push_back(p.get());
    out->backward_step = [op, raw, axis, rows, cols] {
      if (axis == 0) {
        int r0 = 0;
        for (Tensor* p : raw) {
          if (p->requires_grad) {
            auto& gp = p->ensure_grad();
            const std::size_t off = static_cast<std::size_t>(r0) * cols;
            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += op->grad[off + i];
          }
          r0 += p->rows();
        }
      } else {
        int c0 = 0;
        for (Tensor* p : raw) {
          if (p->requires_grad) {
            auto& gp = p->ensure_grad();
            for (int r = 0; r < rows; ++r)
              for (int c = 0; c < p->cols(); ++c)
                gp[static_cast<std::size_t>(r) * p->cols() + c] +=
                    op->grad[static_cast<std::size_t>(r) * cols + c0 + c];
          }
          c0 += p->cols();
        }
      }
    };
  }
  return out;
}

Var embedding_lookup(const Var& table, const std::vector<int>& ids) {
  if (ids.empty()) throw Error("embedding_lookup: empty id list");
  const int d = table->cols();
  for (int id : ids)
    if (id < 0 || id >= table->rows())
      throw Error("embedding_lookup: id " + std::to_string(id) + " out of range 0.." +
                  std::to_string(table->rows() - 1));
  auto out = result_of(static_cast<int>(ids.size()), d, {table});
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy(table->value.begin() + static_cast<std::size_t>(ids[i]) * d,
              table->value.begin() + static_cast<std::size_t>(ids[i] + 1) * d,
              out->value.begin() + i * d);
  if (out->requires_grad) {
    Tensor* tp = table.get();
    Tensor* op = out.get();
    out->backward_step = [tp, op, ids, d] {
      auto& gt = tp->ensure_grad();
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (int c = 0; c < d; ++c)
          gt[static_cast<std::size_t>(ids[i]) * d + c] += op->grad[i * d + c];
    };
  }
  return out;
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const int n = x->rows(), d = x->cols();
  if (gamma->rows() != 1 || gamma->cols() != d || beta->rows() != 1 || beta->cols() != d)
    throw Error("layer_norm: gain/bias must be 1x" + std::to_string(d) + ", got " +
                shape_str(*gamma) + " and " + shape_str(*beta));
  auto out = result_of(n, d, {x, gamma, beta});
  auto xhat = std::make_shared<std::vector<double>>(x->value.size());
  auto inv_std = std::make_shared<std::vector<double>>(n);
  for (int r = 0; r < n; ++r) {
    const double* row = x->value.data() + static_cast<std::size_t>(r) * d;
    double mean = 0.0;
    for (int c = 0; c < d; ++c) mean += row[c];
    mean /= d;
    double var = 0.0;
    for (int c = 0; c < d; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= d;
    const double istd = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = istd;
    for (int c = 0; c < d; ++c) {
      const double xh = (row[c] - mean) * istd;
      (*xhat)[static_cast<std::size_t>(r) * d + c] = xh;
      out->at(r, c) = xh * gamma->value[c] + beta->value[c];
    }
  }
  if (out->requires_grad) {
    Tensor* xp = x.get();
    Tensor* gp = gamma.get();
    Tensor* bp = beta.get();
    Tensor* op = out.get();
    out->backward_step = [xp, gp, bp, op, xhat, inv_std, n, d] {
      for (int r = 0; r < n; ++r) {
        const std::size_t off = static_cast<std::size_t>(r) * d;
        const double* g = op->grad.data() + off;
        const double* xh = xhat->data() + off;
        if (gp->requires_grad) {
          auto& gg = gp->ensure_grad();
          for (int c = 0; c < d; ++c) gg[c] += g[c] * xh[c];
        }
        if (bp->requires_grad) {
          auto& gb = bp->ensure_grad();
          for (int c = 0; c < d; ++c) gb[c] += g[c];
        }
        if (xp->requires_grad) {
          auto& gx = xp->ensure_grad();
          double mean_gxh = 0.0, mean_gxh_xh = 0.0;
          for (int c = 0; c < d; ++c) {
            const double gxh = g[c] * gp->value[c];
            mean_gxh += gxh;
            mean_gxh_xh += gxh * xh[c];
          }
          mean_gxh /= d;
          mean_gxh_xh /= d;
          for (int c = 0; c < d; ++c) {
            const double gxh = g[c] * gp->value[c];
            gx[off + c] += (*inv_std)[r] * (gxh - mean_gxh - xh[c] * mean_gxh_xh);
          }
        }
      }
    };
  }
  return out;
}

Var dropout(const Var& x, double rate, bool training, std::uint64_t seed) {
  if (rate < 0.0 || rate >= 1.0)
    throw Error("dropout: rate must be in [0,1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  std::mt19937_64 rng(mix_seed(seed, "dropout"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto mask = std::make_shared<std::vector<double>>(x->value.size());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& m : *mask) m = unit(rng) < rate ? 0.0 : keep_scale;
  auto out = result_of(x->rows(), x->cols(), {x});
  for (std::size_t i = 0; i < x->value.size(); ++i)
    out->value[i] = x->value[i] * (*mask)[i];
  if (out->requires_grad) {
    Tensor* xp = x.get();
    Tensor* op = out.get();
    out->backward_step = [xp, op, mask] {
      auto& gx = xp->ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += op->grad[i] * (*mask)[i];
    };
  }
  return out;
}

Var cross_entropy(const Var& logits, const std::vector<int>& targets) {
  const int n = logits->rows(), classes = logits->cols();
  if (static_cast<int>(targets.size()) != n)
    throw Error("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                std::to_string(n) + " rows");
  for (int t : targets)
    if (t < 0 || t >= classes)
      throw Error("cross_entropy: target " + std::to_string(t) + " out of range");
  auto probs = std::make_shared<std::vector<double>>(logits->value.size());
  double loss = 0.0;
  for (int r = 0; r < n; ++r) {
    const double* row = logits->value.data() + static_cast<std::size_t>(r) * classes;
    double mx = row[0];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double total = 0.0;
    for (int c = 0; c < classes; ++c) total += std::exp(row[c] - mx);
    const double lse = mx + std::log(total);
    loss += lse - row[targets[r]];
    for (int c = 0; c < classes; ++c)
      (*probs)[static_cast<std::size_t>(r) * classes + c] = std::exp(row[c] - lse);
  }
  auto out = result_of(1, 1, {logits});
  out->value[0] = loss / n;
  if (out->requires_grad) {
    Tensor* lp = logits.get();
    Tensor* op = out.get();
    out->backward_step = [lp, op, probs, targets, n, classes] {
      auto& gl = lp->ensure_grad();
      const double g = op->grad[0] / n;
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < classes; ++c) {
          const std::size_t i = static_cast<std::size_t>(r) * classes + c;
          gl[i] += g * ((*probs)[i] - (c == targets[r] ? 1.0 : 0.0));
        }
    };
  }
  return out;
}

Var gradient_reversal(const Var& x, double lambda) {
  if (lambda < 0.0) throw Error("gradient_reversal: lambda must be >= 0");
  auto out = result_of(x->rows(), x->cols(), {x});
  out->value = x->value;
  if (out->requires_grad) {
    Tensor* xp = x.get();
    Tensor* op = out.get();
    out->backward_step = [xp, op, lambda] {
      auto& gx = xp->ensure_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += -lambda * op->grad[i];
    };
  }
  return out;
}

Var sum(const Var& a) {
  auto out = result_of(1, 1, {a});
  double total = 0.0;
  for (double v : a->value) total += v;
  out->value[0] = total;
  if (out->requires_grad) {
    Tensor* ap = a.get();
    Tensor* op = out.get();
    out->backward_step = [ap, op] {
      auto& ga = ap->ensure_grad();
      for (auto& g : ga) g += op->grad[0];
    };
  }
  return out;
}

void backward(const Var& loss) {
  if (!loss->is_scalar())
    throw Error("backward: loss must be scalar, got " + shape_str(*loss));
  if (!loss->requires_grad) return;

  // Post-order DFS over parent edges; reversed it visits every consumer
  // before its producer.
  std::vector<Tensor*> order;
  std::unordered_set<Tensor*> visited;
  struct Frame {
    Tensor* node;
    std::size_t next;
  };
  std::vector<Frame> stack;
  stack.push_back({loss.get(), 0});
  visited.insert(loss.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      Tensor* p = f.node->parents[f.next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  for (Tensor* t : order) {
    auto& g = t->ensure_grad();
    std::fill(g.begin(), g.end(), 0.0);
  }
  loss->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_step) (*it)->backward_step();
}

void xavier_fill(double* data, std::size_t n, int fan_sum, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / fan_sum);
  std::uniform_real_distribution<double> d(-limit, limit);
  for (std::size_t i = 0; i < n; ++i) data[i] = d(rng);
}

Parameter xavier_parameter(const std::string& name, int rows, int cols,
                           std::mt19937_64& rng) {
  auto t = make_tensor(rows, cols, /*requires_grad=*/true);
  xavier_fill(t->value.data(), t->value.size(), rows + cols, rng);
  return {name, std::move(t)};
}

Parameter constant_parameter(const std::string& name, int rows, int cols, double fill) {
  auto t = make_tensor(rows, cols, /*requires_grad=*/true);
  std::fill(t->value.begin(), t->value.end(), fill);
  return {name, std::move(t)};
}

}  // namespace tdan::ad
