#include <doctest.h>

#include <cmath>

#include "tdan/adam.hpp"
#include "tdan/autodiff.hpp"
#include "test_util.hpp"

using namespace tdan;
using namespace tdan::ad;
using tdan::testutil::grad_check;
using tdan::testutil::random_leaf;
using tdan::testutil::rank1_loss;

namespace {

// Random values bounded away from zero, for ops with a kink at the origin.
Var random_leaf_away_from_zero(int rows, int cols, std::uint64_t seed) {
  Var t = random_leaf(rows, cols, seed);
  for (auto& v : t->value) v += v >= 0.0 ? 0.2 : -0.2;
  return t;
}

}  // namespace

TEST_CASE("matmul gradients match finite differences") {
  Var a = random_leaf(3, 4, 1);
  Var b = random_leaf(4, 5, 2);
  CHECK(grad_check({a, b}, [&] { return rank1_loss(matmul(a, b)); }) < 1e-4);

  Var bt = random_leaf(5, 4, 3);
  CHECK(grad_check({a, bt}, [&] { return rank1_loss(matmul(a, bt, false, true)); }) <
        1e-4);
  Var at = random_leaf(4, 3, 4);
  CHECK(grad_check({at, b}, [&] { return rank1_loss(matmul(at, b, true, false)); }) <
        1e-4);
  CHECK(grad_check({at, bt}, [&] { return rank1_loss(matmul(at, bt, true, true)); }) <
        1e-4);
}

TEST_CASE("matmul rejects mismatched shapes naming the op") {
  Var a = random_leaf(2, 3, 1);
  Var b = random_leaf(4, 5, 2);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("matmul"), Error);
}

TEST_CASE("add gradients, same shape and row broadcast") {
  Var a = random_leaf(3, 4, 5);
  Var b = random_leaf(3, 4, 6);
  CHECK(grad_check({a, b}, [&] { return rank1_loss(add(a, b)); }) < 1e-4);

  Var bias = random_leaf(1, 4, 7);
  CHECK(grad_check({a, bias}, [&] { return rank1_loss(add(a, bias)); }) < 1e-4);

  Var bad = random_leaf(2, 2, 8);
  CHECK_THROWS_WITH_AS(add(a, bad), doctest::Contains("add"), Error);
}

TEST_CASE("scale, relu and tanh gradients") {
  Var a = random_leaf(3, 4, 9);
  CHECK(grad_check({a}, [&] { return rank1_loss(scale(a, -2.5)); }) < 1e-4);

  Var r = random_leaf_away_from_zero(3, 4, 10);
  CHECK(grad_check({r}, [&] { return rank1_loss(relu(r)); }) < 1e-4);

  CHECK(grad_check({a}, [&] { return rank1_loss(tanh_op(a)); }) < 1e-4);
}

TEST_CASE("softmax outputs and gradients") {
  SUBCASE("equal logits split evenly") {
    Var x = from_values(1, 2, {0.7, 0.7});
    Var y = softmax(x, 1);
    CHECK(y->value[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y->value[1] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("rows sum to one and stay positive") {
    Var x = random_leaf(4, 6, 11);
    Var y = softmax(x, 1);
    for (int r = 0; r < 4; ++r) {
      double s = 0.0;
      for (int c = 0; c < 6; ++c) {
        CHECK(y->at(r, c) > 0.0);
        s += y->at(r, c);
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  SUBCASE("gradients, both axes") {
    Var x = random_leaf(3, 4, 12);
    CHECK(grad_check({x}, [&] { return rank1_loss(softmax(x, 1)); }) < 1e-4);
    CHECK(grad_check({x}, [&] { return rank1_loss(softmax(x, 0)); }) < 1e-4);
  }
  SUBCASE("-inf entries come out exactly zero") {
    const double inf = std::numeric_limits<double>::infinity();
    Var x = from_values(1, 3, {0.2, -inf, 1.0});
    Var y = softmax(x, 1);
    CHECK(y->value[1] == 0.0);
    CHECK(y->value[0] + y->value[2] == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("fully masked lane fails loudly") {
    const double inf = std::numeric_limits<double>::infinity();
    Var x = from_values(1, 2, {-inf, -inf});
    CHECK_THROWS_WITH_AS(softmax(x, 1), doctest::Contains("masked"), Error);
  }
}

TEST_CASE("concat gradients along both axes") {
  Var a = random_leaf(2, 3, 13);
  Var b = random_leaf(4, 3, 14);
  CHECK(grad_check({a, b}, [&] { return rank1_loss(concat({a, b}, 0)); }) < 1e-4);

  Var c = random_leaf(2, 5, 15);
  CHECK(grad_check({a, c}, [&] { return rank1_loss(concat({a, c}, 1)); }) < 1e-4);

  CHECK_THROWS_WITH_AS(concat({a, c}, 0), doctest::Contains("concat"), Error);
}

TEST_CASE("embedding_lookup accumulates gradients over repeated ids") {
  Var table = random_leaf(5, 3, 16);
  const std::vector<int> ids{1, 3, 1, 0};
  CHECK(grad_check({table}, [&] { return rank1_loss(embedding_lookup(table, ids)); }) <
        1e-4);
  CHECK_THROWS_AS(embedding_lookup(table, {7}), Error);
}

TEST_CASE("layer_norm gradients for input, gain and bias") {
  Var x = random_leaf(3, 6, 17);
  Var gain = random_leaf(1, 6, 18);
  Var bias = random_leaf(1, 6, 19);
  CHECK(grad_check({x, gain, bias},
                   [&] { return rank1_loss(layer_norm(x, gain, bias)); }) < 1e-4);
}

TEST_CASE("dropout") {
  Var x = random_leaf(4, 5, 20);
  SUBCASE("eval mode is the identity") {
    Var y = dropout(x, 0.5, /*training=*/false, 1);
    CHECK(y == x);
  }
  SUBCASE("training mode with a fixed mask is differentiable") {
    CHECK(grad_check({x}, [&] { return rank1_loss(dropout(x, 0.4, true, 99)); }) <
          1e-4);
  }
  SUBCASE("same seed, same mask") {
    Var y1 = dropout(x, 0.4, true, 7);
    Var y2 = dropout(x, 0.4, true, 7);
    CHECK(y1->value == y2->value);
  }
  SUBCASE("rate out of range") {
    CHECK_THROWS_AS(dropout(x, 1.0, true, 1), Error);
  }
}

TEST_CASE("cross_entropy closed forms and gradients") {
  SUBCASE("near-one-hot prediction costs nothing") {
    Var logits = from_values(1, 2, {30.0, 0.0});
    Var loss = cross_entropy(logits, {0});
    CHECK(loss->value[0] == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("uniform binary prediction costs ln 2") {
    Var logits = from_values(1, 2, {0.0, 0.0});
    Var loss = cross_entropy(logits, {1});
    CHECK(loss->value[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("gradient matches finite differences") {
    Var logits = random_leaf(4, 3, 21);
    logits->requires_grad = true;
    const std::vector<int> targets{0, 2, 1, 2};
    CHECK(grad_check({logits}, [&] { return cross_entropy(logits, targets); }) < 1e-4);
  }
  SUBCASE("target count must match rows") {
    Var logits = random_leaf(2, 2, 22);
    CHECK_THROWS_AS(cross_entropy(logits, {0}), Error);
  }
}

TEST_CASE("gradient reversal contract") {
  SUBCASE("forward is the identity") {
    Var x = from_values(1, 2, {1.5, -2.0}, true);
    Var y = gradient_reversal(x, 0.7);
    CHECK(y->value == std::vector<double>{1.5, -2.0});
  }
  SUBCASE("backward multiplies upstream by -lambda") {
    Var x = from_values(1, 2, {3.0, 4.0}, true);
    Var y = gradient_reversal(x, 0.1);
    ad::backward(sum(y));  // upstream grad (1, 1)
    CHECK(x->grad[0] == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(x->grad[1] == doctest::Approx(-0.1).epsilon(1e-15));

    // upstream (1, -2): scale the summands
    Var x2 = from_values(1, 2, {3.0, 4.0}, true);
    Var y2 = gradient_reversal(x2, 0.1);
    Var weights = from_values(2, 1, {1.0, -2.0});
    ad::backward(matmul(y2, weights));
    CHECK(x2->grad[0] == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK(x2->grad[1] == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("lambda zero blocks the gradient") {
    Var x = from_values(1, 3, {1.0, 2.0, 3.0}, true);
    ad::backward(sum(gradient_reversal(x, 0.0)));
    for (double g : x->grad) CHECK(g == 0.0);
  }
  SUBCASE("matches finite differences of the -lambda-scaled composite") {
    const double lambda = 0.3;
    Var x = random_leaf(2, 3, 23);
    Var loss = rank1_loss(gradient_reversal(x, lambda), 77);
    ad::backward(loss);
    const auto analytic = x->grad;

    // numeric gradient of the same composite without the reversal
    Var plain_loss = rank1_loss(x, 77);
    double max_err = 0.0;
    const double h = 1e-5;
    for (std::size_t i = 0; i < x->value.size(); ++i) {
      const double saved = x->value[i];
      x->value[i] = saved + h;
      const double up = rank1_loss(x, 77)->value[0];
      x->value[i] = saved - h;
      const double down = rank1_loss(x, 77)->value[0];
      x->value[i] = saved;
      const double fd = -lambda * (up - down) / (2.0 * h);
      max_err = std::max(max_err, testutil::rel_err(analytic[i], fd));
    }
    CHECK(max_err < 1e-4);
    (void)plain_loss;
  }
  SUBCASE("negative lambda is rejected") {
    Var x = random_leaf(1, 2, 24);
    CHECK_THROWS_AS(gradient_reversal(x, -0.5), Error);
  }
}

TEST_CASE("backward basics") {
  SUBCASE("sum of a parameter gives all-ones gradient") {
    Var p = random_leaf(3, 3, 25);
    ad::backward(sum(p));
    for (double g : p->grad) CHECK(g == 1.0);
  }
  SUBCASE("zero-scaled loss gives all-zeros gradient") {
    Var p = random_leaf(3, 3, 26);
    ad::backward(sum(scale(p, 0.0)));
    for (double g : p->grad) CHECK(g == 0.0);
  }
  SUBCASE("non-scalar loss is rejected") {
    Var p = random_leaf(2, 2, 27);
    CHECK_THROWS_AS(ad::backward(p), Error);
  }
  SUBCASE("two-layer tanh network matches finite differences") {
    Var x = random_leaf(1, 4, 28);
    Var w1 = random_leaf(5, 4, 29);
    Var b1 = random_leaf(1, 5, 30);
    Var w2 = random_leaf(3, 5, 31);
    Var b2 = random_leaf(1, 3, 32);
    auto net = [&] {
      Var h = tanh_op(add(matmul(x, w1, false, true), b1));
      Var out = tanh_op(add(matmul(h, w2, false, true), b2));
      return rank1_loss(out);
    };
    CHECK(grad_check({x, w1, b1, w2, b2}, net) < 1e-4);
  }
  SUBCASE("shared subexpressions accumulate") {
    Var p = random_leaf(2, 2, 33);
    Var doubled = add(p, p);
    ad::backward(sum(doubled));
    for (double g : p->grad) CHECK(g == 2.0);
  }
}

TEST_CASE("adam update") {
  AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.0;

  SUBCASE("zero gradient is a fixed point") {
    std::vector<Parameter> params{constant_parameter("p", 2, 2, 0.5)};
    Adam opt(cfg);
    opt.step(params);
    for (double v : params[0].var->value) CHECK(v == 0.5);
  }
  SUBCASE("first step with unit gradient moves by about -lr") {
    std::vector<Parameter> params{constant_parameter("p", 1, 1, 1.0)};
    params[0].var->ensure_grad()[0] = 1.0;
    Adam opt(cfg);
    opt.step(params);
    CHECK(params[0].var->value[0] == doctest::Approx(1.0 - cfg.lr).epsilon(1e-6));
    // gradients are cleared afterwards
    CHECK(params[0].var->grad[0] == 0.0);
  }
  SUBCASE("identical parameters receive identical updates") {
    std::vector<Parameter> params{constant_parameter("a", 2, 1, 0.3),
                                  constant_parameter("b", 2, 1, 0.3)};
    for (auto& p : params) {
      p.var->ensure_grad()[0] = 0.7;
      p.var->ensure_grad()[1] = -0.2;
    }
    Adam opt(cfg);
    opt.step(params);
    CHECK(params[0].var->value == params[1].var->value);
  }
  SUBCASE("NaN gradients abort loudly") {
    std::vector<Parameter> params{constant_parameter("p", 1, 1, 0.0)};
    params[0].var->ensure_grad()[0] = std::nan("");
    Adam opt(cfg);
    CHECK_THROWS_WITH_AS(opt.step(params), doctest::Contains("NaN"), Error);
  }
  SUBCASE("weight decay pulls weights toward zero") {
    AdamConfig wd = cfg;
    wd.weight_decay = 0.1;
    std::vector<Parameter> params{constant_parameter("p", 1, 1, 2.0)};
    Adam opt(wd);
    opt.step(params);
    CHECK(params[0].var->value[0] < 2.0);
  }
}

TEST_CASE("xavier initialization has the expected variance") {
  std::mt19937_64 rng(5);
  Parameter p = xavier_parameter("w", 300, 300, rng);
  double mean = 0.0;
  for (double v : p.var->value) mean += v;
  mean /= p.var->size();
  double var = 0.0;
  for (double v : p.var->value) var += (v - mean) * (v - mean);
  var /= p.var->size();
  const double expected = 2.0 / (300 + 300);
  CHECK(var > 0.75 * expected);
  CHECK(var < 1.25 * expected);
}
