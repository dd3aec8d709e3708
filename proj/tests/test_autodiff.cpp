#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "epsfd/random.hpp"
#include "epsfd/tensor.hpp"

using namespace epsfd;
using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, RandomStream& rng, double lo, double hi,
                     bool requires_grad = true) {
  std::int64_t n = ad::shape_size(shape);
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

double run_backward(const std::function<Tensor()>& f) {
  ad::Graph g;
  ad::Graph::Scope scope(g);
  Tensor loss = f();
  double value = loss.item();
  g.backward(loss);
  return value;
}

}  // namespace

TEST_CASE("op examples: hand arithmetic") {
  Tensor a = Tensor::from_values({2, 2}, {1, 2, 3, 4});
  Tensor b = Tensor::from_values({2, 1}, {1, 1});
  Tensor y = ad::matmul(a, b);
  CHECK(y.values() == std::vector<double>{3, 7});

  CHECK(ad::tanh(Tensor::scalar(0.0)).item() == 0.0);
  CHECK(ad::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  CHECK(ad::mean(Tensor::from_values({4}, {1, 2, 3, 4})).item() == 2.5);
}

TEST_CASE("shape mismatch errors name the op and both shapes") {
  Tensor a = Tensor::zeros({2, 3});
  Tensor b = Tensor::zeros({2, 2});
  try {
    ad::add(a, b);
    FAIL("expected an exception");
  } catch (const std::invalid_argument& ex) {
    std::string msg = ex.what();
    CHECK(msg.find("add") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[2,2]") != std::string::npos);
  }
  CHECK_THROWS_AS(ad::matmul(a, a), std::invalid_argument);
}

TEST_CASE("backward: sum of squares and mean") {
  Tensor x = Tensor::from_values({3}, {1, 2, 3}, true);
  run_backward([&]() { return ad::sum(ad::mul(x, x)); });
  CHECK(x.grad() == std::vector<double>{2, 4, 6});

  Tensor y = Tensor::from_values({4}, {1, 2, 3, 4}, true);
  run_backward([&]() { return ad::mean(y); });
  CHECK(y.grad() == std::vector<double>{0.25, 0.25, 0.25, 0.25});
}

TEST_CASE("backward: tanh(w * 1) at w = 0.5 matches the analytic derivative") {
  Tensor w = Tensor::scalar(0.5, true);
  run_backward([&]() { return ad::tanh(w); });
  double expected = 1.0 - std::tanh(0.5) * std::tanh(0.5);
  CHECK(std::fabs(w.grad()[0] - expected) < 1e-12);

  // and agrees with central differences at step 1e-6 to <= 1e-8
  double step = 1e-6;
  double fd = (std::tanh(0.5 + step) - std::tanh(0.5 - step)) / (2 * step);
  CHECK(std::fabs(w.grad()[0] - fd) <= 1e-8);
}

TEST_CASE("gradients accumulate additively across multiple uses") {
  Tensor x = Tensor::from_values({2}, {1.0, -2.0}, true);
  run_backward([&]() { return ad::sum(ad::add(x, x)); });
  CHECK(x.grad() == std::vector<double>{2, 2});
}

TEST_CASE("backward requires a scalar root") {
  Tensor x = Tensor::from_values({2}, {1, 2}, true);
  ad::Graph g;
  ad::Graph::Scope scope(g);
  Tensor y = ad::mul(x, x);
  CHECK_THROWS_AS(g.backward(y), std::invalid_argument);
}

TEST_CASE("gradient-check property: every op kind on 100 random tensors") {
  // abs/relu/hinge inputs are kept away from their kinks, log away from 0.
  RandomStream rng(2024);
  for (const auto& op : ad::op_kinds()) {
    int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
      std::vector<std::pair<std::string, Tensor>> params;
      std::vector<Tensor> inputs;
      double c = 0.0;
      auto add_input = [&](ad::Shape shape, double lo, double hi) {
        Tensor t = random_tensor(std::move(shape), rng, lo, hi);
        inputs.push_back(t);
        params.emplace_back("in" + std::to_string(inputs.size()), t);
      };

      if (op == "add" || op == "sub" || op == "mul") {
        add_input({2, 3}, -2, 2);
        add_input({2, 3}, -2, 2);
      } else if (op == "add_rowvec" || op == "mul_rowvec") {
        add_input({3, 4}, -2, 2);
        add_input({4}, -2, 2);
      } else if (op == "matmul") {
        add_input({2, 3}, -2, 2);
        add_input({3, 2}, -2, 2);
      } else if (op == "concat") {
        add_input({2, 2}, -2, 2);
        add_input({2, 3}, -2, 2);
      } else if (op == "log") {
        add_input({2, 3}, 0.5, 3.0);
      } else if (op == "abs" || op == "relu") {
        add_input({2, 3}, 0.1, 2.0);
        if (trial % 2) {
          for (auto& v : inputs[0].values()) v = -v;  // negative branch too
        }
      } else if (op == "hinge_above" || op == "hinge_below") {
        add_input({2, 3}, -2, 2);
        c = 0.5;
        // keep a margin from the hinge at c
        for (auto& v : inputs[0].values())
          if (std::fabs(v - c) < 0.05) v += 0.2;
      } else if (op == "scale" || op == "add_scalar") {
        add_input({2, 3}, -2, 2);
        c = 1.7;
      } else if (op == "slice") {
        add_input({2, 6}, -2, 2);
        c = 2;  // start column
      } else {
        add_input({2, 3}, -2, 2);
      }

      auto f = [&]() { return ad::sum(ad::apply(op, inputs, c)); };
      auto report = ad::finite_difference_check(f, params, 1e-6, 1e-5);
      if (!report.all_ok) {
        CAPTURE(op);
        CAPTURE(report.max_rel_err);
      }
      REQUIRE(report.all_ok);
    }
  }
}

TEST_CASE("linearity: grad(a*L1 + b*L2) == a*grad(L1) + b*grad(L2)") {
  RandomStream rng(5);
  Tensor x = random_tensor({4}, rng, -2, 2);  // power-of-two size keeps mean exact
  double a = 2.0, b = 0.5;

  auto loss1 = [&]() { return ad::sum(ad::square(x)); };
  auto loss2 = [&]() { return ad::mean(ad::mul(x, x)); };

  x.zero_grad();
  run_backward(loss1);
  std::vector<double> g1 = x.grad();
  x.zero_grad();
  run_backward(loss2);
  std::vector<double> g2 = x.grad();
  x.zero_grad();
  run_backward([&]() {
    return ad::add(ad::scale(loss1(), a), ad::scale(loss2(), b));
  });
  for (std::size_t i = 0; i < g1.size(); ++i)
    CHECK(std::fabs(x.grad()[i] - (a * g1[i] + b * g2[i])) < 1e-12);
}

TEST_CASE("re-running backward after graph reset is bit-identical") {
  RandomStream rng(6);
  Tensor x = random_tensor({3, 3}, rng, -1, 1);
  Tensor w = random_tensor({3, 3}, rng, -1, 1);
  auto f = [&]() { return ad::mean(ad::square(ad::matmul(x, w))); };

  x.zero_grad();
  w.zero_grad();
  run_backward(f);
  std::vector<double> gx = x.grad(), gw = w.grad();

  x.zero_grad();
  w.zero_grad();
  run_backward(f);
  CHECK(x.grad() == gx);
  CHECK(w.grad() == gw);
}

TEST_CASE("finite_difference_check: quadratic form is exact up to rounding") {
  RandomStream rng(7);
  Tensor x = random_tensor({5}, rng, -2, 2);
  auto f = [&]() { return ad::sum(ad::square(x)); };
  auto report = ad::finite_difference_check(f, {{"x", x}}, 1e-6, 1e-7);
  CHECK(report.all_ok);
  CHECK(report.max_rel_err < 1e-7);
}

TEST_CASE("finite_difference_check flags an intentionally wrong gradient rule") {
  Tensor x = Tensor::from_values({2}, {0.7, -0.4}, true);
  // Custom op with a deliberately wrong backward (claims d/dx x^2 = 3).
  auto wrong_square = [&]() {
    Tensor out = Tensor::from_values(x.shape(),
                                     {x.values()[0] * x.values()[0],
                                      x.values()[1] * x.values()[1]});
    if (ad::Graph::active()) {
      out.set_requires_grad(true);
      auto xi = x.impl();
      auto oi = out.impl();
      ad::Graph::active()->record("wrong_square", {xi}, oi, [xi, oi]() {
        for (std::size_t i = 0; i < xi->grad.size(); ++i)
          xi->grad[i] += oi->grad[i] * 3.0;
      });
    }
    return ad::sum(out);
  };
  auto report = ad::finite_difference_check(wrong_square, {{"x", x}}, 1e-6, 1e-5);
  CHECK_FALSE(report.all_ok);
  CHECK(report.entries[0].max_rel_err > 1e-2);
}
