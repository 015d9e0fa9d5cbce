#include "doctest.h"

#include "adaspider/optimizers.hpp"
#include "adaspider/problems.hpp"

#include <cmath>

using namespace adaspider;

namespace {

ParamVector scalar(double v) { return ParamVector::Constant(1, v); }

class ZeroProblem final : public FiniteSumProblem {
 public:
  ZeroProblem(std::size_t n, std::size_t d) : n_(n), d_(d) {}
  std::size_t num_components() const override { return n_; }
  std::size_t dim() const override { return d_; }

 protected:
  double value_impl(std::size_t, const ParamVector&) const override { return 1.0; }
  ParamVector gradient_impl(std::size_t, const ParamVector&) const override { return ParamVector::Zero(d_); }

 private:
  std::size_t n_, d_;
};

// f_1 = x^2, f_2 = 2x^2.
QuadraticProblem two_component() { return scalar_quadratic({2.0, 4.0}); }

RegularizedErm small_logistic(std::size_t n = 16, std::size_t d = 5) {
  SyntheticSpec spec;
  spec.n = n;
  spec.d = d;
  return RegularizedErm(generate_synthetic(spec).data, LossKind::Logistic, 0.1);
}

}  // namespace

TEST_CASE("adaptive step size arithmetic") {
  CHECK(adaspider_step_size(16, 1.0, 1.0, 0.0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(adaspider_step_size(16, 1.0, 1.0, 12.0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(adaspider_step_size(1, 2.0, 3.0, 0.0) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK_THROWS_AS(adaspider_step_size(16, 1.0, 1.0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(adaspider_step_size(16, 0.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(adaspider_step_size(0, 1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("spider step size") {
  CHECK(spider_step_size(16, 0.01, 100.0, 1.0) == doctest::Approx(2.5e-5).epsilon(1e-15));
  CHECK(spider_step_size(16, 0.01, 100.0, 0.0) == doctest::Approx(1.25e-3).epsilon(1e-15));
  CHECK(spider_step_size(16, 0.01, 100.0, 1e-12) == doctest::Approx(1.25e-3).epsilon(1e-15));
  Rng rng(3);
  std::uniform_real_distribution<double> u(1e-4, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const double eps = u(rng), L = u(rng), norm = u(rng);
    const std::size_t n = 1 + static_cast<std::size_t>(u(rng) * 10);
    CHECK(spider_step_size(n, eps, L, norm) * norm <= eps / (L * std::sqrt(double(n))) * (1 + 1e-12));
  }
}

TEST_CASE("estimator resets to the full gradient") {
  const auto problem = small_logistic();
  SpiderEstimator est(16);
  Rng rng(1);
  OracleCounter counter;
  ParamVector x = ParamVector::Zero(5);
  for (std::size_t t = 0; t < 50; ++t) {
    const ParamVector g = est.update(problem, x, rng, counter);
    if (t % 16 == 0) {
      CHECK(est.last_was_reset());
      CHECK((g - true_gradient(problem, x)).norm() == 0.0);
    }
    x -= 0.3 * g;
  }
}

TEST_CASE("estimator with period one is always exact") {
  const auto problem = small_logistic();
  SpiderEstimator est(1);
  Rng rng(1);
  OracleCounter counter;
  ParamVector x = ParamVector::Ones(5);
  for (int t = 0; t < 5; ++t) {
    CHECK((est.update(problem, x, rng, counter) - true_gradient(problem, x)).norm() == 0.0);
    x *= 0.5;
  }
  CHECK(counter.component_calls() == 5 * 16);
}

TEST_CASE("estimator increment enumerated over both components") {
  // Anchor x_{t-1} = 1 with estimate 3, then x_t = 0.5.
  const auto problem = two_component();
  const double prev = 1.0, estimate = 3.0, x = 0.5;
  double mean = 0.0;
  for (std::size_t i = 1; i <= 2; ++i) {
    const double v = problem.component_gradient(i, scalar(x))(0) - problem.component_gradient(i, scalar(prev))(0) +
                     estimate;
    CHECK(v == (i == 1 ? 2.0 : 1.0));
    mean += v / 2.0;
  }
  CHECK(mean == true_gradient(problem, scalar(x))(0));

  // The estimator itself produces one of the two enumerated values.
  SpiderEstimator est(10);
  Rng rng(4);
  OracleCounter counter;
  CHECK(est.update(problem, scalar(prev), rng, counter)(0) == 3.0);
  const double v = est.update(problem, scalar(x), rng, counter)(0);
  CHECK((v == 2.0 || v == 1.0));
  CHECK(est.accumulator() == 9.0 + v * v);
}

TEST_CASE("estimator rejects degenerate settings") {
  CHECK_THROWS_AS(SpiderEstimator(0), std::invalid_argument);
  CHECK_THROWS_AS(SpiderEstimator(3, 0), std::invalid_argument);
}

TEST_CASE("adaspider on a zero-gradient problem stays put") {
  ZeroProblem problem(9, 3);
  AdaSpiderConfig config;
  config.steps = 30;
  config.beta0 = 2.0;
  config.g0 = 0.5;
  Rng rng(1);
  const ParamVector x0 = ParamVector::Constant(3, 0.7);
  const RunTrace trace = adaspider_run(problem, x0, config, rng);
  CHECK(trace.final_point == x0);
  for (const auto& s : trace.steps) CHECK(s.step_size == doctest::Approx(1.0 / (3.0 * 2.0 * 0.5)).epsilon(1e-15));
}

TEST_CASE("adaspider oracle accounting") {
  const auto problem = small_logistic(16);
  Rng rng(2);
  AdaSpiderConfig config;
  config.steps = 16;
  const RunTrace one_period = adaspider_run(problem, ParamVector::Zero(5), config, rng);
  CHECK(one_period.oracle_calls() == 16 + 2 * 15);
  config.steps = 50;
  const RunTrace longer = adaspider_run(problem, ParamVector::Zero(5), config, rng);
  std::size_t full = 0;
  for (const auto& s : longer.steps) full += s.full_pass ? 1 : 0;
  CHECK(full == 4);
  CHECK(longer.oracle_calls() == 16 * full + 2 * (50 - full));
  CHECK(longer.length() == 50);
  for (std::size_t t = 1; t < longer.steps.size(); ++t)
    CHECK(longer.steps[t].oracle_calls >= longer.steps[t - 1].oracle_calls);
}

TEST_CASE("adaspider matches a scalar reference simulation") {
  const auto problem = two_component();
  AdaSpiderConfig config;
  config.steps = 50;
  Rng rng(2024);
  const RunTrace trace = adaspider_run(problem, scalar(1.0), config, rng);

  // Straight-line re-implementation on doubles.
  const double c[2] = {2.0, 4.0};
  const double n = 2.0;
  Rng ref_rng(2024);
  std::uniform_int_distribution<std::size_t> pick(1, 2);
  double x = 1.0, prev = 0.0, g = 0.0, acc = 0.0;
  REQUIRE(trace.steps.size() == 50);
  for (std::size_t t = 0; t < 50; ++t) {
    CHECK(std::abs(trace.iterates[t](0) - x) <= 1e-12);
    if (t % 2 == 0) {
      g = (c[0] + c[1]) * x / n;
    } else {
      const std::size_t i = pick(ref_rng) - 1;
      g = c[i] * x - c[i] * prev + g;
    }
    acc += g * g;
    const double gamma = 1.0 / (std::pow(n, 0.25) * std::sqrt(std::sqrt(n) + acc));
    CHECK(std::abs(trace.steps[t].step_size - gamma) <= 1e-12);
    CHECK(std::abs(trace.steps[t].estimate_norm - std::abs(g)) <= 1e-12);
    prev = x;
    x -= gamma * g;
  }
  CHECK(std::abs(trace.final_point(0) - x) <= 1e-12);
}

TEST_CASE("adaspider step contract on random runs") {
  Rng seeds(77);
  for (int run = 0; run < 20; ++run) {
    Rng prng(seeds());
    const auto problem = random_quadratic(6, 3, prng, false);
    AdaSpiderConfig config;
    config.steps = 60;
    config.beta0 = 0.2 + static_cast<double>(run % 5);
    Rng rng(seeds());
    const RunTrace trace = adaspider_run(problem, ParamVector::Constant(3, 5.0), config, rng);
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
      CHECK(trace.steps[t].step_length <= 1.0 / config.beta0 + 1e-12);
      if (t > 0) CHECK(trace.steps[t].step_size <= trace.steps[t - 1].step_size);
    }
  }
}

TEST_CASE("runs are deterministic for a fixed seed") {
  const auto problem = small_logistic();
  AdaSpiderConfig config;
  config.steps = 200;
  Rng a(9), b(9);
  const RunTrace ta = adaspider_run(problem, ParamVector::Zero(5), config, a);
  const RunTrace tb = adaspider_run(problem, ParamVector::Zero(5), config, b);
  CHECK(ta.final_point == tb.final_point);
  REQUIRE(ta.passes.size() == tb.passes.size());
  for (std::size_t k = 0; k < ta.passes.size(); ++k) CHECK(ta.passes[k].grad_norm == tb.passes[k].grad_norm);
}

TEST_CASE("spider run respects its step length cap") {
  const auto problem = small_logistic();
  SpiderConfig config;
  config.epsilon = 0.01;
  config.smoothness = 2.0;
  config.steps = 100;
  Rng rng(5);
  const RunTrace trace = spider_run(problem, ParamVector::Zero(5), config, rng);
  const double cap = config.epsilon / (config.smoothness * 4.0);
  for (const auto& s : trace.steps) {
    CHECK(s.step_length <= cap * (1 + 1e-12));
    CHECK(s.step_size <= 1.0 / (2.0 * 4.0 * config.smoothness) * (1 + 1e-15));
  }
}

TEST_CASE("spiderboost schedule") {
  const auto problem = small_logistic(16);
  SpiderBoostConfig config;
  config.steps = 12;
  Rng rng(5);
  const RunTrace trace = spiderboost_run(problem, ParamVector::Zero(5), config, rng);
  CHECK(trace.period == 4);
  std::uint64_t previous = 0;
  for (const auto& s : trace.steps) {
    CHECK(s.full_pass == (s.t % 4 == 0));
    CHECK(s.oracle_calls - previous == (s.full_pass ? 16u : 8u));
    CHECK(s.step_size == doctest::Approx(0.005).epsilon(1e-15));
    previous = s.oracle_calls;
  }
  CHECK(ceil_sqrt(16) == 4);
  CHECK(ceil_sqrt(17) == 5);
  CHECK(ceil_sqrt(1) == 1);
}

TEST_CASE("spiderboost with a full batch has no estimator variance") {
  const auto problem = small_logistic(16);
  SpiderBoostConfig config;
  config.steps = 20;
  config.batch = 16;
  config.smoothness = 2.0;
  Rng rng(5);
  RunOptions options;
  double worst = 0.0;
  options.observer = [&](const StepView& v) {
    worst = std::max(worst, (v.direction - true_gradient(problem, v.point)).norm());
  };
  (void)spiderboost_run(problem, ParamVector::Zero(5), config, rng, options);
  CHECK(worst < 1e-13);
}

TEST_CASE("svrg") {
  const auto problem = two_component();
  SUBCASE("snapshot step uses the full gradient") {
    SvrgConfig config;
    config.eta = 0.1;
    config.epoch_length = 5;
    config.steps = 20;
    Rng rng(1);
    RunOptions options;
    options.observer = [&](const StepView& v) {
      if (v.t % 5 == 0) CHECK(v.direction(0) == true_gradient(problem, v.point)(0));
    };
    const RunTrace trace = svrg_run(problem, scalar(1.0), config, rng, options);
    CHECK(trace.oracle_calls() == 4 * 2 + 16 * 2);
  }
  SUBCASE("epoch length one is gradient descent") {
    SvrgConfig config;
    config.eta = 0.1;
    config.epoch_length = 1;
    config.steps = 10;
    Rng rng(1);
    const RunTrace trace = svrg_run(problem, scalar(1.0), config, rng);
    CHECK(trace.final_point(0) == doctest::Approx(std::pow(1.0 - 0.1 * 3.0, 10)).epsilon(1e-14));
  }
  SUBCASE("matches a scalar reference simulation") {
    SvrgConfig config;
    config.eta = 0.05;
    config.epoch_length = 4;
    config.steps = 40;
    Rng rng(31);
    const RunTrace trace = svrg_run(problem, scalar(1.5), config, rng);
    const double c[2] = {2.0, 4.0};
    Rng ref_rng(31);
    std::uniform_int_distribution<std::size_t> pick(1, 2);
    double x = 1.5, y = 0.0, mu = 0.0;
    for (std::size_t t = 0; t < 40; ++t) {
      CHECK(std::abs(trace.iterates[t](0) - x) <= 1e-12);
      double g;
      if (t % 4 == 0) {
        y = x;
        mu = (c[0] + c[1]) * y / 2.0;
        g = mu;
      } else {
        const std::size_t i = pick(ref_rng) - 1;
        g = c[i] * x - c[i] * y + mu;
      }
      x -= 0.05 * g;
    }
    CHECK(std::abs(trace.final_point(0) - x) <= 1e-12);
  }
}

TEST_CASE("sgd") {
  SgdConfig config;
  CHECK(config.eta == 0.01);
  SUBCASE("closed-form contraction") {
    const auto problem = scalar_quadratic({1.0});
    config.eta = 0.1;
    config.steps = 3;
    Rng rng(1);
    const RunTrace trace = sgd_run(problem, scalar(1.0), config, rng);
    CHECK(trace.final_point(0) == doctest::Approx(0.729).epsilon(1e-15));
    CHECK(trace.oracle_calls() == 3);
  }
  SUBCASE("zero gradients keep the iterate") {
    ZeroProblem problem(3, 2);
    config.steps = 10;
    Rng rng(1);
    CHECK(sgd_run(problem, ParamVector::Ones(2), config, rng).final_point == ParamVector::Ones(2));
  }
  SUBCASE("huge steps trip the divergence guard") {
    const auto problem = scalar_quadratic({1.0, 3.0});
    config.eta = 10.0;
    config.steps = 200;
    Rng rng(1);
    const RunTrace trace = sgd_run(problem, scalar(1.0), config, rng);
    CHECK(trace.diverged);
    CHECK(!trace.diagnostic.empty());
    CHECK(trace.steps.size() < 200);
  }
}

TEST_CASE("adagrad-norm") {
  AdaGradNormConfig config;
  CHECK(config.eta == 0.01);
  CHECK(config.b0 == 1e-4);
  SUBCASE("zero gradient gives eta / b0 and no movement") {
    ZeroProblem problem(2, 2);
    config.steps = 1;
    Rng rng(1);
    const RunTrace trace = adagrad_norm_run(problem, ParamVector::Ones(2), config, rng);
    CHECK(trace.steps[0].step_size == doctest::Approx(0.01 / 1e-4));
    CHECK(trace.final_point == ParamVector::Ones(2));
  }
  SUBCASE("effective step is non-increasing") {
    const auto problem = small_logistic();
    config.steps = 300;
    config.eta = 1.0;
    Rng rng(1);
    const RunTrace trace = adagrad_norm_run(problem, ParamVector::Ones(5), config, rng);
    for (std::size_t t = 1; t < trace.steps.size(); ++t)
      CHECK(trace.steps[t].step_size <= trace.steps[t - 1].step_size);
  }
}

TEST_CASE("oracle budget stops a run") {
  const auto problem = small_logistic(16);
  AdaSpiderConfig config;
  config.steps = 1000;
  RunOptions options;
  options.oracle_budget = 100;
  Rng rng(1);
  const RunTrace trace = adaspider_run(problem, ParamVector::Zero(5), config, rng, options);
  // Steps start only while under budget, so the overshoot is below one full pass.
  CHECK(trace.oracle_calls() >= 100);
  CHECK(trace.oracle_calls() < 100 + 16);
  CHECK(trace.steps[trace.steps.size() - 2].oracle_calls < 100);
}

TEST_CASE("pass records") {
  const auto problem = small_logistic(16);
  AdaSpiderConfig config;
  config.steps = 64;
  Rng rng(1);
  const RunTrace trace = adaspider_run(problem, ParamVector::Zero(5), config, rng);
  REQUIRE(!trace.passes.empty());
  CHECK(trace.passes.front().t == 0);
  CHECK(trace.passes.front().oracle_calls == 0);
  CHECK(trace.passes.front().step_size == trace.steps.front().step_size);
  CHECK(trace.passes.back().t == 64);
  CHECK(trace.passes.back().grad_norm == doctest::Approx(true_gradient(problem, trace.final_point).norm()));
  for (std::size_t k = 1; k < trace.passes.size(); ++k)
    CHECK(trace.passes[k].oracle_calls > trace.passes[k - 1].oracle_calls);
}

TEST_CASE("output selection") {
  const auto problem = small_logistic();
  SUBCASE("single step returns x0 twice") {
    AdaSpiderConfig config;
    config.steps = 1;
    Rng rng(1);
    const ParamVector x0 = ParamVector::Constant(5, 0.3);
    const RunTrace trace = adaspider_run(problem, x0, config, rng);
    const OutputIterates out = select_output(trace, rng);
    CHECK(out.uniform == x0);
    CHECK(out.best == x0);
  }
  SUBCASE("fixed seed gives a fixed choice") {
    AdaSpiderConfig config;
    config.steps = 100;
    Rng rng(1);
    const RunTrace trace = adaspider_run(problem, ParamVector::Zero(5), config, rng);
    Rng a(3), b(3);
    CHECK(select_output(trace, a).uniform_index == select_output(trace, b).uniform_index);
  }
  SUBCASE("best measured iterate") {
    RunTrace trace;
    trace.steps.resize(3);
    for (std::size_t t = 0; t < 3; ++t) {
      trace.iterates.push_back(scalar(static_cast<double>(t)));
      trace.steps[t].t = t;
      PassRecord p{};
      p.t = t;
      p.grad_norm = std::vector<double>{3.0, 1.0, 2.0}[t];
      p.point = trace.iterates.back();
      trace.passes.push_back(p);
    }
    Rng rng(1);
    const OutputIterates out = select_output(trace, rng);
    CHECK(out.best_index == 1);
    CHECK(out.best(0) == 1.0);
  }
  SUBCASE("empty trace is an error") {
    RunTrace trace;
    Rng rng(1);
    CHECK_THROWS_AS(select_output(trace, rng), std::invalid_argument);
  }
}

TEST_CASE("invalid configurations are rejected") {
  const auto problem = small_logistic();
  Rng rng(1);
  AdaSpiderConfig bad;
  bad.beta0 = 0.0;
  CHECK_THROWS_AS(adaspider_run(problem, ParamVector::Zero(5), bad, rng), std::invalid_argument);
  CHECK_THROWS_AS(adaspider_run(problem, ParamVector::Zero(4), AdaSpiderConfig{}, rng), std::invalid_argument);
  SgdConfig sgd;
  sgd.eta = -1.0;
  CHECK_THROWS_AS(sgd_run(problem, ParamVector::Zero(5), sgd, rng), std::invalid_argument);
}
