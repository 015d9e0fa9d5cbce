#include "doctest.h"

#include "adaspider/problems.hpp"
#include "adaspider/verify.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

using namespace adaspider;

namespace {

CheckOptions mutated() {
  CheckOptions o;
  o.negate_rhs = true;
  return o;
}

class ZeroProblem final : public FiniteSumProblem {
 public:
  std::size_t num_components() const override { return 3; }
  std::size_t dim() const override { return 2; }
  std::optional<double> known_smoothness() const override { return 1.0; }

 protected:
  double value_impl(std::size_t, const ParamVector&) const override { return 0.0; }
  ParamVector gradient_impl(std::size_t, const ParamVector&) const override { return ParamVector::Zero(2); }
};

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> s(count);
  for (std::size_t k = 0; k < count; ++k) s[k] = first + k;
  return s;
}

}  // namespace

TEST_CASE("sqrt lemma") {
  SUBCASE("four ones") {
    const std::vector<double> a{1, 1, 1, 1};
    const LemmaReport r = check_sqrt_lemma(a);
    CHECK(r.pass);
    const double rhs = 1.0 + 1.0 / std::sqrt(2.0) + 1.0 / std::sqrt(3.0) + 0.5;
    CHECK(rhs == doctest::Approx(2.7845).epsilon(1e-4));
    CHECK(r.worst_margin == doctest::Approx(rhs - 2.0).epsilon(1e-14));
  }
  SUBCASE("single term is an equality") {
    const std::vector<double> a{7.3};
    const LemmaReport r = check_sqrt_lemma(a);
    CHECK(r.pass);
    CHECK(std::abs(r.worst_margin) < 1e-15);
  }
  SUBCASE("random sweep") {
    const LemmaReport r = sweep_sqrt_lemma(1000, 5);
    CHECK(r.trials == 1000);
    CHECK(r.violations == 0);
  }
  SUBCASE("negative entries are rejected") {
    const std::vector<double> a{1.0, -0.5};
    CHECK_THROWS_AS(check_sqrt_lemma(a), std::invalid_argument);
  }
}

TEST_CASE("log lemma") {
  const std::vector<double> one{1.0};
  const LemmaReport r = check_log_lemma(one);
  CHECK(r.pass);
  CHECK(r.worst_margin == doctest::Approx(std::numbers::ln2 - 0.5));
  const std::vector<double> zeros(5, 0.0);
  CHECK(check_log_lemma(zeros).worst_margin == 0.0);
  CHECK(check_log_lemma(zeros).pass);
  CHECK(sweep_log_lemma(1000, 6).violations == 0);
}

TEST_CASE("lemma reports flag violations under mutation") {
  const std::vector<double> a{1, 1, 1, 1};
  CHECK(!check_sqrt_lemma(a, mutated()).pass);
  CHECK(!check_log_lemma(a, mutated()).pass);
  CHECK(!sweep_sqrt_lemma(10, 1, 100, 1e3, mutated()).pass);
  const LemmaReport r = check_sqrt_lemma(a, mutated());
  CHECK(r.violations == 1);
  CHECK(!r.detail.empty());
}

TEST_CASE("variance recursion") {
  Rng rng(3);
  const QuadraticProblem problem = random_quadratic(3, 2, rng, false);
  const ParamVector y = ParamVector::Random(2);
  const ParamVector full_y = true_gradient(problem, y);

  SUBCASE("x equal to y is tight") {
    std::vector<GradientOutcome> dist{{full_y + ParamVector::Ones(2), 0.5}, {full_y - ParamVector::Ones(2), 0.5}};
    const LemmaReport r = check_variance_recursion(problem, y, y, dist);
    CHECK(r.pass);
    CHECK(std::abs(r.worst_margin) < 1e-12);
  }
  SUBCASE("exact previous estimate reduces to component smoothness") {
    const ParamVector x = ParamVector::Random(2);
    std::vector<GradientOutcome> dist{{full_y, 1.0}};
    const LemmaReport r = check_variance_recursion(problem, x, y, dist);
    CHECK(r.pass);
    // Independent evaluation of the left side.
    const ParamVector full_x = true_gradient(problem, x);
    double lhs = 0.0;
    for (std::size_t i = 1; i <= 3; ++i) {
      const ParamVector gi_x = problem.curvature(i) * x - problem.linear_term(i);
      const ParamVector gi_y = problem.curvature(i) * y - problem.linear_term(i);
      lhs += (gi_x - gi_y - full_x + full_y).squaredNorm() / 3.0;
    }
    const double L = *problem.known_smoothness();
    CHECK(r.worst_margin == doctest::Approx(L * L * (x - y).squaredNorm() - lhs));
  }
  SUBCASE("100 random instances") {
    const auto start = std::chrono::steady_clock::now();
    const LemmaReport r = sweep_variance_recursion(100, 8);
    CHECK(r.trials == 100);
    CHECK(r.violations == 0);
    CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));
    CHECK(!sweep_variance_recursion(20, 8, mutated()).pass);
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS_AS(check_variance_recursion(problem, y, y, {}), std::invalid_argument);
    std::vector<GradientOutcome> dist{{full_y, 0.7}};
    CHECK_THROWS_AS(check_variance_recursion(problem, y, y, dist), std::invalid_argument);
    const QuadraticProblem big = random_quadratic(21, 1, rng, true);
    std::vector<GradientOutcome> one{{ParamVector::Zero(1), 1.0}};
    CHECK_THROWS_AS(check_variance_recursion(big, ParamVector::Zero(1), ParamVector::Zero(1), one),
                    std::invalid_argument);
  }
}

TEST_CASE("trajectory bound") {
  SUBCASE("zero-gradient problem") {
    ZeroProblem problem;
    AdaSpiderConfig config;
    config.steps = 20;
    Rng rng(1);
    const RunTrace trace = adaspider_run(problem, ParamVector::Ones(2), config, rng);
    const LemmaReport r = check_trajectory_bound(trace, problem, 1.0);
    CHECK(r.pass);
    CHECK(r.stats.at("sum_squared_estimates") == 0.0);
  }
  SUBCASE("two-component quadratic with a wide margin") {
    const auto problem = scalar_quadratic({2.0, 4.0});
    AdaSpiderConfig config;
    config.steps = 50;
    Rng rng(1);
    const RunTrace trace = adaspider_run(problem, ParamVector::Constant(1, 1.0), config, rng);
    const LemmaReport r = check_trajectory_bound(trace, problem, 1.0);
    CHECK(r.pass);
    CHECK(r.stats.at("sum_squared_estimates") < 0.01 * r.stats.at("bound"));
    CHECK(r.trials == 51);
    CHECK(!check_trajectory_bound(trace, problem, 1.0, mutated()).pass);
  }
  SUBCASE("step length stays strictly below 1/beta0 on random runs") {
    Rng seeds(4);
    for (int run = 0; run < 10; ++run) {
      Rng prng(seeds());
      const auto problem = random_quadratic(5, 2, prng, false);
      AdaSpiderConfig config;
      config.steps = 40;
      config.beta0 = 0.5;
      Rng rng(seeds());
      const RunTrace trace = adaspider_run(problem, ParamVector::Constant(2, 10.0), config, rng);
      for (const auto& s : trace.steps) CHECK(s.step_length < 1.0 / config.beta0);
      CHECK(check_trajectory_bound(trace, problem, config.beta0).pass);
    }
  }
}

TEST_CASE("cumulative variance") {
  const auto seeds = seed_range(100, 200);
  Rng rng(17);
  const QuadraticProblem problem = random_quadratic(4, 2, rng, true);
  const ParamVector x0 = ParamVector::Constant(2, 2.0);
  AdaSpiderConfig config;
  config.steps = 40;

  SUBCASE("holds on a four-component family") {
    const LemmaReport r = check_cumulative_variance(problem, x0, config, seeds);
    CHECK(r.pass);
    CHECK(r.trials == 200);
    CHECK(r.stats.at("mean_lhs") > 0.0);
    CHECK(!check_cumulative_variance(problem, x0, config, seeds, mutated()).pass);
  }
  SUBCASE("period one has an exact estimator") {
    config.period = 1;
    const LemmaReport r = check_cumulative_variance(problem, x0, config, seeds);
    CHECK(r.pass);
    CHECK(r.stats.at("mean_lhs") == 0.0);
  }
  SUBCASE("a single component has an exact estimator") {
    const auto single = scalar_quadratic({3.0});
    const LemmaReport r = check_cumulative_variance(single, ParamVector::Constant(1, 1.0), config, seeds);
    CHECK(r.pass);
    CHECK(r.stats.at("mean_lhs") == 0.0);
  }
  SUBCASE("weighted form") {
    const LemmaReport r = check_weighted_variance(problem, x0, config, seeds);
    CHECK(r.pass);
    CHECK(!check_weighted_variance(problem, x0, config, seeds, mutated()).pass);
  }
  SUBCASE("too few seeds") {
    const auto few = seed_range(0, 10);
    CHECK_THROWS_AS(check_cumulative_variance(problem, x0, config, few), std::invalid_argument);
  }
}

TEST_CASE("slope fit") {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0}, y{1.0, 0.5, 0.0, -0.5};
  CHECK(fitted_slope(x, y) == doctest::Approx(-0.5));
  const std::vector<double> short_x{1.0};
  CHECK_THROWS_AS(fitted_slope(short_x, short_x), std::invalid_argument);
}

TEST_CASE("rate scaling") {
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  SUBCASE("single component behaves like gradient descent") {
    const auto problem = scalar_quadratic({1.0});
    const LemmaReport r = check_rate_scaling(problem, ParamVector::Constant(1, 3.0), AdaSpiderConfig{},
                                             {100, 1000, 10000}, seeds);
    CHECK(r.pass);
    CHECK(r.stats.at("median_slope") <= -0.5);
  }
  SUBCASE("sixteen-sample logistic problem") {
    SyntheticSpec spec;
    spec.n = 16;
    spec.d = 5;
    const RegularizedErm problem(generate_synthetic(spec).data, LossKind::Logistic, 0.1);
    const LemmaReport r =
        check_rate_scaling(problem, ParamVector::Zero(5), AdaSpiderConfig{}, {100, 1000, 10000}, seeds);
    CHECK(r.pass);
    CHECK(r.stats.at("median_slope") <= -0.35);
    CHECK(!check_rate_scaling(problem, ParamVector::Zero(5), AdaSpiderConfig{}, {100, 1000, 10000}, seeds,
                              -0.35, mutated())
               .pass);
  }
  SUBCASE("preconditions") {
    const auto problem = scalar_quadratic({1.0});
    const ParamVector x0 = ParamVector::Constant(1, 1.0);
    CHECK_THROWS_AS(check_rate_scaling(problem, x0, {}, {100, 10000}, seeds), std::invalid_argument);
    CHECK_THROWS_AS(check_rate_scaling(problem, x0, {}, {100, 200, 300}, seeds), std::invalid_argument);
    CHECK_THROWS_AS(check_rate_scaling(problem, x0, {}, {100, 50, 10000}, seeds), std::invalid_argument);
    ZeroProblem zero;
    CHECK_THROWS_AS(check_rate_scaling(zero, ParamVector::Zero(2), {}, {10, 100, 1000}, seeds),
                    std::invalid_argument);
  }
}

TEST_CASE("estimator and step-contract sweeps") {
  CHECK(check_estimator(20, 1).pass);
  CHECK(!check_estimator(5, 1, mutated()).pass);
  CHECK(check_step_contract(10, 1).pass);
  CHECK(!check_step_contract(3, 1, mutated()).pass);
}

TEST_CASE("suites") {
  const auto names = suite_names();
  CHECK(names.size() == 9);
  for (const auto& name : names) {
    const auto reports = run_suite(name, 3);
    REQUIRE(reports.size() == 1);
    CHECK(reports.front().lemma == name);
    CHECK(reports.front().pass);
  }
  CHECK_THROWS_AS(run_suite("nope", 0), std::invalid_argument);
  const auto mutated_all = run_suite("all", 0, mutated());
  CHECK(mutated_all.size() == names.size());
  for (const auto& r : mutated_all) CHECK(!r.pass);
}

TEST_CASE("report serialization") {
  LemmaReport r;
  r.lemma = "demo";
  r.record(1.0, 2.0, 0.0, "a");
  r.record(3.0, 2.0, 0.0, "b");
  CHECK(r.trials == 2);
  CHECK(r.violations == 1);
  CHECK(!r.pass);
  CHECK(r.worst_margin == -1.0);
  const auto j = nlohmann::json::parse(to_json(r));
  CHECK(j["lemma"] == "demo");
  CHECK(j["violations"] == 1);
  CHECK(j["pass"] == false);
  LemmaReport other;
  other.record(0.0, 1.0, 0.0, "c");
  other.merge(r);
  CHECK(other.trials == 3);
  CHECK(!other.pass);
}
