#include "adaspider/verify.hpp"

#include "adaspider/data.hpp"
#include "adaspider/problems.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace adaspider {

namespace {

double rhs_sign(const CheckOptions& options) { return options.negate_rhs ? -1.0 : 1.0; }

std::string describe(const std::string& trial, double lhs, double rhs) {
  std::ostringstream msg;
  msg.precision(17);
  msg << trial << ": lhs=" << lhs << " rhs=" << rhs << " margin=" << rhs - lhs;
  return msg.str();
}

LemmaReport empty_report(std::string lemma) {
  LemmaReport r;
  r.lemma = std::move(lemma);
  r.worst_margin = std::numeric_limits<double>::infinity();
  return r;
}

void check_alphas(std::span<const double> alphas) {
  for (double a : alphas)
    if (!(a >= 0.0)) throw std::invalid_argument("lemma sequences must be non-negative");
}

std::vector<double> random_sequence(Rng& rng, std::size_t max_length, double max_value) {
  std::uniform_int_distribution<std::size_t> length(1, max_length);
  std::uniform_real_distribution<double> value(0.0, max_value);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> seq(length(rng));
  // Mix scales so tiny and zero terms next to large ones are exercised.
  for (auto& a : seq) {
    const double u = unit(rng);
    a = u < 0.1 ? 0.0 : (u < 0.3 ? value(rng) * 1e-6 : value(rng));
  }
  return seq;
}

}  // namespace

void LemmaReport::record(double lhs, double rhs, double slack, const std::string& trial) {
  ++trials;
  worst_margin = std::min(worst_margin, rhs - lhs);
  if (!(lhs <= rhs + slack)) {
    if (violations == 0) detail = describe(trial, lhs, rhs);
    ++violations;
  }
  pass = violations == 0;
}

void LemmaReport::merge(const LemmaReport& other) {
  if (violations == 0 && other.violations > 0) detail = other.detail;
  trials += other.trials;
  violations += other.violations;
  worst_margin = std::min(worst_margin, other.worst_margin);
  pass = violations == 0;
}

namespace {

nlohmann::json report_json(const LemmaReport& r) {
  nlohmann::json j;
  j["lemma"] = r.lemma;
  j["trials"] = r.trials;
  j["violations"] = r.violations;
  if (std::isfinite(r.worst_margin)) {
    j["worst_margin"] = r.worst_margin;
  } else {
    j["worst_margin"] = nullptr;
  }
  j["pass"] = r.pass;
  if (!r.detail.empty()) j["detail"] = r.detail;
  if (!r.stats.empty()) j["stats"] = r.stats;
  return j;
}

}  // namespace

std::string to_json(const LemmaReport& report) { return report_json(report).dump(); }

std::string to_json(const std::vector<LemmaReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) arr.push_back(report_json(r));
  return arr.dump(2);
}

LemmaReport check_sqrt_lemma(std::span<const double> alphas, const CheckOptions& options) {
  check_alphas(alphas);
  LemmaReport report = empty_report("sqrt");
  double running = 0.0;
  double rhs = 0.0;
  for (double a : alphas) {
    running += a;
    if (running > 0.0) rhs += a / std::sqrt(running);
  }
  report.record(std::sqrt(running), rhs_sign(options) * rhs, options.slack, "sequence");
  return report;
}

LemmaReport check_log_lemma(std::span<const double> alphas, const CheckOptions& options) {
  check_alphas(alphas);
  LemmaReport report = empty_report("log");
  double running = 0.0;
  double lhs = 0.0;
  for (double a : alphas) {
    running += a;
    lhs += a / (1.0 + running);
  }
  report.record(lhs, rhs_sign(options) * std::log1p(running), options.slack, "sequence");
  return report;
}

namespace {

template <typename Check>
LemmaReport sweep_sequences(const char* name, Check check, std::size_t sequences, std::uint64_t seed,
                            std::size_t max_length, double max_value, const CheckOptions& options) {
  if (max_length == 0) throw std::invalid_argument("sequence length bound must be positive");
  LemmaReport report = empty_report(name);
  Rng rng = derive_rng(seed, 0, 11);
  for (std::size_t k = 0; k < sequences; ++k) {
    const auto seq = random_sequence(rng, max_length, max_value);
    LemmaReport one = check(std::span<const double>(seq), options);
    if (one.violations > 0) one.detail = "sequence " + std::to_string(k) + " " + one.detail;
    report.merge(one);
  }
  return report;
}

}  // namespace

LemmaReport sweep_sqrt_lemma(std::size_t sequences, std::uint64_t seed, std::size_t max_length,
                             double max_value, const CheckOptions& options) {
  return sweep_sequences("sqrt", check_sqrt_lemma, sequences, seed, max_length, max_value, options);
}

LemmaReport sweep_log_lemma(std::size_t sequences, std::uint64_t seed, std::size_t max_length,
                            double max_value, const CheckOptions& options) {
  return sweep_sequences("log", check_log_lemma, sequences, seed, max_length, max_value, options);
}

LemmaReport check_variance_recursion(const FiniteSumProblem& problem, const ParamVector& x,
                                     const ParamVector& y,
                                     const std::vector<GradientOutcome>& grad_y_distribution,
                                     const CheckOptions& options) {
  const std::size_t n = problem.num_components();
  if (n > 20 || n * grad_y_distribution.size() > 100000)
    throw std::invalid_argument("enumeration too large for an exact variance check");
  if (grad_y_distribution.empty()) throw std::invalid_argument("grad_y distribution is empty");
  const auto smoothness = problem.known_smoothness();
  if (!smoothness) throw std::invalid_argument("variance check needs a known smoothness constant");
  double total_probability = 0.0;
  for (const auto& o : grad_y_distribution) {
    if (!(o.probability >= 0.0)) throw std::invalid_argument("negative outcome probability");
    total_probability += o.probability;
  }
  if (std::abs(total_probability - 1.0) > 1e-9)
    throw std::invalid_argument("outcome probabilities must sum to 1");

  const ParamVector full_x = true_gradient(problem, x);
  const ParamVector full_y = true_gradient(problem, y);
  std::vector<ParamVector> differences;
  for (std::size_t i = 1; i <= n; ++i)
    differences.push_back(problem.component_gradient(i, x) - problem.component_gradient(i, y));

  double lhs = 0.0;
  double prior_variance = 0.0;
  for (const auto& outcome : grad_y_distribution) {
    double inner = 0.0;
    for (const auto& diff : differences) inner += (diff + outcome.value - full_x).squaredNorm();
    lhs += outcome.probability * inner / static_cast<double>(n);
    prior_variance += outcome.probability * (outcome.value - full_y).squaredNorm();
  }
  const double l = *smoothness;
  const double rhs = rhs_sign(options) * (l * l * (x - y).squaredNorm() + prior_variance);

  LemmaReport report = empty_report("variance");
  report.record(lhs, rhs, options.slack * std::max(1.0, std::abs(rhs)), "instance");
  return report;
}

LemmaReport sweep_variance_recursion(std::size_t instances, std::uint64_t seed,
                                     const CheckOptions& options) {
  LemmaReport report = empty_report("variance");
  Rng rng = derive_rng(seed, 0, 12);
  std::uniform_int_distribution<std::size_t> pick_n(1, 10);
  std::uniform_int_distribution<std::size_t> pick_d(1, 3);
  std::uniform_int_distribution<std::size_t> pick_outcomes(1, 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = pick_n(rng);
    const std::size_t d = pick_d(rng);
    const QuadraticProblem problem = random_quadratic(n, d, rng, k % 2 == 0);
    const ParamVector x = ParamVector::NullaryExpr(d, [&] { return normal(rng); });
    const ParamVector y = ParamVector::NullaryExpr(d, [&] { return normal(rng); });
    const ParamVector full_y = true_gradient(problem, y);

    std::vector<GradientOutcome> outcomes;
    double mass = 0.0;
    const std::size_t count = pick_outcomes(rng);
    for (std::size_t o = 0; o < count; ++o) {
      const double w = weight(rng);
      outcomes.push_back({full_y + ParamVector::NullaryExpr(d, [&] { return normal(rng); }), w});
      mass += w;
    }
    for (auto& o : outcomes) o.probability /= mass;

    LemmaReport one = check_variance_recursion(problem, x, y, outcomes, options);
    if (one.violations > 0) one.detail = "instance " + std::to_string(k) + " " + one.detail;
    report.merge(one);
  }
  return report;
}

LemmaReport check_trajectory_bound(const RunTrace& trace, const FiniteSumProblem& problem,
                                   double beta0, const CheckOptions& options) {
  const auto smoothness = problem.known_smoothness();
  if (!smoothness) throw std::invalid_argument("trajectory bound needs a known smoothness constant");
  if (trace.period == 0) throw std::invalid_argument("trajectory bound needs a reset period");
  LemmaReport report = empty_report("trajectory");
  const double sign = rhs_sign(options);

  double sum_sq = 0.0;
  for (const auto& step : trace.steps) {
    report.record(step.step_length, sign / beta0, options.slack, "step t=" + std::to_string(step.t));
    sum_sq += step.estimate_norm * step.estimate_norm;
  }

  const double l = *smoothness;
  const double t = static_cast<double>(trace.length());
  const double p = static_cast<double>(trace.period);
  const double g0 = true_gradient(problem, trace.initial_point).norm();
  const double b2 = beta0 * beta0;
  const double bound = 2.0 * l * l * p * p * t / b2 + 2.0 * l * l * t * t * t / b2 +
                       4.0 * l * t * t * g0 / beta0 + 2.0 * t * g0 * g0;
  const double rhs = sign * bound;
  report.record(sum_sq, rhs, options.slack * std::max(1.0, std::abs(rhs)), "sum of squared estimates");
  report.stats["sum_squared_estimates"] = sum_sq;
  report.stats["bound"] = bound;
  return report;
}

namespace {

struct MonteCarloSample {
  double lhs;
  double rhs_core;  // before multiplying by L^2 p
};

template <typename Accumulate>
LemmaReport monte_carlo_variance(const char* name, const FiniteSumProblem& problem,
                                 const ParamVector& x0, const AdaSpiderConfig& config,
                                 std::span<const std::uint64_t> seeds, const CheckOptions& options,
                                 Accumulate accumulate) {
  if (seeds.size() < 50)
    throw std::invalid_argument("Monte-Carlo variance checks need at least 50 seeds");
  const auto smoothness = problem.known_smoothness();
  if (!smoothness) throw std::invalid_argument("variance check needs a known smoothness constant");
  const std::size_t n = problem.num_components();
  const double period = static_cast<double>(config.period == 0 ? n : config.period);
  const double factor = (*smoothness) * (*smoothness) * period;
  const double sign = rhs_sign(options);

  std::vector<MonteCarloSample> samples;
  samples.reserve(seeds.size());
  RunOptions run_options;
  run_options.keep_iterates = false;
  run_options.measure_passes = false;
  for (std::uint64_t seed : seeds) {
    MonteCarloSample s{0.0, 0.0};
    run_options.observer = [&](const StepView& v) {
      const double error = (v.direction - true_gradient(problem, v.point)).squaredNorm();
      accumulate(s, error, v.step_size, v.direction.squaredNorm());
    };
    Rng rng = derive_rng(seed, 0, 21);
    adaspider_run(problem, x0, config, rng, run_options);
    samples.push_back(s);
  }

  const double count = static_cast<double>(samples.size());
  double mean_lhs = 0.0, mean_rhs = 0.0, mean_diff = 0.0;
  for (const auto& s : samples) {
    mean_lhs += s.lhs;
    mean_rhs += factor * s.rhs_core;
    mean_diff += s.lhs - sign * factor * s.rhs_core;
  }
  mean_lhs /= count;
  mean_rhs /= count;
  mean_diff /= count;
  double var = 0.0;
  for (const auto& s : samples) {
    const double d = s.lhs - sign * factor * s.rhs_core - mean_diff;
    var += d * d;
  }
  const double stderr_diff = std::sqrt(var / (count - 1.0) / count);

  LemmaReport report = empty_report(name);
  report.record(mean_lhs, sign * mean_rhs + 3.0 * stderr_diff, options.slack, "Monte-Carlo means");
  report.trials = samples.size();
  report.stats["mean_lhs"] = mean_lhs;
  report.stats["mean_rhs"] = mean_rhs;
  report.stats["standard_error"] = stderr_diff;
  return report;
}

}  // namespace

LemmaReport check_cumulative_variance(const FiniteSumProblem& problem, const ParamVector& x0,
                                      const AdaSpiderConfig& config,
                                      std::span<const std::uint64_t> seeds,
                                      const CheckOptions& options) {
  return monte_carlo_variance("cumulative", problem, x0, config, seeds, options,
                              [](MonteCarloSample& s, double error, double gamma, double norm_sq) {
                                s.lhs += error;
                                s.rhs_core += gamma * gamma * norm_sq;
                              });
}

LemmaReport check_weighted_variance(const FiniteSumProblem& problem, const ParamVector& x0,
                                    const AdaSpiderConfig& config,
                                    std::span<const std::uint64_t> seeds,
                                    const CheckOptions& options) {
  return monte_carlo_variance("weighted", problem, x0, config, seeds, options,
                              [](MonteCarloSample& s, double error, double gamma, double norm_sq) {
                                s.lhs += gamma * error;
                                s.rhs_core += gamma * gamma * gamma * norm_sq;
                              });
}

double fitted_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope fit needs matching points");
  Eigen::MatrixXd design(x.size(), 2);
  Eigen::VectorXd rhs(y.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    design(k, 0) = 1.0;
    design(k, 1) = x[k];
    rhs[k] = y[k];
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(rhs);
  return coef[1];
}

LemmaReport check_rate_scaling(const FiniteSumProblem& problem, const ParamVector& x0,
                               const AdaSpiderConfig& config, const std::vector<std::size_t>& budgets,
                               std::span<const std::uint64_t> seeds, double max_slope,
                               const CheckOptions& options) {
  if (budgets.size() < 3) throw std::invalid_argument("rate check needs at least three budgets");
  for (std::size_t k = 1; k < budgets.size(); ++k)
    if (budgets[k] <= budgets[k - 1]) throw std::invalid_argument("rate budgets must increase");
  if (budgets.front() == 0 || budgets.back() < 100 * budgets.front())
    throw std::invalid_argument("rate budgets must span at least two decades");
  if (seeds.empty()) throw std::invalid_argument("rate check needs at least one seed");

  std::vector<double> log_t;
  for (auto t : budgets) log_t.push_back(std::log(static_cast<double>(t)));

  RunOptions run_options;
  run_options.keep_iterates = false;
  run_options.measure_passes = false;
  std::vector<double> slopes;
  for (std::uint64_t seed : seeds) {
    std::vector<double> log_mean;
    for (auto budget : budgets) {
      double sum = 0.0;
      run_options.observer = [&](const StepView& v) { sum += true_gradient(problem, v.point).norm(); };
      AdaSpiderConfig c = config;
      c.steps = budget;
      Rng rng = derive_rng(seed, budget, 31);
      const RunTrace trace = adaspider_run(problem, x0, c, rng, run_options);
      const double mean = sum / static_cast<double>(trace.length());
      if (!(mean > 0.0)) throw std::invalid_argument("rate check on a stationary start is degenerate");
      log_mean.push_back(std::log(mean));
    }
    slopes.push_back(fitted_slope(log_t, log_mean));
  }
  std::vector<double> sorted = slopes;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const double median = m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);

  LemmaReport report = empty_report("rate");
  // Asserted as -max_slope <= -slope so the mutation switch flips the fitted side.
  report.record(-max_slope, rhs_sign(options) * -median, 0.0, "median fitted slope");
  report.trials = seeds.size();
  report.stats["median_slope"] = median;
  report.stats["min_slope"] = sorted.front();
  report.stats["max_slope"] = sorted.back();
  return report;
}

LemmaReport check_estimator(std::size_t instances, std::uint64_t seed, const CheckOptions& options) {
  LemmaReport report = empty_report("estimator");
  Rng rng = derive_rng(seed, 0, 41);
  std::uniform_int_distribution<std::size_t> pick_n(2, 20);
  std::uniform_int_distribution<std::size_t> pick_d(1, 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sign = rhs_sign(options);
  for (std::size_t k = 0; k < instances; ++k) {
    const std::size_t n = pick_n(rng);
    const std::size_t d = pick_d(rng);
    const QuadraticProblem problem = random_quadratic(n, d, rng, true);
    const ParamVector x0 = ParamVector::NullaryExpr(d, [&] { return normal(rng); });
    const std::string tag = "instance " + std::to_string(k);

    RunOptions run_options;
    run_options.measure_passes = false;
    run_options.keep_iterates = false;
    ParamVector previous;
    run_options.observer = [&](const StepView& v) {
      if (v.t % n == 0) {
        const double gap = (v.direction - true_gradient(problem, v.point)).norm();
        report.record(gap, sign * 0.0, 0.0, tag + " reset t=" + std::to_string(v.t));
      } else {
        ParamVector mean_increment = ParamVector::Zero(d);
        for (std::size_t i = 1; i <= n; ++i)
          mean_increment += problem.component_gradient(i, v.point) - problem.component_gradient(i, previous);
        mean_increment /= static_cast<double>(n);
        const ParamVector exact = true_gradient(problem, v.point) - true_gradient(problem, previous);
        const double gap = (mean_increment - exact).norm();
        report.record(gap, sign * 1e-12 * std::max(1.0, exact.norm()), 0.0,
                      tag + " increment t=" + std::to_string(v.t));
      }
      previous = v.point;
    };
    AdaSpiderConfig config;
    config.steps = 3 * n;
    Rng run_rng = derive_rng(seed, k, 42);
    adaspider_run(problem, x0, config, run_rng, run_options);
  }
  return report;
}

LemmaReport check_step_contract(std::size_t runs, std::uint64_t seed, const CheckOptions& options) {
  LemmaReport report = empty_report("step");
  Rng rng = derive_rng(seed, 0, 51);
  std::uniform_int_distribution<std::size_t> pick_n(1, 16);
  std::uniform_int_distribution<std::size_t> pick_d(1, 5);
  std::uniform_real_distribution<double> log_scale(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, 3.0);
  const double sign = rhs_sign(options);

  for (std::size_t k = 0; k < runs; ++k) {
    const std::size_t n = pick_n(rng);
    const std::size_t d = pick_d(rng);
    const QuadraticProblem problem = random_quadratic(n, d, rng, k % 2 == 0);
    AdaSpiderConfig config;
    config.beta0 = std::pow(10.0, log_scale(rng));
    config.g0 = std::pow(10.0, log_scale(rng));
    config.steps = 200;
    const ParamVector x0 = ParamVector::NullaryExpr(d, [&] { return normal(rng); });
    Rng run_rng = derive_rng(seed, k, 52);
    RunOptions run_options;
    run_options.measure_passes = false;
    run_options.keep_iterates = false;
    const RunTrace trace = adaspider_run(problem, x0, config, run_rng, run_options);
    const std::string tag = "run " + std::to_string(k);
    for (std::size_t t = 0; t < trace.length(); ++t) {
      const auto& s = trace.steps[t];
      report.record(s.step_length, sign * (1.0 / config.beta0), 1e-12, tag + " length t=" + std::to_string(t));
      if (t > 0)
        report.record(s.step_size, sign * trace.steps[t - 1].step_size, 0.0,
                      tag + " monotone t=" + std::to_string(t));
    }
  }

  // Zero gradient history: gamma_0 = 1/(sqrt(n) beta0 G0).
  const std::vector<std::size_t> sizes{1, 4, 16, 25};
  for (std::size_t n : sizes) {
    const QuadraticProblem zero = scalar_quadratic(std::vector<double>(n, 0.0));
    AdaSpiderConfig config;
    config.steps = 1;
    Rng run_rng = derive_rng(seed, n, 53);
    const RunTrace trace = adaspider_run(zero, ParamVector::Zero(1), config, run_rng);
    const double expected = 1.0 / std::sqrt(static_cast<double>(n));
    report.record(std::abs(trace.steps.front().step_size - expected), sign * 1e-15, 0.0,
                  "zero history n=" + std::to_string(n));
  }
  return report;
}

namespace {

std::vector<std::uint64_t> seed_block(std::uint64_t seed, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t k = 0; k < count; ++k) seeds[k] = seed * 1000003ULL + k;
  return seeds;
}

LemmaReport trajectory_suite(std::uint64_t seed, const CheckOptions& options) {
  LemmaReport report = empty_report("trajectory");
  Rng rng = derive_rng(seed, 0, 61);
  std::uniform_real_distribution<double> beta(0.5, 2.0);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (std::size_t k = 0; k < 50; ++k) {
    const QuadraticProblem problem = random_quadratic(5, 3, rng, k % 2 == 0);
    AdaSpiderConfig config;
    config.beta0 = beta(rng);
    config.steps = 200;
    const ParamVector x0 = ParamVector::NullaryExpr(3, [&] { return normal(rng); });
    Rng run_rng = derive_rng(seed, k, 62);
    RunOptions run_options;
    run_options.measure_passes = false;
    run_options.keep_iterates = false;
    const RunTrace trace = adaspider_run(problem, x0, config, run_rng, run_options);
    LemmaReport one = check_trajectory_bound(trace, problem, config.beta0, options);
    if (one.violations > 0) one.detail = "run " + std::to_string(k) + " " + one.detail;
    report.merge(one);
  }
  return report;
}

QuadraticProblem cumulative_family(std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0, 71);
  return random_quadratic(4, 2, rng, true);
}

}  // namespace

std::vector<std::string> suite_names() {
  return {"sqrt", "log", "variance", "trajectory", "cumulative", "weighted", "estimator", "step", "rate"};
}

std::vector<LemmaReport> run_suite(const std::string& name, std::uint64_t seed,
                                   const CheckOptions& options) {
  if (name == "all") {
    std::vector<LemmaReport> all;
    for (const auto& s : suite_names()) {
      auto part = run_suite(s, seed, options);
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  if (name == "sqrt") return {sweep_sqrt_lemma(1000, seed, 100, 1e3, options)};
  if (name == "log") return {sweep_log_lemma(1000, seed, 100, 1e3, options)};
  if (name == "variance") return {sweep_variance_recursion(100, seed, options)};
  if (name == "trajectory") return {trajectory_suite(seed, options)};
  if (name == "cumulative" || name == "weighted") {
    const QuadraticProblem problem = cumulative_family(seed);
    AdaSpiderConfig config;
    config.steps = 40;
    const ParamVector x0 = ParamVector::Constant(2, 2.0);
    const auto seeds = seed_block(seed, 500);
    return {name == "cumulative" ? check_cumulative_variance(problem, x0, config, seeds, options)
                                 : check_weighted_variance(problem, x0, config, seeds, options)};
  }
  if (name == "estimator") return {check_estimator(30, seed, options)};
  if (name == "step") return {check_step_contract(30, seed, options)};
  if (name == "rate") {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::SeparableLogistic;
    spec.n = 64;
    spec.d = 10;
    spec.seed = 2023;
    const RegularizedErm problem(generate_synthetic(spec).data, LossKind::Logistic, 0.1);
    return {check_rate_scaling(problem, ParamVector::Zero(10), AdaSpiderConfig{}, {100, 1000, 10000},
                               seed_block(seed, 5), -0.35, options)};
  }
  throw std::invalid_argument("unknown verification suite '" + name + "'");
}

}  // namespace adaspider
