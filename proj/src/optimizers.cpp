#include "adaspider/optimizers.hpp"

#include <cmath>
#include <sstream>

namespace adaspider {

double adaspider_step_size(std::size_t n, double beta0, double g0, double accumulator) {
  if (accumulator < 0.0) throw std::invalid_argument("step-size accumulator must be non-negative");
  if (n == 0) throw std::invalid_argument("component count must be positive");
  if (!(beta0 > 0.0) || !(g0 > 0.0)) throw std::invalid_argument("beta0 and G0 must be positive");
  const double nd = static_cast<double>(n);
  return 1.0 / (std::pow(nd, 0.25) * beta0 * std::sqrt(std::sqrt(nd) * g0 * g0 + accumulator));
}

double spider_step_size(std::size_t n, double epsilon, double smoothness, double estimate_norm) {
  const double root_n = std::sqrt(static_cast<double>(n));
  const double constant = 1.0 / (2.0 * root_n * smoothness);
  if (estimate_norm == 0.0) return constant;
  return std::min(epsilon / (smoothness * root_n * estimate_norm), constant);
}

std::size_t ceil_sqrt(std::size_t n) {
  auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  while (r * r < n) ++r;
  while (r > 0 && (r - 1) * (r - 1) >= n) --r;
  return r;
}

SpiderEstimator::SpiderEstimator(std::size_t period, std::size_t batch)
    : period_(period), batch_(batch) {
  if (period_ == 0) throw std::invalid_argument("estimator period must be positive");
  if (batch_ == 0) throw std::invalid_argument("estimator batch must be positive");
}

const ParamVector& SpiderEstimator::update(const FiniteSumProblem& problem, const ParamVector& x,
                                           Rng& rng, OracleCounter& counter) {
  const std::size_t n = problem.num_components();
  if (step_ % period_ == 0) {
    estimate_ = full_gradient(problem, x, counter);
    last_reset_ = true;
  } else {
    ParamVector increment = ParamVector::Zero(x.size());
    if (batch_ >= n) {
      for (std::size_t i = 1; i <= n; ++i)
        increment += problem.component_gradient(i, x) - problem.component_gradient(i, previous_point_);
      increment /= static_cast<double>(n);
      counter.charge(2 * n);
    } else {
      std::uniform_int_distribution<std::size_t> pick(1, n);
      for (std::size_t k = 0; k < batch_; ++k) {
        const std::size_t i = pick(rng);
        increment += problem.component_gradient(i, x) - problem.component_gradient(i, previous_point_);
      }
      increment /= static_cast<double>(batch_);
      counter.charge(2 * batch_);
    }
    estimate_ += increment;
    last_reset_ = false;
  }
  previous_point_ = x;
  accumulator_ += estimate_.squaredNorm();
  ++step_;
  return estimate_;
}

namespace {

struct Direction {
  ParamVector direction;
  double step_size;
  bool full_pass;
};

void check_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << name << " must be positive, got " << v;
    throw std::invalid_argument(msg.str());
  }
}

// Shared loop: validation, budget, divergence guard, per-pass measurement.
template <typename StepFn>
RunTrace drive(const FiniteSumProblem& problem, const ParamVector& x0, std::string name,
               std::size_t period, std::size_t steps, const RunOptions& options, StepFn&& next) {
  if (static_cast<std::size_t>(x0.size()) != problem.dim())
    throw std::invalid_argument("initial point has the wrong dimension");
  if (!all_finite(x0)) throw std::invalid_argument("initial point must be finite");
  if (steps == 0) throw std::invalid_argument("step budget must be at least 1");

  const std::size_t n = problem.num_components();
  RunTrace trace;
  trace.algorithm = std::move(name);
  trace.num_components = n;
  trace.period = period;
  trace.initial_point = x0;
  trace.steps.reserve(steps);

  OracleCounter counter;
  std::uint64_t next_measure = 0;
  auto measure = [&](std::size_t t, const ParamVector& x, double step_size) {
    if (!options.measure_passes) return;
    const ParamVector g = true_gradient(problem, x);
    const std::uint64_t calls = counter.component_calls();
    trace.passes.push_back({t, calls, static_cast<double>(calls) / static_cast<double>(n),
                            true_value(problem, x), g.norm(), step_size, x});
    next_measure = (calls / n + 1) * n;
  };

  ParamVector x = x0;
  measure(0, x, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    if (options.oracle_budget && counter.component_calls() >= *options.oracle_budget) break;
    if (options.keep_iterates) trace.iterates.push_back(x);

    Direction d;
    try {
      d = next(t, x, counter);
    } catch (const NonFiniteError& e) {
      trace.diverged = true;
      trace.diagnostic = "t=" + std::to_string(t) + ": " + e.what();
      if (options.keep_iterates) trace.iterates.pop_back();
      break;
    }
    if (options.observer) options.observer(StepView{t, x, d.direction, d.step_size});

    ParamVector next_x = x - d.step_size * d.direction;
    trace.steps.push_back({t, d.step_size, d.direction.norm(), (next_x - x).norm(),
                           counter.component_calls(), d.full_pass});
    if (t == 0 && !trace.passes.empty()) trace.passes.front().step_size = d.step_size;

    if (!all_finite(next_x) || next_x.cwiseAbs().maxCoeff() > options.divergence_threshold) {
      std::ostringstream msg;
      msg << "t=" << t << ": iterate " << (all_finite(next_x) ? "exceeded magnitude bound" : "became non-finite");
      trace.diverged = true;
      trace.diagnostic = msg.str();
      break;
    }
    x = std::move(next_x);
    const bool last = t + 1 == steps;
    if (options.measure_passes && (counter.component_calls() >= next_measure || last))
      measure(t + 1, x, d.step_size);
  }
  if (options.measure_passes && !trace.diverged && trace.passes.back().t != trace.length())
    measure(trace.length(), x, trace.steps.empty() ? 0.0 : trace.steps.back().step_size);
  trace.final_point = x;
  return trace;
}

}  // namespace

RunTrace adaspider_run(const FiniteSumProblem& problem, const ParamVector& x0,
                       const AdaSpiderConfig& config, Rng& rng, const RunOptions& options) {
  check_positive(config.beta0, "beta0");
  check_positive(config.g0, "G0");
  const std::size_t n = problem.num_components();
  SpiderEstimator estimator(config.period == 0 ? n : config.period, config.batch);
  return drive(problem, x0, "adaspider", estimator.period(), config.steps, options,
               [&](std::size_t, const ParamVector& x, OracleCounter& counter) {
                 const ParamVector& grad = estimator.update(problem, x, rng, counter);
                 // The accumulator already holds ||grad_t||^2, which bounds the step length by 1/beta0.
                 const double gamma = adaspider_step_size(n, config.beta0, config.g0, estimator.accumulator());
                 return Direction{grad, gamma, estimator.last_was_reset()};
               });
}

RunTrace spider_run(const FiniteSumProblem& problem, const ParamVector& x0,
                    const SpiderConfig& config, Rng& rng, const RunOptions& options) {
  check_positive(config.epsilon, "epsilon");
  check_positive(config.smoothness, "L");
  const std::size_t n = problem.num_components();
  SpiderEstimator estimator(config.period == 0 ? n : config.period, config.batch);
  return drive(problem, x0, "spider", estimator.period(), config.steps, options,
               [&](std::size_t, const ParamVector& x, OracleCounter& counter) {
                 const ParamVector& grad = estimator.update(problem, x, rng, counter);
                 const double gamma = spider_step_size(n, config.epsilon, config.smoothness, grad.norm());
                 return Direction{grad, gamma, estimator.last_was_reset()};
               });
}

RunTrace spiderboost_run(const FiniteSumProblem& problem, const ParamVector& x0,
                         const SpiderBoostConfig& config, Rng& rng, const RunOptions& options) {
  check_positive(config.smoothness, "L");
  if (config.step_size) check_positive(*config.step_size, "step size");
  const std::size_t n = problem.num_components();
  const std::size_t root = ceil_sqrt(n);
  SpiderEstimator estimator(config.period == 0 ? root : config.period,
                            config.batch == 0 ? root : config.batch);
  const double gamma = config.step_size.value_or(1.0 / config.smoothness);
  return drive(problem, x0, "spiderboost", estimator.period(), config.steps, options,
               [&](std::size_t, const ParamVector& x, OracleCounter& counter) {
                 const ParamVector& grad = estimator.update(problem, x, rng, counter);
                 return Direction{grad, gamma, estimator.last_was_reset()};
               });
}

RunTrace svrg_run(const FiniteSumProblem& problem, const ParamVector& x0, const SvrgConfig& config,
                  Rng& rng, const RunOptions& options) {
  check_positive(config.eta, "eta");
  const std::size_t n = problem.num_components();
  const std::size_t m = config.epoch_length == 0 ? n : config.epoch_length;
  ParamVector snapshot;
  ParamVector snapshot_grad;
  std::uniform_int_distribution<std::size_t> pick(1, n);
  return drive(problem, x0, "svrg", m, config.steps, options,
               [&](std::size_t t, const ParamVector& x, OracleCounter& counter) {
                 if (t % m == 0) {
                   // The new snapshot is the last inner iterate; at x_t = y the
                   // corrected gradient is exactly mu, so no sample is drawn.
                   snapshot = x;
                   snapshot_grad = full_gradient(problem, x, counter);
                   return Direction{snapshot_grad, config.eta, true};
                 }
                 const std::size_t i = pick(rng);
                 ParamVector g = component_gradient(problem, i, x, counter) -
                                 component_gradient(problem, i, snapshot, counter) + snapshot_grad;
                 return Direction{std::move(g), config.eta, false};
               });
}

RunTrace sgd_run(const FiniteSumProblem& problem, const ParamVector& x0, const SgdConfig& config,
                 Rng& rng, const RunOptions& options) {
  check_positive(config.eta, "eta");
  std::uniform_int_distribution<std::size_t> pick(1, problem.num_components());
  return drive(problem, x0, "sgd", 0, config.steps, options,
               [&](std::size_t, const ParamVector& x, OracleCounter& counter) {
                 return Direction{component_gradient(problem, pick(rng), x, counter), config.eta, false};
               });
}

RunTrace adagrad_norm_run(const FiniteSumProblem& problem, const ParamVector& x0,
                          const AdaGradNormConfig& config, Rng& rng, const RunOptions& options) {
  check_positive(config.eta, "eta");
  check_positive(config.b0, "b0");
  std::uniform_int_distribution<std::size_t> pick(1, problem.num_components());
  double accumulator = config.b0 * config.b0;
  return drive(problem, x0, "adagrad_norm", 0, config.steps, options,
               [&](std::size_t, const ParamVector& x, OracleCounter& counter) {
                 ParamVector g = component_gradient(problem, pick(rng), x, counter);
                 accumulator += g.squaredNorm();
                 return Direction{std::move(g), config.eta / std::sqrt(accumulator), false};
               });
}

OutputIterates select_output(const RunTrace& trace, Rng& rng) {
  if (trace.iterates.empty()) throw std::invalid_argument("trace holds no iterates");
  const std::size_t count = trace.iterates.size();
  std::uniform_int_distribution<std::size_t> pick(0, count - 1);
  const std::size_t uniform = pick(rng);

  std::optional<std::size_t> best;
  double best_norm = 0.0;
  for (const auto& pass : trace.passes) {
    if (pass.t >= count) continue;
    if (!best || pass.grad_norm < best_norm) {
      best = pass.t;
      best_norm = pass.grad_norm;
    }
  }
  if (!best) throw std::invalid_argument("trace holds no measured iterates");
  return {trace.iterates[uniform], trace.iterates[*best], uniform, *best};
}

}  // namespace adaspider
