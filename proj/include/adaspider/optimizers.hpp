#pragma once

#include "adaspider/core.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace adaspider {

/// gamma_t = 1 / (n^{1/4} beta0 sqrt(sqrt(n) G0^2 + accumulator)).
/// The accumulator must already include the current ||grad_t||^2.
double adaspider_step_size(std::size_t n, double beta0, double g0, double accumulator);

/// min(eps / (L sqrt(n) ||grad_t||), 1 / (2 sqrt(n) L)); a zero norm takes the
/// second branch.
double spider_step_size(std::size_t n, double epsilon, double smoothness, double estimate_norm);

/// Recursive path-integrated estimator. Every `period` updates it is reset to
/// the exact full gradient; otherwise
///   grad_t = mean_{i in batch} (grad f_i(x_t) - grad f_i(x_{t-1})) + grad_{t-1}
/// with i drawn uniformly with replacement. A batch of at least n uses every
/// component once, making the increment exact.
class SpiderEstimator {
 public:
  explicit SpiderEstimator(std::size_t period, std::size_t batch = 1);

  /// Advances to x_t and returns grad_t. Also adds ||grad_t||^2 to the
  /// accumulator.
  const ParamVector& update(const FiniteSumProblem& problem, const ParamVector& x, Rng& rng,
                            OracleCounter& counter);

  const ParamVector& estimate() const { return estimate_; }
  const ParamVector& previous_point() const { return previous_point_; }
  /// Index t of the next update.
  std::size_t step_index() const { return step_; }
  /// sum_{s <= t} ||grad_s||^2; non-decreasing.
  double accumulator() const { return accumulator_; }
  std::size_t period() const { return period_; }
  std::size_t batch() const { return batch_; }
  bool last_was_reset() const { return last_reset_; }

 private:
  std::size_t period_;
  std::size_t batch_;
  std::size_t step_ = 0;
  double accumulator_ = 0.0;
  bool last_reset_ = false;
  ParamVector estimate_;
  ParamVector previous_point_;
};

struct StepRecord {
  std::size_t t;
  double step_size;             // gamma_t
  double estimate_norm;         // ||grad_t|| of the direction actually used
  double step_length;           // ||x_{t+1} - x_t||
  std::uint64_t oracle_calls;   // charged calls after step t
  bool full_pass;               // direction came from an exact full gradient
};

/// Uncharged measurement at iterate x_t, taken once per data pass.
struct PassRecord {
  std::size_t t;
  std::uint64_t oracle_calls;
  double epoch;       // oracle_calls / n
  double loss;        // f(x_t)
  double grad_norm;   // ||grad f(x_t)||
  double step_size;   // step size of the step that produced x_t (gamma_0 for x_0)
  ParamVector point;
};

struct RunTrace {
  std::string algorithm;
  std::size_t num_components = 0;
  std::size_t period = 0;  // full-gradient period; 0 for methods without one
  std::vector<StepRecord> steps;
  std::vector<PassRecord> passes;
  std::vector<ParamVector> iterates;  // x_0 .. x_{T-1}, when kept
  ParamVector initial_point;
  ParamVector final_point;            // x_T
  bool diverged = false;
  std::string diagnostic;

  std::size_t length() const { return steps.size(); }
  std::uint64_t oracle_calls() const { return steps.empty() ? 0 : steps.back().oracle_calls; }
};

/// What an observer sees before x_{t+1} = x_t - step_size * direction.
struct StepView {
  std::size_t t;
  const ParamVector& point;
  const ParamVector& direction;
  double step_size;
};

using StepObserver = std::function<void(const StepView&)>;

struct RunOptions {
  /// Stop before a step once this many calls have been charged. The last
  /// step may overshoot by at most its own cost.
  std::optional<std::uint64_t> oracle_budget;
  bool keep_iterates = true;
  /// Log f and ||grad f|| once per pass. Off for runs that only need steps.
  bool measure_passes = true;
  StepObserver observer;
  /// Abort once any coordinate exceeds this magnitude.
  double divergence_threshold = 1e12;
};

struct AdaSpiderConfig {
  double beta0 = 1.0;
  double g0 = 1.0;
  std::size_t steps = 1000;
  std::size_t period = 0;  // 0 selects n
  std::size_t batch = 1;
};

struct SpiderConfig {
  double epsilon = 0.01;
  double smoothness = 100.0;
  std::size_t steps = 1000;
  std::size_t period = 0;  // 0 selects n
  std::size_t batch = 1;   // the opaque n0 knob
};

struct SpiderBoostConfig {
  double smoothness = 200.0;
  std::optional<double> step_size;  // overrides 1/L
  std::size_t steps = 1000;
  std::size_t period = 0;  // 0 selects ceil(sqrt(n))
  std::size_t batch = 0;   // 0 selects ceil(sqrt(n))
};

struct SvrgConfig {
  double eta = 0.01;
  std::size_t epoch_length = 0;  // 0 selects n
  std::size_t steps = 1000;
};

struct SgdConfig {
  double eta = 0.01;
  std::size_t steps = 1000;
};

struct AdaGradNormConfig {
  double eta = 0.01;
  double b0 = 1e-4;
  std::size_t steps = 1000;
};

RunTrace adaspider_run(const FiniteSumProblem& problem, const ParamVector& x0,
                       const AdaSpiderConfig& config, Rng& rng, const RunOptions& options = {});
RunTrace spider_run(const FiniteSumProblem& problem, const ParamVector& x0,
                    const SpiderConfig& config, Rng& rng, const RunOptions& options = {});
RunTrace spiderboost_run(const FiniteSumProblem& problem, const ParamVector& x0,
                         const SpiderBoostConfig& config, Rng& rng, const RunOptions& options = {});
RunTrace svrg_run(const FiniteSumProblem& problem, const ParamVector& x0, const SvrgConfig& config,
                  Rng& rng, const RunOptions& options = {});
RunTrace sgd_run(const FiniteSumProblem& problem, const ParamVector& x0, const SgdConfig& config,
                 Rng& rng, const RunOptions& options = {});
RunTrace adagrad_norm_run(const FiniteSumProblem& problem, const ParamVector& x0,
                          const AdaGradNormConfig& config, Rng& rng, const RunOptions& options = {});

std::size_t ceil_sqrt(std::size_t n);

struct OutputIterates {
  ParamVector uniform;
  ParamVector best;
  std::size_t uniform_index;
  std::size_t best_index;
};

/// Uniform draw over x_0..x_{T-1} plus the measured iterate (t < T) with the
/// smallest true gradient norm, earliest on ties. Requires kept iterates.
OutputIterates select_output(const RunTrace& trace, Rng& rng);

}  // namespace adaspider
