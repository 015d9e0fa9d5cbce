#pragma once

#include "adaspider/core.hpp"
#include "adaspider/optimizers.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace adaspider {

/// Outcome of checking one inequality lhs <= rhs over many trials.
struct LemmaReport {
  std::string lemma;
  std::size_t trials = 0;
  std::size_t violations = 0;
  double worst_margin = 0.0;  // min over trials of rhs - lhs
  bool pass = true;           // violations == 0
  std::string detail;         // first violating trial, with both sides
  std::map<std::string, double> stats;

  /// Records one trial; a violation means lhs > rhs + slack.
  void record(double lhs, double rhs, double slack, const std::string& trial);
  void merge(const LemmaReport& other);
};

std::string to_json(const LemmaReport& report);
std::string to_json(const std::vector<LemmaReport>& reports);

struct CheckOptions {
  double slack = 1e-12;
  /// Mutation switch: negates the right-hand side so a correct checker must fail.
  bool negate_rhs = false;
};

/// sqrt(sum a_t) <= sum a_t / sqrt(sum_{s<=t} a_s), with 0/0 := 0.
LemmaReport check_sqrt_lemma(std::span<const double> alphas, const CheckOptions& options = {});
/// sum a_t / (1 + sum_{s<=t} a_s) <= log(1 + sum a_t).
LemmaReport check_log_lemma(std::span<const double> alphas, const CheckOptions& options = {});

/// Seeded sweeps over random sequences (lengths 1..max_length, values in
/// [0, max_value], with some exact zeros mixed in).
LemmaReport sweep_sqrt_lemma(std::size_t sequences, std::uint64_t seed, std::size_t max_length = 100,
                             double max_value = 1e3, const CheckOptions& options = {});
LemmaReport sweep_log_lemma(std::size_t sequences, std::uint64_t seed, std::size_t max_length = 100,
                            double max_value = 1e3, const CheckOptions& options = {});

struct GradientOutcome {
  ParamVector value;
  double probability;
};

/// One-step variance recursion for grad_x = grad f_i(x) - grad f_i(y) + grad_y:
///   E||grad_x - grad f(x)||^2 <= L^2 ||x - y||^2 + E||grad_y - grad f(y)||^2
/// with both expectations computed exactly over i and the grad_y outcomes.
/// Slack is relative to max(1, rhs).
LemmaReport check_variance_recursion(const FiniteSumProblem& problem, const ParamVector& x,
                                     const ParamVector& y,
                                     const std::vector<GradientOutcome>& grad_y_distribution,
                                     const CheckOptions& options = {});

/// Random quadratic instances with n <= 10 and d <= 3.
LemmaReport sweep_variance_recursion(std::size_t instances, std::uint64_t seed,
                                     const CheckOptions& options = {});

/// (a) ||x_{t+1} - x_t|| <= 1/beta0 at every step and (b)
///   sum ||grad_t||^2 <= 2 L^2 p^2 T / beta0^2 + 2 L^2 T^3 / beta0^2
///                       + 4 L T^2 ||grad f(x_0)|| / beta0 + 2 T ||grad f(x_0)||^2
/// where p is the reset period of the trace.
LemmaReport check_trajectory_bound(const RunTrace& trace, const FiniteSumProblem& problem,
                                   double beta0, const CheckOptions& options = {});

/// Monte-Carlo check over seeded AdaSpider runs of
///   sum_t E||grad_t - grad f(x_t)||^2 <= L^2 p sum_t E[gamma_t^2 ||grad_t||^2],
/// accepted within three standard errors of the paired per-seed difference.
/// Refuses fewer than 50 seeds.
LemmaReport check_cumulative_variance(const FiniteSumProblem& problem, const ParamVector& x0,
                                      const AdaSpiderConfig& config,
                                      std::span<const std::uint64_t> seeds,
                                      const CheckOptions& options = {});

/// Same protocol for the step-weighted form
///   E[sum gamma_t ||grad_t - grad f(x_t)||^2] <= L^2 p E[sum gamma_t^3 ||grad_t||^2].
LemmaReport check_weighted_variance(const FiniteSumProblem& problem, const ParamVector& x0,
                                    const AdaSpiderConfig& config,
                                    std::span<const std::uint64_t> seeds,
                                    const CheckOptions& options = {});

/// Fits log(mean_t ||grad f(x_t)||) against log T per seed and requires the
/// median slope to be at most `max_slope`. The grid needs at least three
/// increasing budgets spanning two decades.
LemmaReport check_rate_scaling(const FiniteSumProblem& problem, const ParamVector& x0,
                               const AdaSpiderConfig& config, const std::vector<std::size_t>& budgets,
                               std::span<const std::uint64_t> seeds, double max_slope = -0.35,
                               const CheckOptions& options = {});

/// Least-squares slope of y against x.
double fitted_slope(std::span<const double> x, std::span<const double> y);

/// Reset exactness and exact unbiasedness of the estimator increment on
/// seeded random quadratics (n <= 20).
LemmaReport check_estimator(std::size_t instances, std::uint64_t seed, const CheckOptions& options = {});

/// Step-size monotonicity and the 1/beta0 step bound on seeded runs.
LemmaReport check_step_contract(std::size_t runs, std::uint64_t seed, const CheckOptions& options = {});

/// Named suites: sqrt, log, variance, trajectory, cumulative, weighted,
/// estimator, step, rate; "all" runs each in that order.
std::vector<std::string> suite_names();
std::vector<LemmaReport> run_suite(const std::string& name, std::uint64_t seed,
                                   const CheckOptions& options = {});

}  // namespace adaspider
