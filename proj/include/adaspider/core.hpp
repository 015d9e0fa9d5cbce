#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace adaspider {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Dense decision variable x in R^d.
using ParamVector = VectorX<double>;

using Rng = std::mt19937_64;

/// Raised when an oracle produces NaN/Inf. Carries the offending component.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, std::size_t component)
      : std::runtime_error(what), component_(component) {}
  std::size_t component() const { return component_; }

 private:
  std::size_t component_;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

/// f(x) = (1/n) sum_i f_i(x). Component indices are 1-based.
///
/// Implementations are immutable after construction; every method is const
/// and may be called concurrently.
class FiniteSumProblem {
 public:
  virtual ~FiniteSumProblem() = default;

  virtual std::size_t num_components() const = 0;
  virtual std::size_t dim() const = 0;

  /// f_i(x). Throws std::out_of_range unless 1 <= i <= n.
  double component_value(std::size_t i, const ParamVector& x) const;
  /// grad f_i(x). Throws std::out_of_range unless 1 <= i <= n.
  ParamVector component_gradient(std::size_t i, const ParamVector& x) const;

  /// Smoothness constant shared by every component, when known.
  virtual std::optional<double> known_smoothness() const { return std::nullopt; }

 protected:
  // Called with a validated 0-based index and a correctly sized x.
  virtual double value_impl(std::size_t index, const ParamVector& x) const = 0;
  virtual ParamVector gradient_impl(std::size_t index, const ParamVector& x) const = 0;

 private:
  void check_args(std::size_t i, const ParamVector& x) const;
};

/// Component-gradient evaluations charged to one optimizer run.
class OracleCounter {
 public:
  std::uint64_t component_calls() const { return calls_; }
  void charge(std::uint64_t calls) { calls_ += calls; }

 private:
  std::uint64_t calls_ = 0;
};

/// grad f_i(x), charged one call.
ParamVector component_gradient(const FiniteSumProblem& problem, std::size_t i,
                               const ParamVector& x, OracleCounter& counter);

/// (1/n) sum_i grad f_i(x), charged n calls. Throws std::invalid_argument on
/// a dimension mismatch and NonFiniteError naming the first bad component.
ParamVector full_gradient(const FiniteSumProblem& problem, const ParamVector& x,
                          OracleCounter& counter);

// Uncharged evaluations for logging and verification only.
ParamVector true_gradient(const FiniteSumProblem& problem, const ParamVector& x);
double true_value(const FiniteSumProblem& problem, const ParamVector& x);

using ValueFunction = std::function<double(const ParamVector&)>;

/// Central differences with step h. Throws std::invalid_argument if h <= 0.
ParamVector finite_difference_gradient(const ValueFunction& value_fn,
                                       const ParamVector& x, double h = 1e-5);

/// ||a - b|| / max(||a||, ||b||, 1e-3), the measure gradcheck reports.
double relative_error(const ParamVector& analytic, const ParamVector& reference);

/// Independent stream for (master seed, stream index, tag).
Rng derive_rng(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t tag = 0);

}  // namespace adaspider
