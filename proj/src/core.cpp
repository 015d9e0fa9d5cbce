#include "adaspider/core.hpp"

#include <cmath>
#include <algorithm>
#include <sstream>

namespace adaspider {

void FiniteSumProblem::check_args(std::size_t i, const ParamVector& x) const {
  if (i < 1 || i > num_components()) {
    std::ostringstream msg;
    msg << "component index " << i << " outside 1.." << num_components();
    throw std::out_of_range(msg.str());
  }
  if (static_cast<std::size_t>(x.size()) != dim()) {
    std::ostringstream msg;
    msg << "point has dimension " << x.size() << ", problem expects " << dim();
    throw std::invalid_argument(msg.str());
  }
}

double FiniteSumProblem::component_value(std::size_t i, const ParamVector& x) const {
  check_args(i, x);
  const double v = value_impl(i - 1, x);
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "non-finite value from component " << i;
    throw NonFiniteError(msg.str(), i);
  }
  return v;
}

ParamVector FiniteSumProblem::component_gradient(std::size_t i, const ParamVector& x) const {
  check_args(i, x);
  ParamVector g = gradient_impl(i - 1, x);
  if (!all_finite(g)) {
    std::ostringstream msg;
    msg << "non-finite gradient from component " << i;
    throw NonFiniteError(msg.str(), i);
  }
  return g;
}

ParamVector component_gradient(const FiniteSumProblem& problem, std::size_t i,
                               const ParamVector& x, OracleCounter& counter) {
  counter.charge(1);
  return problem.component_gradient(i, x);
}

ParamVector true_gradient(const FiniteSumProblem& problem, const ParamVector& x) {
  if (static_cast<std::size_t>(x.size()) != problem.dim()) {
    std::ostringstream msg;
    msg << "point has dimension " << x.size() << ", problem expects " << problem.dim();
    throw std::invalid_argument(msg.str());
  }
  const std::size_t n = problem.num_components();
  ParamVector sum = ParamVector::Zero(x.size());
  for (std::size_t i = 1; i <= n; ++i) sum += problem.component_gradient(i, x);
  return sum / static_cast<double>(n);
}

ParamVector full_gradient(const FiniteSumProblem& problem, const ParamVector& x,
                          OracleCounter& counter) {
  ParamVector g = true_gradient(problem, x);
  counter.charge(problem.num_components());
  return g;
}

double true_value(const FiniteSumProblem& problem, const ParamVector& x) {
  const std::size_t n = problem.num_components();
  double sum = 0.0;
  for (std::size_t i = 1; i <= n; ++i) sum += problem.component_value(i, x);
  return sum / static_cast<double>(n);
}

ParamVector finite_difference_gradient(const ValueFunction& value_fn,
                                       const ParamVector& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  ParamVector grad(x.size());
  ParamVector probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    probe[j] = x[j] + h;
    const double forward = value_fn(probe);
    probe[j] = x[j] - h;
    const double backward = value_fn(probe);
    probe[j] = x[j];
    grad[j] = (forward - backward) / (2.0 * h);
  }
  return grad;
}

double relative_error(const ParamVector& analytic, const ParamVector& reference) {
  const double scale = std::max({analytic.norm(), reference.norm(), 1e-3});
  return (analytic - reference).norm() / scale;
}

Rng derive_rng(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(tag)};
  return Rng(seq);
}

}  // namespace adaspider
