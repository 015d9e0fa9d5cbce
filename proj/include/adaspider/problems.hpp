#pragma once

#include "adaspider/core.hpp"
#include "adaspider/data.hpp"

#include <string>
#include <vector>

namespace adaspider {

/// g(x) = sum_j x_j^2 / (1 + x_j^2). Bounded in [0, d).
template <typename Derived>
typename Derived::Scalar nonconvex_regularizer(const Eigen::MatrixBase<Derived>& x) {
  const auto sq = x.array().square();
  return (sq / (1 + sq)).sum();
}

/// dg/dx_j = 2 x_j / (1 + x_j^2)^2.
template <typename Derived>
VectorX<typename Derived::Scalar> nonconvex_regularizer_grad(const Eigen::MatrixBase<Derived>& x) {
  const auto denom = (1 + x.array().square()).square();
  return (2 * x.array() / denom).matrix();
}

// sup_z |d^2/dz^2 z^2/(1+z^2)|, attained at z = 0.
inline constexpr double kRegularizerCurvature = 2.0;

enum class LossKind { Logistic, Squared };

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

/// Component i is loss(x; a_i, b_i) + lambda * g(x), so the mean over i is
/// the regularized empirical risk.
class RegularizedErm final : public FiniteSumProblem {
 public:
  /// Logistic problems require labels in {-1, +1}; see to_binary_labels.
  RegularizedErm(Dataset data, LossKind loss, double lambda);

  std::size_t num_components() const override { return data_.size(); }
  std::size_t dim() const override { return data_.dim; }
  /// max_i c * ||a_i||^2 + 2 * lambda with c = 1/4 (logistic) or 1 (squared).
  std::optional<double> known_smoothness() const override { return smoothness_; }

  const Dataset& data() const { return data_; }
  LossKind loss() const { return loss_; }
  double lambda() const { return lambda_; }

 protected:
  double value_impl(std::size_t index, const ParamVector& x) const override;
  ParamVector gradient_impl(std::size_t index, const ParamVector& x) const override;

 private:
  Dataset data_;
  LossKind loss_;
  double lambda_;
  double smoothness_;
};

/// grad of loss(x; a_i, b_i) + lambda * g(x) for 1-based i.
ParamVector erm_component_gradient(const RegularizedErm& problem, std::size_t i,
                                   const ParamVector& x);

/// f_i(x) = 0.5 x^T A_i x - c_i^T x with symmetric A_i. Smoothness is the
/// largest |eigenvalue| over all A_i, so it is exact.
class QuadraticProblem final : public FiniteSumProblem {
 public:
  QuadraticProblem(std::vector<MatrixX<double>> curvatures, std::vector<ParamVector> linear_terms);

  std::size_t num_components() const override { return curvatures_.size(); }
  std::size_t dim() const override { return dim_; }
  std::optional<double> known_smoothness() const override { return smoothness_; }

  const MatrixX<double>& curvature(std::size_t i) const { return curvatures_.at(i - 1); }
  const ParamVector& linear_term(std::size_t i) const { return linear_terms_.at(i - 1); }

 protected:
  double value_impl(std::size_t index, const ParamVector& x) const override;
  ParamVector gradient_impl(std::size_t index, const ParamVector& x) const override;

 private:
  std::vector<MatrixX<double>> curvatures_;
  std::vector<ParamVector> linear_terms_;
  std::size_t dim_;
  double smoothness_;
};

/// 1-d components f_i(x) = 0.5 * c_i * x^2.
QuadraticProblem scalar_quadratic(const std::vector<double>& curvatures);

/// n random d-dimensional quadratics. With positive_definite the curvatures
/// have eigenvalues in [0.1, 2]; otherwise in [-1, 2].
QuadraticProblem random_quadratic(std::size_t n, std::size_t d, Rng& rng,
                                  bool positive_definite = true);

/// Fully connected ELU network. Parameters are laid out layer by layer as
/// the column-major weight matrix (out x in) followed by the bias (out).
struct MLPNet {
  std::vector<std::size_t> layer_dims;
  ParamVector params;

  static std::size_t param_count(const std::vector<std::size_t>& layer_dims);
  std::size_t num_layers() const { return layer_dims.size() - 1; }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
};

inline double elu(double z) { return z > 0.0 ? z : std::expm1(z); }
inline double elu_derivative(double z) { return z > 0.0 ? 1.0 : std::exp(z); }

template <typename Derived>
typename Derived::Scalar logsumexp(const Eigen::MatrixBase<Derived>& z) {
  const auto peak = z.maxCoeff();
  return peak + std::log((z.array() - peak).exp().sum());
}

/// Affine/ELU alternation with no activation after the last layer.
ParamVector mlp_forward(const MLPNet& net, const ParamVector& input);

struct LossAndGradient {
  double loss;
  ParamVector gradient;
};

/// Cross-entropy -b^T z + logsumexp(z) of the logits z and its gradient with
/// respect to every weight and bias.
LossAndGradient mlp_loss_and_gradient(const MLPNet& net, const ParamVector& input,
                                      const ParamVector& one_hot_label);

/// Weights ~ U[-sqrt(3 c/d_in), sqrt(3 c/d_in)] (variance c/d_in), biases 0.
MLPNet kaiming_uniform_scaled_init(const std::vector<std::size_t>& layer_dims, double c_init,
                                   Rng& rng);

/// Classification over a dataset whose labels are class ids 0..C-1.
class MlpProblem final : public FiniteSumProblem {
 public:
  MlpProblem(const Dataset& data, std::vector<std::size_t> layer_dims);

  std::size_t num_components() const override { return static_cast<std::size_t>(inputs_.cols()); }
  std::size_t dim() const override { return MLPNet::param_count(layer_dims_); }

  const std::vector<std::size_t>& layer_dims() const { return layer_dims_; }
  MLPNet network(const ParamVector& params) const { return {layer_dims_, params}; }

 protected:
  double value_impl(std::size_t index, const ParamVector& x) const override;
  ParamVector gradient_impl(std::size_t index, const ParamVector& x) const override;

 private:
  std::vector<std::size_t> layer_dims_;
  MatrixX<double> inputs_;  // one column per sample
  std::vector<std::size_t> classes_;
};

}  // namespace adaspider
