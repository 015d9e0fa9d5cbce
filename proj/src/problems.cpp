#include "adaspider/problems.hpp"

#include <algorithm>
#include <cmath>

namespace adaspider {

namespace {

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double spectral_radius(const MatrixX<double>& a) {
  Eigen::SelfAdjointEigenSolver<MatrixX<double>> solver(a, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

void check_layer_dims(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("an MLP needs at least input and output sizes");
  for (auto v : dims)
    if (v == 0) throw std::invalid_argument("MLP layer sizes must be positive");
}

}  // namespace

LossKind parse_loss_kind(const std::string& name) {
  if (name == "logistic") return LossKind::Logistic;
  if (name == "squared") return LossKind::Squared;
  throw std::invalid_argument("unknown loss '" + name + "'");
}

std::string to_string(LossKind kind) { return kind == LossKind::Logistic ? "logistic" : "squared"; }

RegularizedErm::RegularizedErm(Dataset data, LossKind loss, double lambda)
    : data_(std::move(data)), loss_(loss), lambda_(lambda) {
  data_.validate();
  if (data_.size() == 0) throw std::invalid_argument("ERM problem needs at least one row");
  if (!(lambda_ >= 0.0)) throw std::invalid_argument("regularizer weight must be non-negative");
  if (loss_ == LossKind::Logistic) {
    for (std::size_t r = 0; r < data_.size(); ++r)
      if (data_.labels[r] != 1.0 && data_.labels[r] != -1.0)
        throw std::invalid_argument("logistic labels must be -1 or +1 (row " + std::to_string(r + 1) + ")");
  }
  const double c = loss_ == LossKind::Logistic ? 0.25 : 1.0;
  double peak = 0.0;
  for (std::size_t r = 0; r < data_.size(); ++r) peak = std::max(peak, data_.row_squared_norm(r));
  smoothness_ = c * peak + lambda_ * kRegularizerCurvature;
}

double RegularizedErm::value_impl(std::size_t index, const ParamVector& x) const {
  const double margin = data_.dot(index, x);
  const double b = data_.labels[index];
  const double loss = loss_ == LossKind::Logistic ? softplus(-b * margin)
                                                  : 0.5 * (margin - b) * (margin - b);
  return loss + lambda_ * nonconvex_regularizer(x);
}

ParamVector RegularizedErm::gradient_impl(std::size_t index, const ParamVector& x) const {
  ParamVector g = lambda_ * nonconvex_regularizer_grad(x);
  const double margin = data_.dot(index, x);
  const double b = data_.labels[index];
  const double scale = loss_ == LossKind::Logistic ? -b * sigmoid(-b * margin) : margin - b;
  data_.axpy(index, scale, g);
  return g;
}

ParamVector erm_component_gradient(const RegularizedErm& problem, std::size_t i,
                                   const ParamVector& x) {
  return problem.component_gradient(i, x);
}

QuadraticProblem::QuadraticProblem(std::vector<MatrixX<double>> curvatures,
                                   std::vector<ParamVector> linear_terms)
    : curvatures_(std::move(curvatures)), linear_terms_(std::move(linear_terms)) {
  if (curvatures_.empty() || curvatures_.size() != linear_terms_.size())
    throw std::invalid_argument("quadratic needs matching, non-empty curvature and linear terms");
  dim_ = static_cast<std::size_t>(curvatures_.front().rows());
  smoothness_ = 0.0;
  for (std::size_t i = 0; i < curvatures_.size(); ++i) {
    const auto& a = curvatures_[i];
    if (static_cast<std::size_t>(a.rows()) != dim_ || static_cast<std::size_t>(a.cols()) != dim_ ||
        static_cast<std::size_t>(linear_terms_[i].size()) != dim_)
      throw std::invalid_argument("quadratic component shapes disagree");
    if (!a.isApprox(a.transpose())) throw std::invalid_argument("curvature must be symmetric");
    smoothness_ = std::max(smoothness_, spectral_radius(a));
  }
}

double QuadraticProblem::value_impl(std::size_t index, const ParamVector& x) const {
  return 0.5 * x.dot(curvatures_[index] * x) - linear_terms_[index].dot(x);
}

ParamVector QuadraticProblem::gradient_impl(std::size_t index, const ParamVector& x) const {
  return curvatures_[index] * x - linear_terms_[index];
}

QuadraticProblem scalar_quadratic(const std::vector<double>& curvatures) {
  std::vector<MatrixX<double>> a;
  std::vector<ParamVector> c;
  for (double v : curvatures) {
    a.push_back(MatrixX<double>::Constant(1, 1, v));
    c.push_back(ParamVector::Zero(1));
  }
  return QuadraticProblem(std::move(a), std::move(c));
}

QuadraticProblem random_quadratic(std::size_t n, std::size_t d, Rng& rng, bool positive_definite) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> eig(positive_definite ? 0.1 : -1.0, 2.0);
  std::vector<MatrixX<double>> a;
  std::vector<ParamVector> c;
  for (std::size_t i = 0; i < n; ++i) {
    const MatrixX<double> g = MatrixX<double>::NullaryExpr(d, d, [&] { return normal(rng); });
    const MatrixX<double> q = Eigen::HouseholderQR<MatrixX<double>>(g).householderQ();
    const ParamVector spectrum = ParamVector::NullaryExpr(d, [&] { return eig(rng); });
    MatrixX<double> ai = q * spectrum.asDiagonal() * q.transpose();
    ai = 0.5 * (ai + ai.transpose()).eval();
    a.push_back(std::move(ai));
    c.push_back(ParamVector::NullaryExpr(d, [&] { return normal(rng); }));
  }
  return QuadraticProblem(std::move(a), std::move(c));
}

std::size_t MLPNet::param_count(const std::vector<std::size_t>& layer_dims) {
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l)
    total += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
  return total;
}

namespace {

struct LayerView {
  Eigen::Map<const MatrixX<double>> weight;
  Eigen::Map<const ParamVector> bias;
};

std::vector<LayerView> layer_views(const MLPNet& net) {
  check_layer_dims(net.layer_dims);
  if (static_cast<std::size_t>(net.params.size()) != MLPNet::param_count(net.layer_dims))
    throw std::invalid_argument("parameter vector does not match the layer sizes");
  std::vector<LayerView> views;
  const double* p = net.params.data();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const auto in = static_cast<Eigen::Index>(net.layer_dims[l]);
    const auto out = static_cast<Eigen::Index>(net.layer_dims[l + 1]);
    views.push_back({Eigen::Map<const MatrixX<double>>(p, out, in),
                     Eigen::Map<const ParamVector>(p + out * in, out)});
    p += out * in + out;
  }
  return views;
}

}  // namespace

ParamVector mlp_forward(const MLPNet& net, const ParamVector& input) {
  const auto layers = layer_views(net);
  if (static_cast<std::size_t>(input.size()) != net.input_dim())
    throw std::invalid_argument("input length does not match the first layer");
  ParamVector h = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    ParamVector z = layers[l].weight * h + layers[l].bias;
    if (l + 1 < layers.size()) z = z.unaryExpr([](double v) { return elu(v); });
    h = std::move(z);
  }
  return h;
}

LossAndGradient mlp_loss_and_gradient(const MLPNet& net, const ParamVector& input,
                                      const ParamVector& one_hot_label) {
  const auto layers = layer_views(net);
  if (static_cast<std::size_t>(input.size()) != net.input_dim())
    throw std::invalid_argument("input length does not match the first layer");
  if (static_cast<std::size_t>(one_hot_label.size()) != net.output_dim() ||
      (one_hot_label.array() != 0.0 && one_hot_label.array() != 1.0).any() ||
      one_hot_label.sum() != 1.0)
    throw std::invalid_argument("label must be one-hot over the output classes");

  // activations[l] feeds layer l; pre[l] is layer l's affine output.
  std::vector<ParamVector> activations{input};
  std::vector<ParamVector> pre;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    pre.push_back(layers[l].weight * activations.back() + layers[l].bias);
    if (l + 1 < layers.size()) activations.push_back(pre.back().unaryExpr([](double v) { return elu(v); }));
  }
  const ParamVector& logits = pre.back();
  const double lse = logsumexp(logits);
  const double loss = -one_hot_label.dot(logits) + lse;

  ParamVector grad(net.params.size());
  ParamVector delta = (logits.array() - lse).exp().matrix() - one_hot_label;
  Eigen::Index offset = grad.size();
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto in = layers[l].weight.cols();
    const auto out = layers[l].weight.rows();
    offset -= out * in + out;
    Eigen::Map<MatrixX<double>>(grad.data() + offset, out, in).noalias() = delta * activations[l].transpose();
    grad.segment(offset + out * in, out) = delta;
    if (l > 0) {
      ParamVector back = layers[l].weight.transpose() * delta;
      delta = back.cwiseProduct(pre[l - 1].unaryExpr([](double v) { return elu_derivative(v); }));
    }
  }
  return {loss, std::move(grad)};
}

MLPNet kaiming_uniform_scaled_init(const std::vector<std::size_t>& layer_dims, double c_init,
                                   Rng& rng) {
  if (layer_dims.empty()) throw std::invalid_argument("layer sizes must not be empty");
  check_layer_dims(layer_dims);
  if (!(c_init > 0.0)) throw std::invalid_argument("c_init must be positive");
  MLPNet net{layer_dims, ParamVector::Zero(MLPNet::param_count(layer_dims))};
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(layer_dims[l]);
    const auto out = static_cast<Eigen::Index>(layer_dims[l + 1]);
    const double bound = std::sqrt(3.0 * c_init / static_cast<double>(in));
    std::uniform_real_distribution<double> weight(-bound, bound);
    for (Eigen::Index k = 0; k < out * in; ++k) net.params[offset + k] = weight(rng);
    offset += out * in + out;
  }
  return net;
}

MlpProblem::MlpProblem(const Dataset& data, std::vector<std::size_t> layer_dims)
    : layer_dims_(std::move(layer_dims)) {
  check_layer_dims(layer_dims_);
  data.validate();
  if (data.size() == 0) throw std::invalid_argument("MLP problem needs at least one sample");
  if (data.dim > layer_dims_.front())
    throw std::invalid_argument("data dimension exceeds the network input size");
  inputs_ = MatrixX<double>::Zero(static_cast<Eigen::Index>(layer_dims_.front()),
                                  static_cast<Eigen::Index>(data.size()));
  const std::size_t classes = layer_dims_.back();
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (const auto& f : data.rows[r]) inputs_(static_cast<Eigen::Index>(f.index - 1), static_cast<Eigen::Index>(r)) = f.value;
    const double label = data.labels[r];
    if (label < 0.0 || label != std::floor(label) || label >= static_cast<double>(classes))
      throw std::invalid_argument("class label out of range on row " + std::to_string(r + 1));
    classes_.push_back(static_cast<std::size_t>(label));
  }
}

double MlpProblem::value_impl(std::size_t index, const ParamVector& x) const {
  const ParamVector logits = mlp_forward(network(x), inputs_.col(static_cast<Eigen::Index>(index)));
  return logsumexp(logits) - logits[static_cast<Eigen::Index>(classes_[index])];
}

ParamVector MlpProblem::gradient_impl(std::size_t index, const ParamVector& x) const {
  ParamVector label = ParamVector::Zero(static_cast<Eigen::Index>(layer_dims_.back()));
  label[static_cast<Eigen::Index>(classes_[index])] = 1.0;
  return mlp_loss_and_gradient(network(x), inputs_.col(static_cast<Eigen::Index>(index)), label).gradient;
}

}  // namespace adaspider
