#include "vbllbo/backbone.hpp"

#include <cmath>
#include <stdexcept>

namespace vbllbo {

namespace {

Matrix elu_matrix(const Matrix& pre) {
  return pre.unaryExpr([](double v) { return elu(v); });
}

// d ELU / d pre, expressed through the pre-activation.
Matrix elu_derivative(const Matrix& pre) {
  return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
}

}  // namespace

std::size_t BackboneNet::num_parameters() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

GradientSet GradientSet::zeros_like(const BackboneNet& net) {
  GradientSet g;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    g.weights.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(Vector::Zero(net.biases[l].size()));
  }
  return g;
}

double GradientSet::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weights) s += w.squaredNorm();
  for (const auto& b : biases) s += b.squaredNorm();
  return s;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

BackboneNet init_backbone(const std::vector<int>& layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2) {
    throw std::invalid_argument("init_backbone: need an input dim and at least one layer");
  }
  for (int d : layer_dims) {
    if (d < 1) throw std::invalid_argument("init_backbone: layer dims must be positive");
  }
  BackboneNet net;
  net.layer_dims = layer_dims;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int fan_in = layer_dims[l];
    const int fan_out = layer_dims[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    Matrix w(fan_out, fan_in);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = uniform(rng);
    Vector b(fan_out);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = uniform(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

Matrix forward_batch(const BackboneNet& net, const Matrix& x, ForwardTape* tape) {
  if (x.cols() != net.input_dim()) throw std::invalid_argument("forward: input dimension mismatch");
  if (tape) {
    tape->inputs.clear();
    tape->pre.clear();
  }
  Matrix h = x;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Matrix pre = h * net.weights[l].transpose();
    pre.rowwise() += net.biases[l].transpose();
    Matrix next = elu_matrix(pre);
    if (tape) {
      tape->inputs.push_back(std::move(h));
      tape->pre.push_back(std::move(pre));
    }
    h = std::move(next);
  }
  return h;
}

Vector forward(const BackboneNet& net, const Vector& x, ForwardTape* tape) {
  Matrix row = x.transpose();
  return forward_batch(net, row, tape).row(0).transpose();
}

GradientSet backward(const BackboneNet& net, const ForwardTape& tape, const Matrix& grad_features) {
  GradientSet g;
  g.weights.resize(net.num_layers());
  g.biases.resize(net.num_layers());
  Matrix upstream = grad_features;
  for (std::size_t i = net.num_layers(); i-- > 0;) {
    const Matrix delta = upstream.cwiseProduct(elu_derivative(tape.pre[i]));
    g.weights[i] = delta.transpose() * tape.inputs[i];
    g.biases[i] = delta.colwise().sum().transpose();
    if (i > 0) upstream = delta * net.weights[i];
  }
  return g;
}

GradientSet backward(const BackboneNet& net, const ForwardTape& tape, const Vector& grad_features) {
  return backward(net, tape, Matrix(grad_features.transpose()));
}

Matrix backward_input(const BackboneNet& net, const ForwardTape& tape,
                      const Matrix& grad_features) {
  Matrix upstream = grad_features;
  for (std::size_t i = net.num_layers(); i-- > 0;) {
    upstream = upstream.cwiseProduct(elu_derivative(tape.pre[i])) * net.weights[i];
  }
  return upstream;
}

Vector backward_input(const BackboneNet& net, const ForwardTape& tape,
                      const Vector& grad_features) {
  return backward_input(net, tape, Matrix(grad_features.transpose())).row(0).transpose();
}

GradientSet clip_gradients(GradientSet g, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_gradients: max_norm must be positive");
  const double norm = std::sqrt(g.squared_norm());
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& w : g.weights) w *= scale;
    for (auto& b : g.biases) b *= scale;
  }
  return g;
}

AdamW::AdamW(AdamWConfig config, std::vector<std::size_t> sizes, std::vector<bool> decay_mask)
    : config_(config), decay_mask_(std::move(decay_mask)) {
  if (decay_mask_.size() != sizes.size()) {
    throw std::invalid_argument("AdamW: decay mask does not match parameter list");
  }
  for (std::size_t n : sizes) {
    first_.emplace_back(n, 0.0);
    second_.emplace_back(n, 0.0);
  }
}

void AdamW::step(std::span<const std::span<double>> params,
                 std::span<const std::span<const double>> grads) {
  if (params.size() != first_.size() || grads.size() != first_.size()) {
    throw std::invalid_argument("AdamW::step: parameter list mismatch");
  }
  ++step_;
  const double lr = config_.learning_rate;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t a = 0; a < params.size(); ++a) {
    auto p = params[a];
    auto g = grads[a];
    if (p.size() != first_[a].size() || g.size() != p.size()) {
      throw std::invalid_argument("AdamW::step: array shape mismatch");
    }
    const auto n = static_cast<Eigen::Index>(p.size());
    Eigen::Map<Eigen::ArrayXd> pa(p.data(), n);
    Eigen::Map<const Eigen::ArrayXd> ga(g.data(), n);
    Eigen::Map<Eigen::ArrayXd> m(first_[a].data(), n);
    Eigen::Map<Eigen::ArrayXd> v(second_[a].data(), n);
    if (decay_mask_[a]) pa *= 1.0 - lr * config_.weight_decay;
    m = b1 * m + (1.0 - b1) * ga;
    v = b2 * v + (1.0 - b2) * ga.square();
    pa -= (lr / correction1) * m / ((v / correction2).sqrt() + config_.epsilon);
  }
}

std::vector<std::span<double>> parameter_views(BackboneNet& net) {
  std::vector<std::span<double>> views;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    views.emplace_back(net.weights[l].data(), static_cast<std::size_t>(net.weights[l].size()));
    views.emplace_back(net.biases[l].data(), static_cast<std::size_t>(net.biases[l].size()));
  }
  return views;
}

std::vector<std::span<const double>> gradient_views(const GradientSet& g) {
  std::vector<std::span<const double>> views;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    views.emplace_back(g.weights[l].data(), static_cast<std::size_t>(g.weights[l].size()));
    views.emplace_back(g.biases[l].data(), static_cast<std::size_t>(g.biases[l].size()));
  }
  return views;
}

std::vector<std::size_t> parameter_sizes(const BackboneNet& net) {
  std::vector<std::size_t> sizes;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    sizes.push_back(static_cast<std::size_t>(net.weights[l].size()));
    sizes.push_back(static_cast<std::size_t>(net.biases[l].size()));
  }
  return sizes;
}

}  // namespace vbllbo
