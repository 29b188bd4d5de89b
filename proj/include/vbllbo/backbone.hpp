#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "vbllbo/types.hpp"

namespace vbllbo {

inline double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

/// Dense feed-forward feature extractor. Every layer, including the last,
/// applies ELU; the last layer's width is the feature dimension.
struct BackboneNet {
  std::vector<int> layer_dims;   // input D, hidden widths..., feature dim m
  std::vector<Matrix> weights;   // layer l: layer_dims[l+1] x layer_dims[l]
  std::vector<Vector> biases;    // layer l: layer_dims[l+1]

  int input_dim() const { return layer_dims.front(); }
  int feature_dim() const { return layer_dims.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t num_parameters() const;
};

/// Per-parameter gradients, shape-matched to a BackboneNet.
struct GradientSet {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static GradientSet zeros_like(const BackboneNet& net);
  double squared_norm() const;
  GradientSet& operator+=(const GradientSet& other);
};

/// Activations recorded by forward_batch for use by backward.
struct ForwardTape {
  std::vector<Matrix> inputs;  // input to layer l, B x layer_dims[l]
  std::vector<Matrix> pre;     // pre-activation of layer l, B x layer_dims[l+1]
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
BackboneNet init_backbone(const std::vector<int>& layer_dims, std::uint64_t seed);

/// Rows of `x` are inputs; returns one feature row per input.
Matrix forward_batch(const BackboneNet& net, const Matrix& x, ForwardTape* tape = nullptr);
Vector forward(const BackboneNet& net, const Vector& x, ForwardTape* tape = nullptr);

/// Gradient of sum_b <features_b, grad_features_b> w.r.t. every parameter.
GradientSet backward(const BackboneNet& net, const ForwardTape& tape, const Matrix& grad_features);
GradientSet backward(const BackboneNet& net, const ForwardTape& tape, const Vector& grad_features);

/// Same contraction, differentiated w.r.t. the inputs instead (B x D).
Matrix backward_input(const BackboneNet& net, const ForwardTape& tape,
                      const Matrix& grad_features);
Vector backward_input(const BackboneNet& net, const ForwardTape& tape,
                      const Vector& grad_features);

/// Rescales so the global L2 norm is at most max_norm.
GradientSet clip_gradients(GradientSet g, double max_norm);

struct AdamWConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// AdamW over an arbitrary list of flat parameter arrays. Weight decay is
/// decoupled and applied only to arrays whose decay flag is set.
class AdamW {
 public:
  AdamW(AdamWConfig config, std::vector<std::size_t> sizes, std::vector<bool> decay_mask);

  void step(std::span<const std::span<double>> params,
            std::span<const std::span<const double>> grads);

  long steps() const { return step_; }
  const AdamWConfig& config() const { return config_; }

 private:
  AdamWConfig config_;
  std::vector<bool> decay_mask_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  long step_ = 0;
};

/// Flat views over the backbone's parameter arrays, in weights-then-bias
/// order per layer; matching views over a GradientSet.
std::vector<std::span<double>> parameter_views(BackboneNet& net);
std::vector<std::span<const double>> gradient_views(const GradientSet& g);
std::vector<std::size_t> parameter_sizes(const BackboneNet& net);

}  // namespace vbllbo
