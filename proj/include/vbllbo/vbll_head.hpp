#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "vbllbo/linalg.hpp"
#include "vbllbo/types.hpp"

namespace vbllbo {

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Zero-mean isotropic Gaussian prior N(0, scale * I) on each output's weights.
struct LastLayerPrior {
  double scale = 1.0;
};

/// Per-output homoscedastic noise with an inverse-gamma (1-D Wishart) prior
/// log p(s2) = -(dof/2 + 1) log s2 - wishart_scale / (2 s2).
struct NoiseModel {
  Vector log_sigma2;
  double wishart_scale = 0.01;
  double dof = 1.0;

  double sigma2(Eigen::Index k) const { return std::exp(log_sigma2(k)); }
  double log_prior(Eigen::Index k) const;
};

/// Gaussian variational posterior over one output's last-layer weights.
/// Stored in both moment form (mean) and natural form (precision factor and
/// precision-mean) so that conditioning stays additive.
struct VariationalPosterior {
  Vector mean;
  LowerTriangular precision_chol;
  Vector natural_mean;

  /// Builds the posterior from (mean, L), deriving natural_mean = L L^T mean.
  static VariationalPosterior from_mean(Vector mean, LowerTriangular precision_chol);
  /// Builds the posterior from (L, q), deriving mean = (L L^T)^{-1} q.
  static VariationalPosterior from_natural(LowerTriangular precision_chol, Vector natural_mean);

  Eigen::Index dim() const { return mean.size(); }
  /// Dense covariance S; only for tests and diagnostics.
  Matrix covariance() const;
};

struct VbllHead {
  std::vector<VariationalPosterior> posteriors;
  LastLayerPrior prior;
  NoiseModel noise;

  Eigen::Index outputs() const { return static_cast<Eigen::Index>(posteriors.size()); }
  Eigen::Index feature_dim() const { return posteriors.front().dim(); }
};

/// Head whose posteriors equal the prior.
VbllHead make_prior_head(Eigen::Index feature_dim, Eigen::Index outputs, LastLayerPrior prior,
                         NoiseModel noise);

struct Predictive {
  Vector mean;
  Vector variance;
};

Predictive predictive(const VbllHead& head, const Vector& features);

/// Per-output predictive mean and the input-independent part split off:
/// epistemic variance phi^T S phi without the noise term.
Vector epistemic_variance(const VbllHead& head, const Vector& features);

double kl_to_prior(const VariationalPosterior& post, const LastLayerPrior& prior);

/// Conditions every output on one observation (targets in standardized space)
/// via a rank-1 update of the precision factor. O(m^2) per output.
VbllHead recursive_update(const VbllHead& head, const Vector& features, const Vector& targets);

/// Exact Bayesian linear regression posterior for fixed features, using the
/// head noise variances in `noise`.
VbllHead fit_last_layer_exact(const Matrix& features, const Matrix& targets,
                              const LastLayerPrior& prior, const NoiseModel& noise);

double log_predictive_density(const VbllHead& head, const Vector& features, const Vector& targets);

std::vector<Vector> sample_head_weights(const VbllHead& head, Rng& rng);

/// Gradients of the per-datum-normalized negative ELBO.
struct ElboResult {
  double loss = 0.0;
  std::vector<Vector> grad_mean;          // per output, dim m
  std::vector<Matrix> grad_precision_chol;  // per output, lower triangle of dL
  Vector grad_log_sigma2;                 // per output
  Matrix grad_features;                   // B x m
};

/// Negative variational lower bound for a minibatch of `features` (B x m) and
/// `targets` (B x K) out of `total_count` points. Data terms are rescaled by
/// total/B, KL and noise prior are counted once, and the result is divided by
/// total_count.
ElboResult elbo_loss(const VbllHead& head, const Matrix& features, const Matrix& targets,
                     double total_count);

/// The head with each posterior covariance held as its lower Cholesky factor
/// (S = C C^T). Every bound term is then O(m^2 B), which is what training uses.
struct CovarianceHead {
  std::vector<Vector> mean;
  std::vector<Matrix> cov_chol;  // lower triangular, positive diagonal
  LastLayerPrior prior;
  NoiseModel noise;
};

CovarianceHead to_covariance_form(const VbllHead& head);
VbllHead from_covariance_form(const CovarianceHead& head);

struct CovarianceElboResult {
  double loss = 0.0;
  std::vector<Vector> grad_mean;
  std::vector<Matrix> grad_cov_chol;  // lower triangle of dC
  Vector grad_log_sigma2;
  Matrix grad_features;
};

/// Same objective as elbo_loss, differentiated w.r.t. the covariance factor.
CovarianceElboResult elbo_loss(const CovarianceHead& head, const Matrix& features, const Matrix& targets,
                               double total_count);

}  // namespace vbllbo
