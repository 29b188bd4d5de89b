#include "vbllbo/vbll_head.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace vbllbo {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

double log_normal(double y, double mean, double variance) {
  const double r = y - mean;
  return -kHalfLog2Pi - 0.5 * std::log(variance) - 0.5 * r * r / variance;
}

}  // namespace

double NoiseModel::log_prior(Eigen::Index k) const {
  return -(0.5 * dof + 1.0) * log_sigma2(k) - 0.5 * wishart_scale / sigma2(k);
}

VariationalPosterior VariationalPosterior::from_mean(Vector mean, LowerTriangular precision_chol) {
  VariationalPosterior p;
  const auto& l = precision_chol.matrix();
  p.natural_mean = l.triangularView<Eigen::Lower>() *
                   (l.triangularView<Eigen::Lower>().transpose() * mean);
  p.mean = std::move(mean);
  p.precision_chol = std::move(precision_chol);
  return p;
}

VariationalPosterior VariationalPosterior::from_natural(LowerTriangular precision_chol,
                                                        Vector natural_mean) {
  VariationalPosterior p;
  p.mean = tri_solve(precision_chol, tri_solve(precision_chol, natural_mean, false), true);
  p.natural_mean = std::move(natural_mean);
  p.precision_chol = std::move(precision_chol);
  return p;
}

Matrix VariationalPosterior::covariance() const {
  const Matrix inv = tri_solve(precision_chol, Matrix(Matrix::Identity(dim(), dim())), false);
  return inv.transpose() * inv;
}

VbllHead make_prior_head(Eigen::Index feature_dim, Eigen::Index outputs, LastLayerPrior prior,
                         NoiseModel noise) {
  if (feature_dim < 1 || outputs < 1) throw std::invalid_argument("make_prior_head: empty head");
  if (!(prior.scale > 0.0)) throw std::invalid_argument("make_prior_head: prior scale must be > 0");
  if (noise.log_sigma2.size() != outputs) {
    throw std::invalid_argument("make_prior_head: noise model does not match output count");
  }
  VbllHead head;
  head.prior = prior;
  head.noise = std::move(noise);
  const Vector diag = Vector::Constant(feature_dim, 1.0 / std::sqrt(prior.scale));
  for (Eigen::Index k = 0; k < outputs; ++k) {
    head.posteriors.push_back(
        VariationalPosterior::from_natural(LowerTriangular::diagonal(diag), Vector::Zero(feature_dim)));
  }
  return head;
}

Vector epistemic_variance(const VbllHead& head, const Vector& features) {
  Vector out(head.outputs());
  for (Eigen::Index k = 0; k < head.outputs(); ++k) {
    out(k) = tri_solve(head.posteriors[k].precision_chol, features, false).squaredNorm();
  }
  return out;
}

Predictive predictive(const VbllHead& head, const Vector& features) {
  if (features.size() != head.feature_dim()) {
    throw std::invalid_argument("predictive: feature dimension mismatch");
  }
  Predictive p;
  p.mean.resize(head.outputs());
  p.variance = epistemic_variance(head, features);
  for (Eigen::Index k = 0; k < head.outputs(); ++k) {
    p.mean(k) = head.posteriors[k].mean.dot(features);
    p.variance(k) += head.noise.sigma2(k);
  }
  return p;
}

double kl_to_prior(const VariationalPosterior& post, const LastLayerPrior& prior) {
  const double m = static_cast<double>(post.dim());
  const double s0 = prior.scale;
  const double trace_cov = inv_trace_from_chol(post.precision_chol);
  const double logdet_cov = -logdet_precision(post.precision_chol);
  return 0.5 * (trace_cov / s0 + post.mean.squaredNorm() / s0 - m + m * std::log(s0) - logdet_cov);
}

VbllHead recursive_update(const VbllHead& head, const Vector& features, const Vector& targets) {
  if (features.size() != head.feature_dim() || targets.size() != head.outputs()) {
    throw std::invalid_argument("recursive_update: dimension mismatch");
  }
  VbllHead out = head;
  for (Eigen::Index k = 0; k < head.outputs(); ++k) {
    const auto& post = head.posteriors[k];
    const double sigma2 = head.noise.sigma2(k);
    LowerTriangular l = chol_rank1_update(post.precision_chol, features / std::sqrt(sigma2));
    Vector q = post.natural_mean + features * (targets(k) / sigma2);
    out.posteriors[k] = VariationalPosterior::from_natural(std::move(l), std::move(q));
  }
  return out;
}

VbllHead fit_last_layer_exact(const Matrix& features, const Matrix& targets,
                              const LastLayerPrior& prior, const NoiseModel& noise) {
  const Eigen::Index m = features.cols();
  const Eigen::Index outputs = targets.cols();
  if (features.rows() != targets.rows()) {
    throw std::invalid_argument("fit_last_layer_exact: row count mismatch");
  }
  VbllHead head = make_prior_head(m, outputs, prior, noise);
  const Matrix gram = features.transpose() * features;
  for (Eigen::Index k = 0; k < outputs; ++k) {
    const double sigma2 = noise.sigma2(k);
    Matrix precision = gram / sigma2;
    precision.diagonal().array() += 1.0 / prior.scale;
    Vector q = features.transpose() * targets.col(k) / sigma2;
    head.posteriors[k] = VariationalPosterior::from_natural(cholesky(precision), std::move(q));
  }
  return head;
}

double log_predictive_density(const VbllHead& head, const Vector& features, const Vector& targets) {
  const Predictive p = predictive(head, features);
  double total = 0.0;
  for (Eigen::Index k = 0; k < head.outputs(); ++k) {
    total += log_normal(targets(k), p.mean(k), p.variance(k));
  }
  return total;
}

std::vector<Vector> sample_head_weights(const VbllHead& head, Rng& rng) {
  std::vector<Vector> draws;
  draws.reserve(head.posteriors.size());
  for (const auto& post : head.posteriors) {
    draws.push_back(sample_gaussian(post.mean, post.precision_chol, rng));
  }
  return draws;
}

ElboResult elbo_loss(const VbllHead& head, const Matrix& features, const Matrix& targets,
                     double total_count) {
  const Eigen::Index batch = features.rows();
  const Eigen::Index m = head.feature_dim();
  const Eigen::Index outputs = head.outputs();
  if (batch < 1 || targets.rows() != batch || features.cols() != m || targets.cols() != outputs) {
    throw std::invalid_argument("elbo_loss: batch shape mismatch");
  }
  if (total_count < static_cast<double>(batch)) {
    throw std::invalid_argument("elbo_loss: total count smaller than batch");
  }
  const double scale = total_count / static_cast<double>(batch);
  const double s0 = head.prior.scale;

  ElboResult result;
  result.grad_mean.resize(outputs);
  result.grad_precision_chol.resize(outputs);
  result.grad_log_sigma2.resize(outputs);
  result.grad_features = Matrix::Zero(batch, m);

  double elbo = 0.0;
  const Matrix eye = Matrix::Identity(m, m);
  for (Eigen::Index k = 0; k < outputs; ++k) {
    const auto& post = head.posteriors[k];
    const auto l = post.precision_chol.matrix().triangularView<Eigen::Lower>();
    const double sigma2 = head.noise.sigma2(k);
    const double log_sigma2 = head.noise.log_sigma2(k);

    const Vector residual = targets.col(k) - features * post.mean;
    const Matrix u = l.solve(features.transpose());         // m x B, columns L^{-1} phi_b
    const Matrix z = l.transpose().solve(u);                 // m x B, columns S phi_b
    const Vector trace_terms = u.colwise().squaredNorm().transpose();

    const double sum_r2 = residual.squaredNorm();
    const double sum_t = trace_terms.sum();
    const double data = static_cast<double>(batch) * (-kHalfLog2Pi - 0.5 * log_sigma2) -
                        0.5 * (sum_r2 + sum_t) / sigma2;

    const Matrix l_inv = l.solve(eye);
    const double trace_cov = l_inv.squaredNorm();
    const double logdet_prec = logdet_precision(post.precision_chol);
    const double kl = 0.5 * (trace_cov / s0 + post.mean.squaredNorm() / s0 - static_cast<double>(m) +
                             static_cast<double>(m) * std::log(s0) + logdet_prec);
    const double log_prior = head.noise.log_prior(k);
    elbo += scale * data - kl + log_prior;

    // d elbo / d mean
    Vector d_mean = scale * (features.transpose() * residual) / sigma2 - post.mean / s0;
    // d elbo / d L: data trace term plus KL (trace and log-det parts).
    Matrix d_chol = (scale / sigma2) * (z * u.transpose());
    const Matrix cov_times_linv_t = l_inv.transpose() * (l_inv * l_inv.transpose());
    d_chol += cov_times_linv_t / s0;
    d_chol.diagonal().array() -= post.precision_chol.matrix().diagonal().array().inverse();
    // d elbo / d log sigma2
    const double d_log_sigma2 = scale * (-0.5 * static_cast<double>(batch) + 0.5 * (sum_r2 + sum_t) / sigma2) -
                                (0.5 * head.noise.dof + 1.0) + 0.5 * head.noise.wishart_scale / sigma2;
    // d elbo / d phi_b = scale / sigma2 * (r_b * mean - S phi_b)
    result.grad_features.noalias() +=
        (scale / sigma2) * (residual * post.mean.transpose() - z.transpose());

    result.grad_mean[k] = -d_mean / total_count;
    result.grad_precision_chol[k] = (-d_chol / total_count).triangularView<Eigen::Lower>();
    result.grad_log_sigma2(k) = -d_log_sigma2 / total_count;
  }
  result.grad_features /= -total_count;
  result.loss = -elbo / total_count;
  if (!std::isfinite(result.loss)) {
    std::ostringstream os;
    os << "elbo_loss: non-finite loss " << result.loss;
    throw NonFiniteLoss(os.str());
  }
  return result;
}

}  // namespace vbllbo

namespace vbllbo {

CovarianceHead to_covariance_form(const VbllHead& head) {
  CovarianceHead out;
  out.prior = head.prior;
  out.noise = head.noise;
  for (const auto& post : head.posteriors) {
    out.mean.push_back(post.mean);
    out.cov_chol.push_back(inverse_gram_factor(post.precision_chol).matrix());
  }
  return out;
}

VbllHead from_covariance_form(const CovarianceHead& head) {
  VbllHead out;
  out.prior = head.prior;
  out.noise = head.noise;
  for (std::size_t k = 0; k < head.mean.size(); ++k) {
    out.posteriors.push_back(
        VariationalPosterior::from_mean(head.mean[k], inverse_gram_factor(LowerTriangular(head.cov_chol[k]))));
  }
  return out;
}

CovarianceElboResult elbo_loss(const CovarianceHead& head, const Matrix& features, const Matrix& targets,
                               double total_count) {
  const Eigen::Index batch = features.rows();
  const Eigen::Index outputs = static_cast<Eigen::Index>(head.mean.size());
  const Eigen::Index m = outputs > 0 ? head.mean.front().size() : 0;
  if (batch < 1 || targets.rows() != batch || features.cols() != m || targets.cols() != outputs) {
    throw std::invalid_argument("elbo_loss: batch shape mismatch");
  }
  if (total_count < static_cast<double>(batch)) {
    throw std::invalid_argument("elbo_loss: total count smaller than batch");
  }
  const double scale = total_count / static_cast<double>(batch);
  const double s0 = head.prior.scale;

  CovarianceElboResult result;
  result.grad_mean.resize(static_cast<std::size_t>(outputs));
  result.grad_cov_chol.resize(static_cast<std::size_t>(outputs));
  result.grad_log_sigma2.resize(outputs);
  result.grad_features = Matrix::Zero(batch, m);

  double elbo = 0.0;
  for (Eigen::Index k = 0; k < outputs; ++k) {
    const auto& mean = head.mean[static_cast<std::size_t>(k)];
    const auto c = head.cov_chol[static_cast<std::size_t>(k)].triangularView<Eigen::Lower>();
    const double sigma2 = head.noise.sigma2(k);
    const double log_sigma2 = head.noise.log_sigma2(k);

    const Vector residual = targets.col(k) - features * mean;
    const Matrix v = features * c;  // B x m, rows (C^T phi_b)^T
    const double sum_r2 = residual.squaredNorm();
    const double sum_t = v.squaredNorm();
    const double data = static_cast<double>(batch) * (-kHalfLog2Pi - 0.5 * log_sigma2) -
                        0.5 * (sum_r2 + sum_t) / sigma2;

    const Matrix& c_full = head.cov_chol[static_cast<std::size_t>(k)];
    const Vector diag = c_full.diagonal();
    const double logdet_cov = 2.0 * diag.array().log().sum();
    double trace_cov = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) trace_cov += c_full.col(j).tail(m - j).squaredNorm();
    const double kl = 0.5 * (trace_cov / s0 +
                             mean.squaredNorm() / s0 - static_cast<double>(m) +
                             static_cast<double>(m) * std::log(s0) - logdet_cov);
    elbo += scale * data - kl + head.noise.log_prior(k);

    const Vector d_mean = scale * (features.transpose() * residual) / sigma2 - mean / s0;
    Matrix d_c = -(scale / sigma2) * (features.transpose() * v);
    d_c -= c_full / s0;
    d_c.diagonal().array() += diag.array().inverse();
    const double d_log_sigma2 = scale * (-0.5 * static_cast<double>(batch) + 0.5 * (sum_r2 + sum_t) / sigma2) -
                                (0.5 * head.noise.dof + 1.0) + 0.5 * head.noise.wishart_scale / sigma2;
    // d/dphi_b: r_b mean - S phi_b, with S phi_b = C v_b.
    result.grad_features.noalias() += (scale / sigma2) * (residual * mean.transpose() - v * c.transpose());

    result.grad_mean[static_cast<std::size_t>(k)] = -d_mean / total_count;
    result.grad_cov_chol[static_cast<std::size_t>(k)] = (-d_c / total_count).triangularView<Eigen::Lower>();
    result.grad_log_sigma2(k) = -d_log_sigma2 / total_count;
  }
  result.grad_features /= -total_count;
  result.loss = -elbo / total_count;
  if (!std::isfinite(result.loss)) {
    std::ostringstream os;
    os << "elbo_loss: non-finite loss " << result.loss;
    throw NonFiniteLoss(os.str());
  }
  return result;
}

}  // namespace vbllbo
