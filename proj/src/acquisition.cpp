#include "vbllbo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "vbllbo/sobol.hpp"

namespace vbllbo {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kSqrtHalfPi = 1.25331413731550025121;  // sqrt(pi / 2)

// exp(x^2) erfc(x) for x >= 0.
double erfcx(double x) {
  if (x < 26.0) return std::exp(x * x) * std::erfc(x);
  const double inv2 = 1.0 / (x * x);
  const double series = 1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2 +
                        6.5625 * inv2 * inv2 * inv2 * inv2;
  return series / (x * std::sqrt(std::numbers::pi));
}

// Phi(u) / phi(u) for u <= 0.
double mills_ratio(double u) { return kSqrtHalfPi * erfcx(-u / std::numbers::sqrt2); }

double normal_cdf(double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); }
double normal_pdf(double u) { return std::exp(-0.5 * u * u - kHalfLog2Pi); }

}  // namespace

double log_h(double u) {
  if (u > -1.0) return std::log(u * normal_cdf(u) + normal_pdf(u));
  const double log_pdf = -0.5 * u * u - kHalfLog2Pi;
  if (u < -1e3) {
    const double inv2 = 1.0 / (u * u);
    return log_pdf + std::log(inv2 * (1.0 - 3.0 * inv2 + 15.0 * inv2 * inv2));
  }
  return log_pdf + std::log1p(u * mills_ratio(u));
}

LogEiValue log_ei_with_gradient(double mean, double variance, double best) {
  if (!(variance > 1e-18)) throw DegenerateVariance("log_ei: variance too small");
  const double sigma = std::sqrt(variance);
  const double u = (mean - best) / sigma;
  LogEiValue out;
  out.value = std::log(sigma) + log_h(u);
  // d/du log h = Phi(u) / h(u); d/dsigma (at fixed mean) = phi(u) / (sigma h(u)).
  double cdf_over_h;
  double pdf_over_h;
  if (u > -1.0) {
    const double h = u * normal_cdf(u) + normal_pdf(u);
    cdf_over_h = normal_cdf(u) / h;
    pdf_over_h = normal_pdf(u) / h;
  } else {
    const double r = mills_ratio(u);
    const double denom = 1.0 + u * r;
    cdf_over_h = r / denom;
    pdf_over_h = 1.0 / denom;
  }
  out.d_mean = cdf_over_h / sigma;
  out.d_variance = pdf_over_h / sigma / (2.0 * sigma);
  return out;
}

double log_ei(double mean, double variance, double best) {
  return log_ei_with_gradient(mean, variance, best).value;
}

namespace {

std::vector<Eigen::Index> top_rows(const Vector& values, int count) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(values.size()));
  std::iota(idx.begin(), idx.end(), 0);
  const auto k = std::min<std::size_t>(idx.size(), static_cast<std::size_t>(std::max(count, 1)));
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      if (values(a) != values(b)) return values(a) > values(b);
                      return a < b;
                    });
  idx.resize(k);
  return idx;
}

// Multistart maximization of `objective` (value and gradient) from the best
// `restarts` rows of `candidates` according to `raw_values`.
Vector multistart_maximize(const std::function<double(const Vector&, Vector&)>& objective,
                           const Matrix& candidates, const Vector& raw_values, const Vector& lower,
                           const Vector& upper, const AcquisitionOptions& options) {
  const auto starts = top_rows(raw_values, options.restarts);
  Vector best_x = candidates.row(starts.front()).transpose();
  double best_value = raw_values(starts.front());
  DifferentiableObjective negated = [&](const Vector& x, Vector& grad) {
    const double v = objective(x, grad);
    grad = -grad;
    return -v;
  };
  for (Eigen::Index row : starts) {
    const Vector x0 = candidates.row(row).transpose();
    LbfgsbResult res;
    try {
      res = minimize_box(negated, x0, lower, upper, options.optimizer);
    } catch (const std::exception&) {
      continue;
    }
    if (std::isfinite(res.value) && -res.value > best_value) {
      best_value = -res.value;
      best_x = res.x;
    }
  }
  return project_to_box(best_x, lower, upper);
}

}  // namespace

Vector optimize_acqf_ei(const SurrogateModel& model, double best, Rng& rng,
                        const AcquisitionOptions& options) {
  if (model.outputs() != 1) throw std::invalid_argument("optimize_acqf_ei: single-output model required");
  const Eigen::Index dim = model.input_dim();
  const Vector lower = Vector::Zero(dim);
  const Vector upper = Vector::Ones(dim);
  const auto& post = model.head.posteriors.front();
  const auto l = post.precision_chol.matrix().triangularView<Eigen::Lower>();
  const double noise = model.head.noise.sigma2(0);

  SobolStream sobol(static_cast<int>(dim), rng());
  const Matrix candidates = sobol.next(options.raw_samples);
  const Matrix features = forward_batch(model.backbone, candidates);
  const Vector means = features * post.mean;
  const Vector epistemic = l.solve(features.transpose()).colwise().squaredNorm().transpose();
  Vector raw(candidates.rows());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    try {
      raw(i) = log_ei(means(i), epistemic(i) + noise, best);
    } catch (const DegenerateVariance&) {
      raw(i) = -std::numeric_limits<double>::infinity();
    }
  }

  auto objective = [&](const Vector& x, Vector& grad) {
    ForwardTape tape;
    const Vector phi = forward(model.backbone, x, &tape);
    const Vector u = l.solve(phi);
    const double variance = u.squaredNorm() + noise;
    const LogEiValue v = log_ei_with_gradient(post.mean.dot(phi), variance, best);
    const Vector s_phi = l.transpose().solve(u);
    const Vector grad_features = v.d_mean * post.mean + (2.0 * v.d_variance) * s_phi;
    grad = backward_input(model.backbone, tape, grad_features);
    return v.value;
  };
  return multistart_maximize(objective, candidates, raw, lower, upper, options);
}

Vector GlmSample::value(const Vector& x) const { return weights * forward(backbone, x); }

Matrix GlmSample::values(const Matrix& x) const {
  return forward_batch(backbone, x) * weights.transpose();
}

double GlmSample::value_and_gradient(const Vector& x, Eigen::Index k, Vector& grad) const {
  ForwardTape tape;
  const Vector phi = forward(backbone, x, &tape);
  const Vector w = weights.row(k).transpose();
  grad = backward_input(backbone, tape, w);
  return w.dot(phi);
}

GlmSample thompson_sample(const SurrogateModel& model, Rng& rng) {
  std::vector<Vector> z;
  for (Eigen::Index k = 0; k < model.outputs(); ++k) {
    z.push_back(standard_normal_vector(model.feature_dim(), rng));
  }
  return thompson_sample(model, z);
}

GlmSample thompson_sample(const SurrogateModel& model, const std::vector<Vector>& standard_normals) {
  if (static_cast<Eigen::Index>(standard_normals.size()) != model.outputs()) {
    throw std::invalid_argument("thompson_sample: one normal vector per output required");
  }
  GlmSample sample;
  sample.backbone = model.backbone;
  sample.weights.resize(model.outputs(), model.feature_dim());
  for (Eigen::Index k = 0; k < model.outputs(); ++k) {
    const auto& post = model.head.posteriors[static_cast<std::size_t>(k)];
    sample.weights.row(k) =
        sample_gaussian(post.mean, post.precision_chol, standard_normals[static_cast<std::size_t>(k)]).transpose();
  }
  return sample;
}

Vector optimize_ts_single(const GlmSample& sample, const Vector& lower, const Vector& upper, Rng& rng,
                          const AcquisitionOptions& options) {
  if (sample.outputs() != 1) throw std::invalid_argument("optimize_ts_single: single-output sample required");
  SobolStream sobol(static_cast<int>(lower.size()), rng());
  Matrix candidates = sobol.next(options.raw_samples);
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    candidates.row(i) = (lower.array() + candidates.row(i).transpose().array() * (upper - lower).array()).transpose();
  }
  const Vector raw = sample.values(candidates).col(0);
  auto objective = [&](const Vector& x, Vector& grad) { return sample.value_and_gradient(x, 0, grad); };
  return multistart_maximize(objective, candidates, raw, lower, upper, options);
}

ParetoSet nsga2_optimize(const GlmSample& sample, const Vector& lower, const Vector& upper,
                         const NsgaConfig& cfg, Rng& rng) {
  if (sample.outputs() < 2) throw std::invalid_argument("nsga2_optimize: need at least two objectives");
  BatchObjective objective = [&](const Matrix& x) { return sample.values(x); };
  return nsga2_optimize(objective, lower, upper, cfg, rng);
}

}  // namespace vbllbo
