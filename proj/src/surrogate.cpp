#include "vbllbo/surrogate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vbllbo/lbfgsb.hpp"

namespace vbllbo {

bool Bounds::contains(const Vector& x) const {
  return x.size() == dim() && (x.array() >= lower.array()).all() &&
         (x.array() <= upper.array()).all();
}

Vector Bounds::to_unit(const Vector& x) const {
  return ((x - lower).array() / (upper - lower).array()).matrix();
}

Vector Bounds::from_unit(const Vector& u) const {
  return lower + (u.array() * (upper - lower).array()).matrix();
}

void Dataset::add(const Vector& xi, const Vector& yi) {
  if (!bounds.contains(xi)) throw std::out_of_range("Dataset::add: input outside bounds");
  if (!y.empty() && yi.size() != y.front().size()) {
    throw std::invalid_argument("Dataset::add: inconsistent output dimension");
  }
  x.push_back(xi);
  y.push_back(yi);
}

Matrix Dataset::unit_inputs() const {
  Matrix out(static_cast<Eigen::Index>(x.size()), bounds.dim());
  for (std::size_t i = 0; i < x.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = bounds.to_unit(x[i]).transpose();
  return out;
}

Matrix Dataset::targets() const {
  if (y.empty()) return Matrix();
  Matrix out(static_cast<Eigen::Index>(y.size()), y.front().size());
  for (std::size_t i = 0; i < y.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = y[i].transpose();
  return out;
}

Standardizer Standardizer::fit(const Matrix& targets) {
  if (targets.rows() < 1) throw std::invalid_argument("Standardizer::fit: no data");
  Standardizer s;
  s.mean = targets.colwise().mean().transpose();
  s.scale = Vector::Ones(targets.cols());
  if (targets.rows() > 1) {
    const Matrix centered = targets.rowwise() - s.mean.transpose();
    const double denom = static_cast<double>(targets.rows() - 1);
    for (Eigen::Index k = 0; k < targets.cols(); ++k) {
      s.scale(k) = std::max(std::sqrt(centered.col(k).squaredNorm() / denom), 1e-8);
    }
  }
  return s;
}

Vector Standardizer::apply(const Vector& y) const {
  return ((y - mean).array() / scale.array()).matrix();
}

Vector Standardizer::invert(const Vector& z) const {
  return mean + (z.array() * scale.array()).matrix();
}

Matrix Standardizer::apply(const Matrix& y) const {
  Matrix out = y.rowwise() - mean.transpose();
  return out.array().rowwise() / scale.transpose().array();
}

Predictive SurrogateModel::predict_unit(const Vector& unit_x) const {
  return predictive(head, forward(backbone, unit_x));
}

EarlyStopping::EarlyStopping(int patience)
    : patience_(patience), best_loss_(std::numeric_limits<double>::infinity()) {
  if (patience < 1) throw std::invalid_argument("EarlyStopping: patience must be >= 1");
}

bool EarlyStopping::update(double epoch_loss) {
  ++epoch_;
  improved_ = epoch_loss < best_loss_;
  if (improved_) {
    best_loss_ = epoch_loss;
    best_epoch_ = epoch_;
    since_best_ = 0;
    return false;
  }
  ++since_best_;
  return since_best_ >= patience_;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Unconstrained form of the head used by gradient training: the covariance
// factor's diagonal is stored as log values.
struct HeadParameters {
  std::vector<Vector> mean;
  std::vector<Matrix> chol;
  Vector log_sigma2;
};

HeadParameters to_parameters(const VbllHead& head) {
  CovarianceHead cov = to_covariance_form(head);
  HeadParameters p;
  p.mean = std::move(cov.mean);
  p.chol = std::move(cov.cov_chol);
  for (auto& c : p.chol) c.diagonal() = c.diagonal().array().log().matrix();
  p.log_sigma2 = head.noise.log_sigma2;
  return p;
}

CovarianceHead covariance_head(const HeadParameters& p, const VbllHead& like) {
  CovarianceHead head;
  head.prior = like.prior;
  head.noise = like.noise;
  head.noise.log_sigma2 = p.log_sigma2;
  head.mean = p.mean;
  head.cov_chol = p.chol;
  for (auto& c : head.cov_chol) c.diagonal() = c.diagonal().array().exp().matrix();
  return head;
}

VbllHead from_parameters(const HeadParameters& p, const VbllHead& like) {
  return from_covariance_form(covariance_head(p, like));
}

// Gradients w.r.t. HeadParameters, converted from the C-space gradients.
HeadParameters parameter_gradients(const CovarianceElboResult& r, const HeadParameters& p) {
  HeadParameters g;
  g.mean = r.grad_mean;
  for (std::size_t k = 0; k < p.chol.size(); ++k) {
    Matrix gc = r.grad_cov_chol[k];
    gc.diagonal() = (gc.diagonal().array() * p.chol[k].diagonal().array().exp()).matrix();
    g.chol.push_back(std::move(gc));
  }
  g.log_sigma2 = r.grad_log_sigma2;
  return g;
}

template <typename Span, typename Params>
void append_head_views(std::vector<Span>& views, Params& p) {
  for (auto& m : p.mean) views.emplace_back(m.data(), static_cast<std::size_t>(m.size()));
  for (auto& c : p.chol) views.emplace_back(c.data(), static_cast<std::size_t>(c.size()));
  views.emplace_back(p.log_sigma2.data(), static_cast<std::size_t>(p.log_sigma2.size()));
}

double squared_norm(const HeadParameters& g) {
  double s = g.log_sigma2.squaredNorm();
  for (const auto& m : g.mean) s += m.squaredNorm();
  for (const auto& c : g.chol) s += c.squaredNorm();
  return s;
}

void scale(HeadParameters& g, double factor) {
  for (auto& m : g.mean) m *= factor;
  for (auto& c : g.chol) c *= factor;
  g.log_sigma2 *= factor;
}

VbllHead initial_head(Eigen::Index m, Eigen::Index outputs, const TrainConfig& cfg, Rng& rng) {
  NoiseModel noise;
  noise.log_sigma2 = Vector::Constant(outputs, cfg.initial_log_sigma2);
  noise.wishart_scale = cfg.wishart_scale;
  noise.dof = cfg.noise_dof;
  // Per-weight prior variance prior_scale / m, as in the reference VBLL layer.
  VbllHead head = make_prior_head(m, outputs, LastLayerPrior{cfg.prior_scale / static_cast<double>(m)}, noise);
  const double mean_scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (auto& post : head.posteriors) {
    Vector mean = standard_normal_vector(m, rng) * mean_scale;
    post = VariationalPosterior::from_mean(std::move(mean), post.precision_chol);
  }
  return head;
}

void validate(const Dataset& data, const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.patience < 1 || cfg.max_epochs < 1 || cfg.batch_size < 1) {
    throw std::invalid_argument("train: patience, max_epochs and batch_size must be >= 1");
  }
}

// Minibatch AdamW on the negative ELBO with training-loss early stopping.
// Restores the parameters of the best epoch.
void train_in_place(SurrogateModel& model, const Dataset& data, const TrainConfig& cfg, Rng& rng) {
  const auto start = Clock::now();
  model.standardizer = Standardizer::fit(data.targets());
  model.bounds = data.bounds;
  const Matrix inputs = data.unit_inputs();
  const Matrix targets = model.standardizer.apply(data.targets());
  const Eigen::Index total = inputs.rows();
  const Eigen::Index batch = std::min<Eigen::Index>(total, cfg.batch_size);

  HeadParameters head_params = to_parameters(model.head);
  const VbllHead head_template = model.head;

  std::vector<std::size_t> sizes = parameter_sizes(model.backbone);
  std::vector<bool> decay(sizes.size(), true);
  {
    std::vector<std::span<double>> head_views;
    append_head_views(head_views, head_params);
    for (const auto& v : head_views) {
      sizes.push_back(v.size());
      decay.push_back(false);
    }
  }
  AdamWConfig adam_cfg;
  adam_cfg.learning_rate = cfg.learning_rate;
  adam_cfg.weight_decay = cfg.weight_decay;
  AdamW optimizer(adam_cfg, sizes, decay);

  EarlyStopping stopping(cfg.patience);
  BackboneNet best_backbone = model.backbone;
  HeadParameters best_head = head_params;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  ForwardTape tape;
  Matrix batch_x(batch, inputs.cols());
  Matrix batch_y(batch, targets.cols());

  TrainStats stats;
  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    bool diverged = false;
    for (Eigen::Index begin = 0; begin < total; begin += batch) {
      const Eigen::Index n = std::min(batch, total - begin);
      batch_x.resize(n, inputs.cols());
      batch_y.resize(n, targets.cols());
      for (Eigen::Index i = 0; i < n; ++i) {
        batch_x.row(i) = inputs.row(order[static_cast<std::size_t>(begin + i)]);
        batch_y.row(i) = targets.row(order[static_cast<std::size_t>(begin + i)]);
      }
      const Matrix features = forward_batch(model.backbone, batch_x, &tape);
      CovarianceElboResult elbo;
      try {
        elbo = elbo_loss(covariance_head(head_params, head_template), features, batch_y,
                         static_cast<double>(total));
      } catch (const NonFiniteLoss&) {
        diverged = true;
        break;
      }
      GradientSet backbone_grad = backward(model.backbone, tape, elbo.grad_features);
      HeadParameters head_grad = parameter_gradients(elbo, head_params);

      const double norm = std::sqrt(backbone_grad.squared_norm() + squared_norm(head_grad));
      if (!std::isfinite(norm)) {
        diverged = true;
        break;
      }
      // Global norm clipping across backbone and head.
      if (norm > cfg.clip_norm) {
        const double factor = cfg.clip_norm / norm;
        for (auto& w : backbone_grad.weights) w *= factor;
        for (auto& b : backbone_grad.biases) b *= factor;
        scale(head_grad, factor);
      }

      auto params = parameter_views(model.backbone);
      append_head_views(params, head_params);
      auto grads = gradient_views(backbone_grad);
      append_head_views(grads, head_grad);
      optimizer.step(params, grads);
      epoch_loss += elbo.loss * static_cast<double>(n);
    }
    if (diverged) {
      stats.aborted = true;
      break;
    }
    stats.epochs = epoch + 1;
    const bool stop = stopping.update(epoch_loss / static_cast<double>(total));
    if (stopping.improved()) {
      best_backbone = model.backbone;
      best_head = head_params;
    }
    if (stop) break;
  }
  stats.best_epoch = stopping.best_epoch();
  stats.best_loss = stopping.best_loss();

  model.backbone = std::move(best_backbone);
  model.head = from_parameters(best_head, head_template);
  model.last_train = stats;
  model.fit_seconds += seconds_since(start);
}

}  // namespace

SurrogateModel train_full(std::uint64_t model_seed, const Dataset& data, const TrainConfig& cfg) {
  validate(data, cfg);
  Rng rng(model_seed);
  std::vector<int> dims;
  dims.push_back(static_cast<int>(data.bounds.dim()));
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  if (dims.size() < 2) throw std::invalid_argument("train_full: need at least one hidden layer");

  const auto start = Clock::now();
  SurrogateModel model;
  model.backbone = init_backbone(dims, rng());
  model.head = initial_head(dims.back(), static_cast<Eigen::Index>(data.y.front().size()), cfg, rng);
  model.fit_seconds = seconds_since(start);
  train_in_place(model, data, cfg, rng);
  return model;
}

SurrogateModel warm_start_train(const SurrogateModel& model, const Dataset& data,
                                const TrainConfig& cfg) {
  validate(data, cfg);
  if (model.backbone.weights.empty()) throw std::invalid_argument("warm_start_train: untrained model");
  SurrogateModel out = model;
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  train_in_place(out, data, cfg, rng);
  return out;
}

SurrogateModel condition_on(const SurrogateModel& model, const Vector& x_raw, const Vector& y_raw) {
  if (model.standardizer.mean.size() == 0) {
    throw std::logic_error("condition_on: model has never been trained");
  }
  const auto start = Clock::now();
  SurrogateModel out = model;
  const Vector features = forward(model.backbone, model.bounds.to_unit(x_raw));
  out.head = recursive_update(model.head, features, model.standardizer.apply(y_raw));
  out.fit_seconds += seconds_since(start);
  return out;
}

ReinitPolicy ReinitPolicy::periodic(int m) {
  if (m < 1) throw std::invalid_argument("ReinitPolicy: period must be >= 1");
  ReinitPolicy p;
  p.kind = Kind::kPeriodic;
  p.period = m;
  return p;
}

ReinitPolicy ReinitPolicy::sigmoid(std::optional<double> center, double window_ratio) {
  if (!(window_ratio > 0.0 && window_ratio <= 1.0)) {
    throw std::invalid_argument("ReinitPolicy: window ratio must be in (0, 1]");
  }
  ReinitPolicy p;
  p.kind = Kind::kSigmoid;
  p.center = center;
  p.window_ratio = window_ratio;
  return p;
}

ReinitPolicy ReinitPolicy::event(double threshold) {
  ReinitPolicy p;
  p.kind = Kind::kEvent;
  p.threshold = threshold;
  return p;
}

double sigmoid_stretch(double horizon, double window_ratio) {
  return 2.0 * std::log(9.0) / (horizon * window_ratio);
}

double sigmoid_probability(double t, double center, double stretch) {
  return 1.0 / (1.0 + std::exp(-stretch * (center - t)));
}

bool decide_reinit(const ReinitPolicy& policy, const SurrogateModel* model, int t, int horizon,
                   const Observation& last, Rng& rng) {
  if (t < 0) throw std::invalid_argument("decide_reinit: negative iteration");
  if (model == nullptr) return true;
  switch (policy.kind) {
    case ReinitPolicy::Kind::kAlways:
      return true;
    case ReinitPolicy::Kind::kPeriodic:
      return t % policy.period == 0;
    case ReinitPolicy::Kind::kSigmoid: {
      const double center = policy.center.value_or(0.5 * horizon);
      const double p = sigmoid_probability(t, center, sigmoid_stretch(horizon, policy.window_ratio));
      return std::bernoulli_distribution(p)(rng);
    }
    case ReinitPolicy::Kind::kEvent: {
      const Vector features = forward(model->backbone, model->bounds.to_unit(last.x));
      const double lpd =
          log_predictive_density(model->head, features, model->standardizer.apply(last.y));
      return lpd < policy.threshold;
    }
  }
  return true;
}

BoStepResult bo_step(const SurrogateModel* model, const ReinitPolicy& policy, const Dataset& data,
                     const TrainConfig& cfg, int t, int horizon, Rng& rng) {
  if (data.empty()) throw std::invalid_argument("bo_step: empty dataset");
  const Observation last{data.x.back(), data.y.back()};
  BoStepResult result;
  result.reinit = decide_reinit(policy, model, t, horizon, last, rng);
  if (result.reinit) {
    const std::uint64_t seed = rng();
    result.model = train_full(seed, data, cfg);
    if (model) result.model.fit_seconds += model->fit_seconds;
  } else {
    result.model = condition_on(*model, last.x, last.y);
  }
  return result;
}

VbllHead optimize_head_variational(const VbllHead& head, const Matrix& features,
                                   const Matrix& targets, const HeadFitOptions& options) {
  const Eigen::Index m = head.feature_dim();
  const Eigen::Index outputs = head.outputs();
  const Eigen::Index tri = m * (m + 1) / 2;
  const Eigen::Index per_output = m + tri;

  auto unpack = [&](const Vector& flat) {
    HeadParameters p;
    p.log_sigma2 = head.noise.log_sigma2;
    for (Eigen::Index k = 0; k < outputs; ++k) {
      const Eigen::Index base = k * per_output;
      p.mean.push_back(flat.segment(base, m));
      Matrix c = Matrix::Zero(m, m);
      Eigen::Index idx = base + m;
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = j; i < m; ++i) c(i, j) = flat(idx++);
      p.chol.push_back(std::move(c));
    }
    return p;
  };
  auto pack = [&](const HeadParameters& p) {
    Vector flat(outputs * per_output);
    for (Eigen::Index k = 0; k < outputs; ++k) {
      const Eigen::Index base = k * per_output;
      flat.segment(base, m) = p.mean[static_cast<std::size_t>(k)];
      Eigen::Index idx = base + m;
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = j; i < m; ++i) flat(idx++) = p.chol[static_cast<std::size_t>(k)](i, j);
    }
    return flat;
  };

  const double total = static_cast<double>(features.rows());
  DifferentiableObjective objective = [&](const Vector& flat, Vector& grad) {
    const HeadParameters p = unpack(flat);
    try {
      const CovarianceElboResult r = elbo_loss(covariance_head(p, head), features, targets, total);
      grad = pack(parameter_gradients(r, p));
      return r.loss;
    } catch (const std::exception&) {
      grad = Vector::Zero(flat.size());
      return std::numeric_limits<double>::infinity();
    }
  };

  const Vector start = pack(to_parameters(head));
  const Vector inf = Vector::Constant(start.size(), std::numeric_limits<double>::infinity());
  LbfgsbOptions lbfgs;
  lbfgs.max_iterations = options.max_iterations;
  lbfgs.projected_gradient_tolerance = options.gradient_tolerance;
  lbfgs.relative_function_tolerance = 0.0;
  lbfgs.memory = 20;
  const LbfgsbResult res = minimize_box(objective, start, -inf, inf, lbfgs);
  return from_parameters(unpack(res.x), head);
}

}  // namespace vbllbo
