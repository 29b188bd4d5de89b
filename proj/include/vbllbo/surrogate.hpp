#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vbllbo/backbone.hpp"
#include "vbllbo/types.hpp"
#include "vbllbo/vbll_head.hpp"

namespace vbllbo {

/// Axis-aligned box in raw input units.
struct Bounds {
  Vector lower;
  Vector upper;

  Eigen::Index dim() const { return lower.size(); }
  bool contains(const Vector& x) const;
  Vector to_unit(const Vector& x) const;
  Vector from_unit(const Vector& u) const;
};

/// Observations in raw units, in arrival order.
struct Dataset {
  Bounds bounds;
  std::vector<Vector> x;
  std::vector<Vector> y;

  std::size_t size() const { return x.size(); }
  bool empty() const { return x.empty(); }
  /// Throws std::out_of_range if x lies outside the bounds.
  void add(const Vector& xi, const Vector& yi);
  Matrix unit_inputs() const;
  Matrix targets() const;
};

/// Per-output affine map to zero mean and unit variance.
struct Standardizer {
  Vector mean;
  Vector scale;

  /// Sample std with a 1e-8 floor; a single observation gets scale 1.
  static Standardizer fit(const Matrix& targets);
  Vector apply(const Vector& y) const;
  Vector invert(const Vector& z) const;
  Matrix apply(const Matrix& y) const;
};

struct TrainConfig {
  std::vector<int> hidden = {128, 128, 128};
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double clip_norm = 1.0;
  int batch_size = 32;        // effective batch is min(T, batch_size)
  int max_epochs = 10000;
  int patience = 100;
  double prior_scale = 1.0;   // head prior covariance is (prior_scale / m) I
  double wishart_scale = 0.01;
  double noise_dof = 1.0;
  double initial_log_sigma2 = -2.0;
  std::uint64_t seed = 0;
};

struct TrainStats {
  int epochs = 0;
  int best_epoch = -1;
  double best_loss = 0.0;
  bool aborted = false;  // a non-finite loss ended training early
};

struct SurrogateModel {
  BackboneNet backbone;
  VbllHead head;
  Standardizer standardizer;
  Bounds bounds;
  double fit_seconds = 0.0;
  TrainStats last_train;

  Eigen::Index input_dim() const { return backbone.input_dim(); }
  Eigen::Index feature_dim() const { return backbone.feature_dim(); }
  Eigen::Index outputs() const { return head.outputs(); }

  /// Predictive distribution at a unit-cube input, in standardized units.
  Predictive predict_unit(const Vector& unit_x) const;
};

/// Tracks the best average epoch loss; signals a stop after `patience`
/// consecutive epochs without strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);
  /// Returns true when training should stop.
  bool update(double epoch_loss);
  bool improved() const { return improved_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int epoch_ = -1;
  int best_epoch_ = -1;
  int since_best_ = 0;
  double best_loss_;
  bool improved_ = false;
};

/// Fresh backbone and head initialized from model_seed, then trained.
SurrogateModel train_full(std::uint64_t model_seed, const Dataset& data, const TrainConfig& cfg);

/// Trains from the given model's current parameters with a fresh optimizer.
SurrogateModel warm_start_train(const SurrogateModel& model, const Dataset& data,
                                const TrainConfig& cfg);

/// Recursive last-layer conditioning on one raw observation. The backbone and
/// standardizer are left untouched.
SurrogateModel condition_on(const SurrogateModel& model, const Vector& x_raw, const Vector& y_raw);

struct ReinitPolicy {
  enum class Kind { kAlways, kPeriodic, kSigmoid, kEvent };
  Kind kind = Kind::kAlways;
  int period = 1;                 // periodic
  std::optional<double> center;   // sigmoid; defaults to horizon / 2
  double window_ratio = 0.5;      // sigmoid
  double threshold = 0.0;         // event

  static ReinitPolicy always() { return {}; }
  static ReinitPolicy periodic(int m);
  static ReinitPolicy sigmoid(std::optional<double> center, double window_ratio);
  static ReinitPolicy event(double threshold);
};

/// s = 2 ln 9 / (horizon * window_ratio).
double sigmoid_stretch(double horizon, double window_ratio);
/// p(t) = 1 / (1 + exp(-s (c - t))).
double sigmoid_probability(double t, double center, double stretch);

struct Observation {
  Vector x;
  Vector y;
};

/// True when the model should be re-initialized and fully retrained at step t.
/// Always true when `model` is null.
bool decide_reinit(const ReinitPolicy& policy, const SurrogateModel* model, int t, int horizon,
                   const Observation& last, Rng& rng);

struct BoStepResult {
  SurrogateModel model;
  bool reinit = false;
};

/// One surrogate update of the continual-learning loop: either a fresh full
/// retrain on all data (new model seed drawn from rng) or recursive
/// conditioning on the newest observation. Fit time accumulates across steps.
BoStepResult bo_step(const SurrogateModel* model, const ReinitPolicy& policy, const Dataset& data,
                     const TrainConfig& cfg, int t, int horizon, Rng& rng);

struct HeadFitOptions {
  int max_iterations = 5000;
  double gradient_tolerance = 1e-10;
};

/// Maximizes the variational bound over the head's variational parameters
/// with features and noise frozen (full batch, quasi-Newton). Starts from
/// `head`.
VbllHead optimize_head_variational(const VbllHead& head, const Matrix& features,
                                   const Matrix& targets, const HeadFitOptions& options = {});

}  // namespace vbllbo
