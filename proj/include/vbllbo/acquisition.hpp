#pragma once

#include <stdexcept>
#include <vector>

#include "vbllbo/backbone.hpp"
#include "vbllbo/lbfgsb.hpp"
#include "vbllbo/nsga2.hpp"
#include "vbllbo/pareto.hpp"
#include "vbllbo/surrogate.hpp"
#include "vbllbo/types.hpp"

namespace vbllbo {

class DegenerateVariance : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// log h(u) with h(u) = u Phi(u) + phi(u), accurate for very negative u.
double log_h(double u);

/// Log expected improvement over `best` (maximization) for N(mean, variance).
/// Throws DegenerateVariance when variance <= 1e-18.
double log_ei(double mean, double variance, double best);

struct LogEiValue {
  double value = 0.0;
  double d_mean = 0.0;
  double d_variance = 0.0;
};
LogEiValue log_ei_with_gradient(double mean, double variance, double best);

struct AcquisitionOptions {
  int restarts = 10;
  int raw_samples = 512;
  LbfgsbOptions optimizer{.memory = 10, .max_iterations = 200, .max_line_search = 40,
                          .projected_gradient_tolerance = 1e-7, .relative_function_tolerance = 1e-10,
                          .armijo = 1e-4};
};

/// Maximizes logEI of the (single-output) model over the unit cube. `best` is
/// in the model's standardized units. Returns a unit-cube point.
Vector optimize_acqf_ei(const SurrogateModel& model, double best, Rng& rng,
                        const AcquisitionOptions& options = {});

/// One posterior draw of the last layer frozen onto a backbone snapshot:
/// f(x) = W phi(x), a deterministic differentiable function of unit-cube x.
struct GlmSample {
  BackboneNet backbone;
  Matrix weights;  // K x m

  Eigen::Index outputs() const { return weights.rows(); }
  Vector value(const Vector& x) const;
  /// Rows of x in, rows of K values out.
  Matrix values(const Matrix& x) const;
  /// Value of output k and its input gradient.
  double value_and_gradient(const Vector& x, Eigen::Index k, Vector& grad) const;
};

GlmSample thompson_sample(const SurrogateModel& model, Rng& rng);
/// Deterministic draw from explicit standard-normal vectors, one per output.
GlmSample thompson_sample(const SurrogateModel& model, const std::vector<Vector>& standard_normals);

/// Multistart bounded quasi-Newton ascent of a single-output sample.
Vector optimize_ts_single(const GlmSample& sample, const Vector& lower, const Vector& upper, Rng& rng,
                          const AcquisitionOptions& options = {});

/// Predicted Pareto front of a multi-output sample over [lower, upper].
ParetoSet nsga2_optimize(const GlmSample& sample, const Vector& lower, const Vector& upper,
                         const NsgaConfig& cfg, Rng& rng);

}  // namespace vbllbo
