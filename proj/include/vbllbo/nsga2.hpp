#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "vbllbo/types.hpp"

namespace vbllbo {

struct NsgaConfig {
  int population = 100;
  int generations = 200;
  double crossover_probability = 0.9;
  double crossover_eta = 15.0;
  std::optional<double> mutation_probability;  // defaults to 1 / D
  double mutation_eta = 20.0;
};

/// Maps a batch of inputs (rows) to objective rows; all objectives maximized.
using BatchObjective = std::function<Matrix(const Matrix& x)>;

struct ParetoSet {
  std::vector<Vector> x;
  std::vector<Vector> y;
};

/// NSGA-II over the box [lower, upper]. Returns the first non-dominated front
/// of the final population (duplicate inputs removed).
ParetoSet nsga2_optimize(const BatchObjective& objective, const Vector& lower, const Vector& upper,
                         const NsgaConfig& cfg, Rng& rng);

/// Simulated binary crossover of two parents within [lower, upper].
std::pair<Vector, Vector> sbx_crossover(const Vector& a, const Vector& b, const Vector& lower,
                                        const Vector& upper, double eta, double probability, Rng& rng);

/// Polynomial mutation within [lower, upper]; each variable mutates with
/// probability `probability`.
Vector polynomial_mutation(const Vector& x, const Vector& lower, const Vector& upper, double eta,
                           double probability, Rng& rng);

}  // namespace vbllbo
