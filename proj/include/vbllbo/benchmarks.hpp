#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vbllbo/surrogate.hpp"
#include "vbllbo/types.hpp"

namespace vbllbo {

class UnknownProblem : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class OutOfBounds : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Test objective in the maximization convention. Problems whose textbook
/// form is minimized are negated; `canonical` undoes that for reporting.
struct Problem {
  std::string name;
  int dim = 0;
  int objectives = 1;
  Bounds bounds;
  bool negated = false;
  std::function<Vector(const Vector&)> objective;
  std::optional<double> optimum;            // best attainable value, maximization units
  std::optional<Vector> reference_point;    // multi-objective only, maximization units
  double noise_std = 0.0;

  Vector evaluate(const Vector& x) const;
  /// Objective value in the problem's textbook orientation.
  Vector canonical(const Vector& y) const { return negated ? Vector(-y) : y; }
};

struct ProblemOptions {
  std::optional<int> dim;
  double noise_std = 0.0;
  std::uint64_t seed = 0;                  // NN-draw network seed
  std::optional<Vector> reference_point;   // overrides the default
};

Problem make_problem(const std::string& name, const ProblemOptions& options = {});
std::vector<std::string> problem_names();

/// evaluate(x) plus i.i.d. N(0, noise_std^2) per output.
Vector evaluate_noisy(const Problem& problem, const Vector& x, Rng& rng);

/// D Sobol points (2(D+1) for multi-objective problems), mapped to the raw
/// bounds and evaluated with noise.
Dataset initial_design(const Problem& problem, Rng& rng);
std::size_t initial_design_size(const Problem& problem);

// Closed forms in their textbook orientation (minimization for all of these).
double branin(double x1, double x2);
double currin(double x1, double x2);
double ackley(const Vector& x);
double hartmann6(const Vector& x);
Vector dtlz1(const Vector& x, int objectives);
Vector dtlz2(const Vector& x, int objectives);

}  // namespace vbllbo
