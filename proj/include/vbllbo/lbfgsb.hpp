#pragma once

#include <functional>

#include "vbllbo/types.hpp"

namespace vbllbo {

/// Objective returning f(x) and writing df/dx into `grad`.
using DifferentiableObjective = std::function<double(const Vector& x, Vector& grad)>;

struct LbfgsbOptions {
  int memory = 10;
  int max_iterations = 200;
  int max_line_search = 40;
  double projected_gradient_tolerance = 1e-8;
  double relative_function_tolerance = 1e-12;
  double armijo = 1e-4;
};

struct LbfgsbResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimizes `objective` over the box [lower, upper] with a projected
/// limited-memory BFGS method: variables held at an active bound are frozen,
/// the two-loop recursion acts on the free subspace, and a backtracking
/// Armijo search runs along the projected path. Infinite bounds are allowed.
LbfgsbResult minimize_box(const DifferentiableObjective& objective, const Vector& x0,
                          const Vector& lower, const Vector& upper,
                          const LbfgsbOptions& options = {});

Vector project_to_box(const Vector& x, const Vector& lower, const Vector& upper);

}  // namespace vbllbo
