#include "vbllbo/lbfgsb.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace vbllbo {

Vector project_to_box(const Vector& x, const Vector& lower, const Vector& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

namespace {

struct CorrectionPair {
  Vector s;
  Vector y;
  double rho;
};

// Bound-active variables: at a bound with the gradient pushing outward.
Eigen::Array<bool, Eigen::Dynamic, 1> free_mask(const Vector& x, const Vector& g,
                                                const Vector& lower, const Vector& upper) {
  Eigen::Array<bool, Eigen::Dynamic, 1> mask(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool at_lower = x(i) <= lower(i) && g(i) > 0.0;
    const bool at_upper = x(i) >= upper(i) && g(i) < 0.0;
    mask(i) = !(at_lower || at_upper);
  }
  return mask;
}

Vector two_loop(const std::deque<CorrectionPair>& pairs, Vector q) {
  std::vector<double> alpha(pairs.size());
  for (std::size_t i = pairs.size(); i-- > 0;) {
    alpha[i] = pairs[i].rho * pairs[i].s.dot(q);
    q -= alpha[i] * pairs[i].y;
  }
  if (!pairs.empty()) {
    const auto& last = pairs.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double beta = pairs[i].rho * pairs[i].y.dot(q);
    q += (alpha[i] - beta) * pairs[i].s;
  }
  return q;
}

}  // namespace

LbfgsbResult minimize_box(const DifferentiableObjective& objective, const Vector& x0,
                          const Vector& lower, const Vector& upper, const LbfgsbOptions& options) {
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) {
    throw std::invalid_argument("minimize_box: bound dimension mismatch");
  }
  if ((lower.array() > upper.array()).any()) {
    throw std::invalid_argument("minimize_box: lower bound exceeds upper bound");
  }

  LbfgsbResult result;
  Vector x = project_to_box(x0, lower, upper);
  Vector g(n);
  double f = objective(x, g);
  ++result.evaluations;
  std::deque<CorrectionPair> pairs;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter;
    if (!std::isfinite(f)) break;
    const Vector projected_step = project_to_box(x - g, lower, upper) - x;
    if (projected_step.lpNorm<Eigen::Infinity>() < options.projected_gradient_tolerance) {
      result.converged = true;
      break;
    }

    const auto mask = free_mask(x, g, lower, upper);
    Vector g_free = mask.select(g, 0.0);
    Vector direction = -two_loop(pairs, g_free);
    direction = mask.select(direction, 0.0);
    double slope = direction.dot(g);
    if (!(slope < 0.0)) {
      pairs.clear();
      direction = -g_free;
      slope = direction.dot(g);
      if (!(slope < 0.0)) {
        result.converged = true;
        break;
      }
    }

    double step = 1.0;
    if (pairs.empty()) step = std::min(1.0, 1.0 / std::max(direction.norm(), 1e-300));

    Vector x_new(n);
    Vector g_new(n);
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < options.max_line_search; ++ls) {
      x_new = project_to_box(x + step * direction, lower, upper);
      f_new = objective(x_new, g_new);
      ++result.evaluations;
      const double decrease = g.dot(x_new - x);
      if (std::isfinite(f_new) && f_new <= f + options.armijo * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // A failed search from the steepest-descent restart means no progress.
      if (pairs.empty()) break;
      pairs.clear();
      continue;
    }

    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * y.squaredNorm() && sy > 0.0) {
      pairs.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(pairs.size()) > options.memory) pairs.pop_front();
    }

    const double change = f - f_new;
    x = std::move(x_new);
    g = std::move(g_new);
    const double previous = f;
    f = f_new;
    result.iterations = iter + 1;
    if (change <= options.relative_function_tolerance * std::max({std::abs(previous), std::abs(f), 1.0})) {
      result.converged = true;
      break;
    }
  }
  result.x = std::move(x);
  result.value = f;
  return result;
}

}  // namespace vbllbo
