#include "vbllbo/benchmarks.hpp"

#include <cmath>
#include <numbers>

#include "vbllbo/sobol.hpp"

namespace vbllbo {

using std::numbers::pi;

double branin(double x1, double x2) {
  const double b = 5.1 / (4.0 * pi * pi);
  const double c = 5.0 / pi;
  const double t = 1.0 / (8.0 * pi);
  const double inner = x2 - b * x1 * x1 + c * x1 - 6.0;
  return inner * inner + 10.0 * (1.0 - t) * std::cos(x1) + 10.0;
}

double currin(double x1, double x2) {
  const double factor = x2 > 0.0 ? 1.0 - std::exp(-1.0 / (2.0 * x2)) : 1.0;
  const double num = 2300.0 * x1 * x1 * x1 + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
  const double den = 100.0 * x1 * x1 * x1 + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
  return factor * num / den;
}

double ackley(const Vector& x) {
  const double d = static_cast<double>(x.size());
  const double sq = x.squaredNorm() / d;
  const double cs = (2.0 * pi * x.array()).cos().sum() / d;
  return -20.0 * std::exp(-0.2 * std::sqrt(sq)) - std::exp(cs) + 20.0 + std::numbers::e;
}

double hartmann6(const Vector& x) {
  static const double alpha[4] = {1.0, 1.2, 3.0, 3.2};
  static const double a[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                 {0.05, 10, 17, 0.1, 8, 14},
                                 {3, 3.5, 1.7, 10, 17, 8},
                                 {17, 8, 0.05, 10, 0.1, 14}};
  static const double p[4][6] = {{1312, 1696, 5569, 124, 8283, 5886},
                                 {2329, 4135, 8307, 3736, 1004, 9991},
                                 {2348, 1451, 3522, 2883, 3047, 6650},
                                 {4047, 8828, 8732, 5743, 1091, 381}};
  double total = 0.0;
  for (int i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (int j = 0; j < 6; ++j) {
      const double diff = x(j) - 1e-4 * p[i][j];
      inner += a[i][j] * diff * diff;
    }
    total += alpha[i] * std::exp(-inner);
  }
  return -total;
}

Vector dtlz1(const Vector& x, int objectives) {
  const Eigen::Index n = x.size();
  const Eigen::Index k = n - objectives + 1;
  const auto tail = x.tail(k).array() - 0.5;
  const double g = 100.0 * (static_cast<double>(k) + (tail.square() - (20.0 * pi * tail).cos()).sum());
  Vector f(objectives);
  for (int i = 0; i < objectives; ++i) {
    double v = 0.5 * (1.0 + g);
    for (int j = 0; j < objectives - 1 - i; ++j) v *= x(j);
    if (i > 0) v *= 1.0 - x(objectives - 1 - i);
    f(i) = v;
  }
  return f;
}

Vector dtlz2(const Vector& x, int objectives) {
  const Eigen::Index n = x.size();
  const Eigen::Index k = n - objectives + 1;
  const double g = (x.tail(k).array() - 0.5).square().sum();
  Vector f(objectives);
  for (int i = 0; i < objectives; ++i) {
    double v = 1.0 + g;
    for (int j = 0; j < objectives - 1 - i; ++j) v *= std::cos(0.5 * pi * x(j));
    if (i > 0) v *= std::sin(0.5 * pi * x(objectives - 1 - i));
    f(i) = v;
  }
  return f;
}

Vector Problem::evaluate(const Vector& x) const {
  if (!bounds.contains(x)) throw OutOfBounds("Problem::evaluate: input outside bounds for " + name);
  return objective(x);
}

namespace {

Bounds box(int dim, double lo, double hi) {
  return Bounds{Vector::Constant(dim, lo), Vector::Constant(dim, hi)};
}

Vector scalar(double v) { return Vector::Constant(1, v); }

// Reference points (maximization units) derived by tools/derive_reference_points
// with NSGA-II on the true objectives: nadir of the found front minus 10% of
// its range. Recorded in configs/reference_points.json.
Vector default_reference(const std::string& name) {
  if (name == "branincurrin") return Vector{{-19.22, -6.14}};
  if (name == "dtlz1") return Vector{{-0.55, -0.55}};
  if (name == "dtlz2") return Vector{{-1.1, -1.1}};
  return Vector();
}

// D -> 50 -> 50 -> 1 ReLU network with N(0, 1) weights and biases.
std::function<Vector(const Vector&)> nn_draw(int dim, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Eigen::Index r, Eigen::Index c) {
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) m(i, j) = normal(rng);
    return m;
  };
  Matrix w1 = draw(50, dim);
  Vector b1 = draw(50, 1).col(0);
  Matrix w2 = draw(50, 50);
  Vector b2 = draw(50, 1).col(0);
  Matrix w3 = draw(1, 50);
  Vector b3 = draw(1, 1).col(0);
  return [=](const Vector& x) -> Vector {
    const Vector h1 = (w1 * x + b1).cwiseMax(0.0);
    const Vector h2 = (w2 * h1 + b2).cwiseMax(0.0);
    return w3 * h2 + b3;
  };
}

}  // namespace

std::vector<std::string> problem_names() {
  return {"ackley", "ackley2d", "ackley5d", "branin", "branincurrin", "dtlz1", "dtlz2", "hartmann6", "nndraw"};
}

Problem make_problem(const std::string& name, const ProblemOptions& options) {
  Problem p;
  p.name = name;
  p.noise_std = options.noise_std;
  if (options.noise_std < 0.0) throw std::invalid_argument("make_problem: negative noise std");

  if (name == "branin") {
    p.dim = 2;
    p.bounds = Bounds{Vector{{-5.0, 0.0}}, Vector{{10.0, 15.0}}};
    p.negated = true;
    p.objective = [](const Vector& x) { return scalar(-branin(x(0), x(1))); };
    p.optimum = -0.39788735772973816;
  } else if (name == "ackley" || name == "ackley2d" || name == "ackley5d") {
    p.dim = name == "ackley2d" ? 2 : name == "ackley5d" ? 5 : options.dim.value_or(2);
    p.bounds = box(p.dim, -5.0, 10.0);
    p.negated = true;
    p.objective = [](const Vector& x) { return scalar(-ackley(x)); };
    p.optimum = 0.0;
  } else if (name == "hartmann6") {
    p.dim = 6;
    p.bounds = box(6, 0.0, 1.0);
    p.negated = true;
    p.objective = [](const Vector& x) { return scalar(-hartmann6(x)); };
    p.optimum = 3.32237;
  } else if (name == "nndraw") {
    p.dim = options.dim.value_or(200);
    p.bounds = box(p.dim, 0.0, 1.0);
    p.objective = nn_draw(p.dim, options.seed);
  } else if (name == "branincurrin") {
    p.dim = 2;
    p.objectives = 2;
    p.bounds = box(2, 0.0, 1.0);
    p.negated = true;
    p.objective = [](const Vector& x) {
      return Vector{{-branin(15.0 * x(0) - 5.0, 15.0 * x(1)), -currin(x(0), x(1))}};
    };
  } else if (name == "dtlz1" || name == "dtlz2") {
    p.dim = options.dim.value_or(5);
    p.objectives = 2;
    if (p.dim < p.objectives) throw std::invalid_argument("make_problem: DTLZ needs dim >= objectives");
    p.bounds = box(p.dim, 0.0, 1.0);
    p.negated = true;
    if (name == "dtlz1") {
      p.objective = [](const Vector& x) { return Vector(-dtlz1(x, 2)); };
    } else {
      p.objective = [](const Vector& x) { return Vector(-dtlz2(x, 2)); };
    }
  } else {
    throw UnknownProblem("make_problem: unknown problem '" + name + "'");
  }

  if (p.objectives > 1) {
    p.reference_point = options.reference_point ? *options.reference_point : default_reference(name);
    if (p.reference_point->size() != p.objectives) {
      throw std::invalid_argument("make_problem: reference point dimension mismatch");
    }
  }
  return p;
}

Vector evaluate_noisy(const Problem& problem, const Vector& x, Rng& rng) {
  Vector y = problem.evaluate(x);
  if (problem.noise_std > 0.0) {
    std::normal_distribution<double> normal(0.0, problem.noise_std);
    for (Eigen::Index k = 0; k < y.size(); ++k) y(k) += normal(rng);
  }
  return y;
}

std::size_t initial_design_size(const Problem& problem) {
  return problem.objectives == 1 ? static_cast<std::size_t>(problem.dim)
                                 : static_cast<std::size_t>(2 * (problem.dim + 1));
}

Dataset initial_design(const Problem& problem, Rng& rng) {
  Dataset data;
  data.bounds = problem.bounds;
  const auto n = static_cast<int>(initial_design_size(problem));
  SobolStream sobol(problem.dim, rng());
  for (int i = 0; i < n; ++i) {
    // Clamp guards the upper edge against rounding in the affine map.
    const Vector x = problem.bounds.from_unit(sobol.next()).cwiseMax(problem.bounds.lower).cwiseMin(problem.bounds.upper);
    data.add(x, evaluate_noisy(problem, x, rng));
  }
  return data;
}

}  // namespace vbllbo
