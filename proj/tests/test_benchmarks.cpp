#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vbllbo/benchmarks.hpp"
#include "vbllbo/sobol.hpp"

using namespace vbllbo;

namespace {

// Star discrepancy of a 2-D point set, evaluated on every anchored box whose
// corner is built from point coordinates (and 1), with open and closed counts.
double star_discrepancy_2d(const Matrix& pts) {
  const auto n = pts.rows();
  std::vector<double> xs(pts.col(0).data(), pts.col(0).data() + n);
  std::vector<double> ys(pts.col(1).data(), pts.col(1).data() + n);
  xs.push_back(1.0);
  ys.push_back(1.0);
  double worst = 0.0;
  for (double u : xs) {
    for (double v : ys) {
      int open = 0;
      int closed = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (pts(i, 0) < u && pts(i, 1) < v) ++open;
        if (pts(i, 0) <= u && pts(i, 1) <= v) ++closed;
      }
      const double vol = u * v;
      worst = std::max({worst, vol - open / static_cast<double>(n), closed / static_cast<double>(n) - vol});
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("closed forms at known optima") {
  CHECK(ackley(Vector::Zero(2)) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(std::abs(ackley(Vector::Zero(5))) < 1e-14);
  CHECK(branin(std::numbers::pi, 2.275) == doctest::Approx(0.397887).epsilon(1e-6));
  CHECK(branin(-std::numbers::pi, 12.275) == doctest::Approx(0.397887).epsilon(1e-6));
  CHECK(branin(9.42478, 2.475) == doctest::Approx(0.397887).epsilon(1e-6));
  const Vector h6{{0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573}};
  CHECK(-hartmann6(h6) == doctest::Approx(3.32237).epsilon(1e-5));

  // Currin exponential at a hand-computed point: x = (0.5, 0.5).
  const double e = 1.0 - std::exp(-1.0);
  const double num = 2300 * 0.125 + 1900 * 0.25 + 2092 * 0.5 + 60;
  const double den = 100 * 0.125 + 500 * 0.25 + 4 * 0.5 + 20;
  CHECK(currin(0.5, 0.5) == doctest::Approx(e * num / den).epsilon(1e-12));

  // DTLZ2 with x_M at 0.5 lies on the unit sphere; DTLZ1 on the simplex sum 0.5.
  Vector x = Vector::Constant(5, 0.5);
  x(0) = 0.3;
  const Vector f2 = dtlz2(x, 2);
  CHECK(f2.squaredNorm() == doctest::Approx(1.0).epsilon(1e-12));
  const Vector f1 = dtlz1(x, 2);
  CHECK(f1.sum() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("problem registry") {
  for (const auto& name : problem_names()) {
    ProblemOptions opts;
    if (name == "nndraw") opts.dim = 4;
    const Problem p = make_problem(name, opts);
    CHECK(p.bounds.dim() == p.dim);
    const Vector mid = (p.bounds.lower + p.bounds.upper) / 2.0;
    CHECK(p.evaluate(mid).size() == p.objectives);
    CHECK(p.evaluate(mid).allFinite());
    CHECK_THROWS_AS(p.evaluate(p.bounds.upper + Vector::Ones(p.dim)), OutOfBounds);
    if (p.objectives > 1) CHECK(p.reference_point.has_value());
  }
  CHECK_THROWS_AS(make_problem("rosenbrock"), UnknownProblem);

  const Problem branin_p = make_problem("branin");
  CHECK(branin_p.evaluate(Vector{{std::numbers::pi, 2.275}})(0) ==
        doctest::Approx(-0.397887).epsilon(1e-6));
  CHECK(branin_p.canonical(Vector::Constant(1, -2.0))(0) == 2.0);
  CHECK(make_problem("ackley2d").evaluate(Vector::Zero(2))(0) == doctest::Approx(0.0));
  CHECK(make_problem("ackley5d").dim == 5);

  ProblemOptions ref;
  ref.reference_point = Vector{{-1.0, -2.0}};
  CHECK(make_problem("dtlz2", ref).reference_point.value() == Vector{{-1.0, -2.0}});
  ref.reference_point = Vector{{-1.0}};
  CHECK_THROWS(make_problem("dtlz2", ref));
}

TEST_CASE("nn draw is seeded") {
  ProblemOptions a;
  a.dim = 10;
  a.seed = 1;
  ProblemOptions b = a;
  b.seed = 2;
  const Vector x = Vector::Constant(10, 0.4);
  CHECK(make_problem("nndraw", a).evaluate(x)(0) == make_problem("nndraw", a).evaluate(x)(0));
  CHECK(make_problem("nndraw", a).evaluate(x)(0) != make_problem("nndraw", b).evaluate(x)(0));
  CHECK(make_problem("nndraw").dim == 200);
}

TEST_CASE("observation noise") {
  ProblemOptions opts;
  const Problem exact = make_problem("branin", opts);
  Rng rng(0);
  const Vector x{{1.0, 2.0}};
  CHECK(evaluate_noisy(exact, x, rng) == exact.evaluate(x));

  opts.noise_std = 0.1;
  const Problem noisy = make_problem("branin", opts);
  const double truth = noisy.evaluate(x)(0);
  double sum = 0.0;
  double sq = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const double e = evaluate_noisy(noisy, x, rng)(0) - truth;
    sum += e;
    sq += e * e;
  }
  const double sd = std::sqrt((sq - sum * sum / n) / (n - 1));
  CHECK(std::abs(sd - 0.1) <= 0.005);

  Rng r1(5);
  Rng r2(5);
  CHECK(evaluate_noisy(noisy, x, r1) == evaluate_noisy(noisy, x, r2));
  opts.noise_std = -1.0;
  CHECK_THROWS(make_problem("branin", opts));
}

TEST_CASE("initial design size and bounds") {
  Rng rng(2);
  const Problem branin_p = make_problem("branin");
  CHECK(initial_design_size(branin_p) == 2);
  CHECK(initial_design(branin_p, rng).size() == 2);
  const Problem bc = make_problem("branincurrin");
  CHECK(initial_design_size(bc) == 6);
  const Problem a5 = make_problem("ackley5d");
  const Dataset d = initial_design(a5, rng);
  CHECK(d.size() == 5);
  for (const auto& x : d.x) CHECK(a5.bounds.contains(x));
  for (const auto& y : initial_design(bc, rng).y) CHECK(y.size() == 2);
}

TEST_CASE("sobol sequence") {
  SobolStream s(1);
  CHECK(s.next()(0) == 0.5);
  CHECK(s.next()(0) == 0.75);
  CHECK(s.next()(0) == 0.25);

  SobolStream s2(2);
  const Matrix p = s2.next(4);
  // Second coordinate of the base sequence: 0.5, 0.25, 0.75, 0.375.
  CHECK(p(0, 1) == 0.5);
  CHECK(p(1, 1) == 0.25);
  CHECK(p(2, 1) == 0.75);
  CHECK(p(3, 1) == 0.375);

  SobolStream hi(SobolStream::kMaxDimension, 9);
  const Matrix q = hi.next(300);
  CHECK(q.minCoeff() >= 0.0);
  CHECK(q.maxCoeff() < 1.0);
  CHECK_THROWS(SobolStream(0));
  CHECK_THROWS(SobolStream(SobolStream::kMaxDimension + 1));

  SobolStream a(3, 4);
  SobolStream b(3, 4);
  CHECK(a.next(10) == b.next(10));
}

TEST_CASE("sobol beats uniform sampling on star discrepancy") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SobolStream s(2, seed);
    const double d_sobol = star_discrepancy_2d(s.next(256));
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Matrix r(256, 2);
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = u(rng);
    CHECK(d_sobol < star_discrepancy_2d(r));
  }
}
