// Derives reference points and maximum hypervolumes for the multi-objective
// problems: NSGA-II (P=200, G=500) on the noiseless objectives, reference =
// nadir of the front minus 10% of its range, max HV = HV of that front.
#include <iostream>
#include <string>

#include <json.hpp>

#include "vbllbo/benchmarks.hpp"
#include "vbllbo/nsga2.hpp"
#include "vbllbo/pareto.hpp"

using namespace vbllbo;

namespace {

ParetoSet true_front(const Problem& p, std::uint64_t seed) {
  NsgaConfig cfg;
  cfg.population = 200;
  cfg.generations = 500;
  Rng rng(seed);
  const BatchObjective f = [&](const Matrix& x) {
    Matrix y(x.rows(), p.objectives);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      y.row(i) = p.evaluate(p.bounds.from_unit(x.row(i).transpose())).transpose();
    }
    return y;
  };
  return nsga2_optimize(f, Vector::Zero(p.dim), Vector::Ones(p.dim), cfg, rng);
}

}  // namespace

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 0;
  nlohmann::json out = nlohmann::json::object();
  for (const std::string name : {"branincurrin", "dtlz1", "dtlz2"}) {
    const Problem p = make_problem(name);
    const ParetoSet front = true_front(p, seed);
    Vector lo = front.y.front();
    Vector hi = front.y.front();
    for (const auto& y : front.y) {
      lo = lo.cwiseMin(y);
      hi = hi.cwiseMax(y);
    }
    const Vector ref = lo - 0.1 * (hi - lo);
    const double own = hypervolume(front.y, ref);
    const double recorded = hypervolume(front.y, *p.reference_point);
    out[name] = {{"reference_point", std::vector<double>(ref.data(), ref.data() + ref.size())},
                 {"max_hv_derived_reference", own},
                 {"max_hv_recorded_reference", recorded},
                 {"front_size", front.y.size()}};
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}
