#include "vbllbo/nsga2.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vbllbo/pareto.hpp"

namespace vbllbo {

std::pair<Vector, Vector> sbx_crossover(const Vector& a, const Vector& b, const Vector& lower,
                                        const Vector& upper, double eta, double probability, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector c1 = a;
  Vector c2 = b;
  if (unit(rng) > probability) return {c1, c2};
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (unit(rng) > 0.5) continue;
    if (std::abs(a(i) - b(i)) <= 1e-14) continue;
    const double y1 = std::min(a(i), b(i));
    const double y2 = std::max(a(i), b(i));
    const double lo = lower(i);
    const double hi = upper(i);
    const double u = unit(rng);
    auto spread = [&](double beta) {
      const double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
      return u <= 1.0 / alpha ? std::pow(u * alpha, 1.0 / (eta + 1.0))
                              : std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
    };
    const double beta_lo = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
    const double beta_hi = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
    double v1 = 0.5 * ((y1 + y2) - spread(beta_lo) * (y2 - y1));
    double v2 = 0.5 * ((y1 + y2) + spread(beta_hi) * (y2 - y1));
    v1 = std::clamp(v1, lo, hi);
    v2 = std::clamp(v2, lo, hi);
    if (unit(rng) <= 0.5) std::swap(v1, v2);
    c1(i) = v1;
    c2(i) = v2;
  }
  return {c1, c2};
}

Vector polynomial_mutation(const Vector& x, const Vector& lower, const Vector& upper, double eta,
                           double probability, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector out = x;
  const double power = 1.0 / (eta + 1.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (unit(rng) > probability) continue;
    const double lo = lower(i);
    const double hi = upper(i);
    const double width = hi - lo;
    if (width <= 0.0) continue;
    const double d1 = (out(i) - lo) / width;
    const double d2 = (hi - out(i)) / width;
    const double u = unit(rng);
    double dq;
    if (u < 0.5) {
      const double val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, eta + 1.0);
      dq = std::pow(val, power) - 1.0;
    } else {
      const double val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, eta + 1.0);
      dq = 1.0 - std::pow(val, power);
    }
    out(i) = std::clamp(out(i) + dq * width, lo, hi);
  }
  return out;
}

namespace {

struct Ranking {
  std::vector<int> rank;
  std::vector<double> crowding;
};

Ranking rank_population(const std::vector<Vector>& y) {
  Ranking r;
  r.rank.assign(y.size(), 0);
  r.crowding.assign(y.size(), 0.0);
  const auto fronts = non_dominated_sort(y);
  for (std::size_t f = 0; f < fronts.size(); ++f) {
    const auto dist = crowding_distance(y, fronts[f]);
    for (std::size_t j = 0; j < fronts[f].size(); ++j) {
      r.rank[static_cast<std::size_t>(fronts[f][j])] = static_cast<int>(f);
      r.crowding[static_cast<std::size_t>(fronts[f][j])] = dist[j];
    }
  }
  return r;
}

std::vector<Vector> rows(const Matrix& m) {
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(m.row(i).transpose());
  return out;
}

Matrix stack(const std::vector<Vector>& v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), v.front().size());
  for (std::size_t i = 0; i < v.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  return m;
}

}  // namespace

ParetoSet nsga2_optimize(const BatchObjective& objective, const Vector& lower, const Vector& upper,
                         const NsgaConfig& cfg, Rng& rng) {
  if (cfg.population < 4 || cfg.population % 2 != 0) {
    throw std::invalid_argument("nsga2_optimize: population must be even and >= 4");
  }
  if (cfg.generations < 1) throw std::invalid_argument("nsga2_optimize: generations must be >= 1");
  const Eigen::Index dim = lower.size();
  const std::size_t pop = static_cast<std::size_t>(cfg.population);
  const double mutation_p = cfg.mutation_probability.value_or(1.0 / static_cast<double>(dim));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vector> x(pop);
  for (auto& xi : x) {
    xi.resize(dim);
    for (Eigen::Index d = 0; d < dim; ++d) xi(d) = lower(d) + unit(rng) * (upper(d) - lower(d));
  }
  std::vector<Vector> y = rows(objective(stack(x)));
  Ranking ranking = rank_population(y);

  std::uniform_int_distribution<std::size_t> pick(0, pop - 1);
  auto tournament = [&]() {
    const std::size_t a = pick(rng);
    const std::size_t b = pick(rng);
    if (ranking.rank[a] != ranking.rank[b]) return ranking.rank[a] < ranking.rank[b] ? a : b;
    if (ranking.crowding[a] != ranking.crowding[b]) return ranking.crowding[a] > ranking.crowding[b] ? a : b;
    return unit(rng) < 0.5 ? a : b;
  };

  for (int gen = 0; gen < cfg.generations; ++gen) {
    std::vector<Vector> children;
    children.reserve(pop);
    while (children.size() < pop) {
      const std::size_t p1 = tournament();
      const std::size_t p2 = tournament();
      auto [c1, c2] = sbx_crossover(x[p1], x[p2], lower, upper, cfg.crossover_eta,
                                    cfg.crossover_probability, rng);
      children.push_back(polynomial_mutation(c1, lower, upper, cfg.mutation_eta, mutation_p, rng));
      children.push_back(polynomial_mutation(c2, lower, upper, cfg.mutation_eta, mutation_p, rng));
    }
    std::vector<Vector> child_y = rows(objective(stack(children)));

    std::vector<Vector> merged_x = x;
    std::vector<Vector> merged_y = y;
    merged_x.insert(merged_x.end(), children.begin(), children.end());
    merged_y.insert(merged_y.end(), child_y.begin(), child_y.end());

    const auto fronts = non_dominated_sort(merged_y);
    std::vector<std::size_t> survivors;
    survivors.reserve(pop);
    for (const auto& front : fronts) {
      if (survivors.size() + front.size() <= pop) {
        for (int i : front) survivors.push_back(static_cast<std::size_t>(i));
        if (survivors.size() == pop) break;
        continue;
      }
      const auto dist = crowding_distance(merged_y, front);
      std::vector<std::size_t> order(front.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
      for (std::size_t j = 0; survivors.size() < pop; ++j) survivors.push_back(static_cast<std::size_t>(front[order[j]]));
      break;
    }
    std::vector<Vector> next_x;
    std::vector<Vector> next_y;
    next_x.reserve(pop);
    next_y.reserve(pop);
    for (std::size_t i : survivors) {
      next_x.push_back(merged_x[i]);
      next_y.push_back(merged_y[i]);
    }
    x = std::move(next_x);
    y = std::move(next_y);
    ranking = rank_population(y);
  }

  ParetoSet result;
  const auto fronts = non_dominated_sort(y);
  if (fronts.empty()) return result;
  for (int i : fronts.front()) {
    const auto& xi = x[static_cast<std::size_t>(i)];
    const bool duplicate = std::any_of(result.x.begin(), result.x.end(), [&](const Vector& v) { return v == xi; });
    if (duplicate) continue;
    result.x.push_back(xi);
    result.y.push_back(y[static_cast<std::size_t>(i)]);
  }
  return result;
}

}  // namespace vbllbo
