#include "vbllbo/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace vbllbo {

bool dominates(const Vector& a, const Vector& b) {
  return (a.array() >= b.array()).all() && (a.array() > b.array()).any();
}

std::vector<std::vector<int>> non_dominated_sort(const std::vector<Vector>& points) {
  const int n = static_cast<int>(points.size());
  std::vector<std::vector<int>> dominated_by(static_cast<std::size_t>(n));
  std::vector<int> domination_count(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<int>> fronts(1);
  for (int p = 0; p < n; ++p) {
    for (int q = p + 1; q < n; ++q) {
      if (dominates(points[static_cast<std::size_t>(p)], points[static_cast<std::size_t>(q)])) {
        dominated_by[static_cast<std::size_t>(p)].push_back(q);
        ++domination_count[static_cast<std::size_t>(q)];
      } else if (dominates(points[static_cast<std::size_t>(q)], points[static_cast<std::size_t>(p)])) {
        dominated_by[static_cast<std::size_t>(q)].push_back(p);
        ++domination_count[static_cast<std::size_t>(p)];
      }
    }
  }
  for (int p = 0; p < n; ++p) {
    if (domination_count[static_cast<std::size_t>(p)] == 0) fronts[0].push_back(p);
  }
  std::size_t i = 0;
  while (i < fronts.size() && !fronts[i].empty()) {
    std::vector<int> next;
    for (int p : fronts[i]) {
      for (int q : dominated_by[static_cast<std::size_t>(p)]) {
        if (--domination_count[static_cast<std::size_t>(q)] == 0) next.push_back(q);
      }
    }
    std::sort(next.begin(), next.end());
    if (next.empty()) break;
    fronts.push_back(std::move(next));
    ++i;
  }
  if (fronts.size() == 1 && fronts[0].empty()) fronts.clear();
  return fronts;
}

std::vector<double> crowding_distance(const std::vector<Vector>& points, const std::vector<int>& front) {
  const std::size_t n = front.size();
  std::vector<double> distance(n, 0.0);
  if (n == 0) return distance;
  const double inf = std::numeric_limits<double>::infinity();
  if (n <= 2) {
    std::fill(distance.begin(), distance.end(), inf);
    return distance;
  }
  const Eigen::Index objectives = points[static_cast<std::size_t>(front[0])].size();
  std::vector<std::size_t> order(n);
  for (Eigen::Index k = 0; k < objectives; ++k) {
    std::iota(order.begin(), order.end(), 0);
    auto value = [&](std::size_t i) { return points[static_cast<std::size_t>(front[i])](k); };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return value(a) < value(b); });
    const double span = value(order.back()) - value(order.front());
    distance[order.front()] = inf;
    distance[order.back()] = inf;
    if (span <= 0.0) continue;
    for (std::size_t j = 1; j + 1 < n; ++j) {
      distance[order[j]] += (value(order[j + 1]) - value(order[j - 1])) / span;
    }
  }
  return distance;
}

std::vector<int> pareto_indices(const std::vector<Vector>& points) {
  std::vector<int> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool keep = true;
    for (std::size_t j = 0; j < points.size() && keep; ++j) {
      if (i == j) continue;
      if (dominates(points[j], points[i])) keep = false;
      // Equal points: keep the first occurrence only.
      if (j < i && points[j] == points[i]) keep = false;
    }
    if (keep) out.push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

// 2-D sweep over (x, y) pairs already known to exceed the reference.
double hypervolume_2d(std::vector<std::pair<double, double>> pts, double rx, double ry) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second > b.second);
  });
  double volume = 0.0;
  double best_y = ry;
  for (const auto& [x, y] : pts) {
    if (y > best_y) {
      volume += (x - rx) * (y - best_y);
      best_y = y;
    }
  }
  return volume;
}

}  // namespace

double hypervolume(const std::vector<Vector>& points, const Vector& reference) {
  const Eigen::Index k = reference.size();
  if (k != 2 && k != 3) throw UnsupportedDimension("hypervolume: only 2 or 3 objectives are supported");
  std::vector<Vector> valid;
  for (const auto& p : points) {
    if (p.size() != k) throw std::invalid_argument("hypervolume: point dimension mismatch");
    if ((p.array() > reference.array()).all()) valid.push_back(p);
  }
  if (valid.empty()) return 0.0;
  if (k == 2) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : valid) pts.emplace_back(p(0), p(1));
    return hypervolume_2d(std::move(pts), reference(0), reference(1));
  }
  // Slice along the third objective, highest level first.
  std::sort(valid.begin(), valid.end(), [](const Vector& a, const Vector& b) { return a(2) > b(2); });
  double volume = 0.0;
  std::vector<std::pair<double, double>> active;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    active.emplace_back(valid[i](0), valid[i](1));
    const double lower = i + 1 < valid.size() ? valid[i + 1](2) : reference(2);
    const double depth = valid[i](2) - lower;
    if (depth > 0.0) volume += depth * hypervolume_2d(active, reference(0), reference(1));
  }
  return volume;
}

ParetoArchive::ParetoArchive(Vector reference) : reference_(std::move(reference)) {}

bool ParetoArchive::insert(const Vector& y) {
  if (y.size() != reference_.size()) throw std::invalid_argument("ParetoArchive: dimension mismatch");
  for (const auto& p : points_) {
    if (dominates(p, y) || p == y) return false;
  }
  std::erase_if(points_, [&](const Vector& p) { return dominates(y, p); });
  points_.push_back(y);
  return true;
}

double ParetoArchive::hypervolume() const { return vbllbo::hypervolume(points_, reference_); }

double ParetoArchive::hypervolume_improvement(const Vector& y) const {
  std::vector<Vector> extended = points_;
  extended.push_back(y);
  return std::max(0.0, vbllbo::hypervolume(extended, reference_) - hypervolume());
}

HviSelection select_hvi_candidate(const ParetoArchive& archive, const std::vector<Vector>& candidates,
                                  Rng& rng) {
  if (candidates.empty()) throw std::invalid_argument("select_hvi_candidate: empty front");
  const double base = archive.hypervolume();
  std::vector<double> gains(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::vector<Vector> extended = archive.points();
    extended.push_back(candidates[i]);
    gains[i] = std::max(0.0, hypervolume(extended, archive.reference()) - base);
  }
  const double best = *std::max_element(gains.begin(), gains.end());
  // Differences below this are rounding noise in the HV subtraction.
  const double tolerance = 1e-12 * std::max(1.0, std::abs(base));
  HviSelection sel;
  sel.improvement = best;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    if (best - gains[i] <= tolerance) sel.maximizers.push_back(static_cast<int>(i));
  }
  if (sel.maximizers.size() == 1) {
    sel.index = sel.maximizers.front();
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, sel.maximizers.size() - 1);
    sel.index = sel.maximizers[pick(rng)];
  }
  return sel;
}

}  // namespace vbllbo
