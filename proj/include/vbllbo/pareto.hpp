#pragma once

#include <stdexcept>
#include <vector>

#include "vbllbo/types.hpp"

namespace vbllbo {

class UnsupportedDimension : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Maximization convention throughout: larger is better in every objective.

/// a dominates b: a >= b everywhere and a > b somewhere.
bool dominates(const Vector& a, const Vector& b);

/// Fronts of indices into `points`, best front first.
std::vector<std::vector<int>> non_dominated_sort(const std::vector<Vector>& points);

/// Crowding distance of each member of one front (same order as `front`).
/// Boundary points of every objective get +infinity.
std::vector<double> crowding_distance(const std::vector<Vector>& points, const std::vector<int>& front);

/// Indices of the non-dominated members of `points` (duplicates kept once).
std::vector<int> pareto_indices(const std::vector<Vector>& points);

/// Volume dominated by `points` and bounded below by `reference`. Points that
/// do not strictly dominate the reference in every coordinate add nothing.
/// Supports two and three objectives.
double hypervolume(const std::vector<Vector>& points, const Vector& reference);

/// Non-dominated observations plus the reference point for hypervolume.
class ParetoArchive {
 public:
  explicit ParetoArchive(Vector reference);

  /// Inserts y, pruning anything it dominates. Returns false if y is
  /// dominated by (or equal to) an existing point.
  bool insert(const Vector& y);

  const std::vector<Vector>& points() const { return points_; }
  const Vector& reference() const { return reference_; }
  double hypervolume() const;
  double hypervolume_improvement(const Vector& y) const;

 private:
  Vector reference_;
  std::vector<Vector> points_;
};

struct HviSelection {
  int index = -1;                  // chosen member of the candidate front
  double improvement = 0.0;
  std::vector<int> maximizers;     // all candidates attaining the maximum
};

/// Greedy hypervolume-improvement choice among predicted objective vectors.
/// Ties (including the all-zero case) are broken uniformly at random.
HviSelection select_hvi_candidate(const ParetoArchive& archive, const std::vector<Vector>& candidates,
                                  Rng& rng);

}  // namespace vbllbo
