#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vbllbo/types.hpp"

namespace vbllbo {

/// Gray-code Sobol generator with Joe-Kuo direction numbers (up to 200
/// dimensions). Without a scramble seed the stream skips the origin, so the
/// first coordinate runs 0.5, 0.75, 0.25, ...; with a seed each coordinate
/// receives a random digital shift and the stream starts at index 0.
class SobolStream {
 public:
  static constexpr int kMaxDimension = 200;

  explicit SobolStream(int dimension, std::optional<std::uint64_t> scramble_seed = std::nullopt);

  int dimension() const { return dimension_; }
  std::uint64_t index() const { return index_; }

  Vector next();
  /// Rows are points.
  Matrix next(int n);

 private:
  int dimension_;
  std::uint64_t index_ = 0;
  std::vector<std::uint32_t> directions_;  // dimension x 32
  std::vector<std::uint32_t> state_;
  std::vector<std::uint32_t> shift_;
};

/// Convenience wrapper: next n points of `stream` as rows.
Matrix sobol_points(SobolStream& stream, int n);

}  // namespace vbllbo
