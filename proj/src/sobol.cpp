#include "vbllbo/sobol.hpp"

#include <array>
#include <bit>
#include <stdexcept>

namespace vbllbo {

namespace {

struct DirectionEntry {
  int degree;
  std::uint32_t coefficients;
  std::array<std::uint32_t, 18> initial;
};

constexpr DirectionEntry kJoeKuo[] = {
#include "sobol_direction_numbers.inc"
};

constexpr int kBits = 32;

}  // namespace

SobolStream::SobolStream(int dimension, std::optional<std::uint64_t> scramble_seed)
    : dimension_(dimension) {
  if (dimension < 1 || dimension > kMaxDimension) {
    throw std::invalid_argument("SobolStream: dimension must be in [1, 200]");
  }
  directions_.assign(static_cast<std::size_t>(dimension) * kBits, 0u);
  for (int k = 0; k < kBits; ++k) directions_[static_cast<std::size_t>(k)] = 1u << (kBits - 1 - k);
  for (int d = 1; d < dimension; ++d) {
    const DirectionEntry& e = kJoeKuo[d - 1];
    std::uint32_t* v = &directions_[static_cast<std::size_t>(d) * kBits];
    const int s = e.degree;
    for (int k = 0; k < std::min(s, kBits); ++k) v[k] = e.initial[static_cast<std::size_t>(k)] << (kBits - 1 - k);
    for (int k = s; k < kBits; ++k) {
      std::uint32_t value = v[k - s] ^ (v[k - s] >> s);
      for (int i = 1; i < s; ++i) {
        if ((e.coefficients >> (s - 1 - i)) & 1u) value ^= v[k - i];
      }
      v[k] = value;
    }
  }
  state_.assign(static_cast<std::size_t>(dimension), 0u);
  shift_.assign(static_cast<std::size_t>(dimension), 0u);
  if (scramble_seed) {
    Rng rng(*scramble_seed);
    for (auto& s : shift_) s = static_cast<std::uint32_t>(rng() >> 32);
  } else {
    // Skip the origin.
    next();
  }
}

Vector SobolStream::next() {
  Vector point(dimension_);
  for (int d = 0; d < dimension_; ++d) {
    const std::uint32_t bits = state_[static_cast<std::size_t>(d)] ^ shift_[static_cast<std::size_t>(d)];
    point(d) = static_cast<double>(bits) * 0x1p-32;
  }
  // Gray-code step: flip the direction of the lowest zero bit of the index.
  const int c = std::countr_one(index_);
  if (c >= kBits) throw std::overflow_error("SobolStream: sequence exhausted");
  for (int d = 0; d < dimension_; ++d) {
    state_[static_cast<std::size_t>(d)] ^= directions_[static_cast<std::size_t>(d) * kBits + static_cast<std::size_t>(c)];
  }
  ++index_;
  return point;
}

Matrix SobolStream::next(int n) {
  if (n < 1) throw std::invalid_argument("SobolStream::next: n must be >= 1");
  Matrix out(n, dimension_);
  for (int i = 0; i < n; ++i) out.row(i) = next().transpose();
  return out;
}

Matrix sobol_points(SobolStream& stream, int n) { return stream.next(n); }

}  // namespace vbllbo
