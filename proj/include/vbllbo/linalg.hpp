#pragma once

#include <stdexcept>

#include "vbllbo/types.hpp"

namespace vbllbo {

class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lower-triangular factor with a strictly positive diagonal.
///
/// Used for precision factors: S^{-1} = L L^T. The strictly-upper part is
/// always zero.
class LowerTriangular {
 public:
  LowerTriangular() = default;
  /// Takes the lower triangle of `m`; throws std::invalid_argument if `m` is
  /// not square or any diagonal entry is not strictly positive and finite.
  explicit LowerTriangular(const Matrix& m);

  static LowerTriangular identity(Eigen::Index dim);
  static LowerTriangular diagonal(const Vector& d);

  Eigen::Index dim() const { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  const Matrix& matrix() const { return m_; }

  /// L L^T.
  Matrix product() const;

 private:
  friend LowerTriangular chol_rank1_update(const LowerTriangular&, const Vector&);
  Matrix m_;
};

LowerTriangular cholesky(const Matrix& a);

/// Cholesky with explicit caller-visible repair: first tries `a` as is, then
/// adds `initial` to the diagonal and doubles it until `max` is exceeded.
/// `applied` receives the jitter that succeeded (0 when none was needed).
LowerTriangular cholesky_with_jitter(const Matrix& a, double* applied = nullptr,
                                     double initial = 1e-8, double max = 1e-4);

/// Returns L' with L' L'^T = L L^T + v v^T in O(m^2).
LowerTriangular chol_rank1_update(const LowerTriangular& l, const Vector& v);

/// Solves L x = b, or L^T x = b when `transpose` is set.
Vector tri_solve(const LowerTriangular& l, const Vector& b, bool transpose);
Matrix tri_solve(const LowerTriangular& l, const Matrix& b, bool transpose);

/// log det(L L^T).
double logdet_precision(const LowerTriangular& l);

/// trace((L L^T)^{-1}) = ||L^{-1}||_F^2.
double inv_trace_from_chol(const LowerTriangular& l);

/// Lower factor F with F F^T = (L L^T)^{-1}. Maps a precision Cholesky factor
/// to the covariance one and back. O(m^3), via QR of L^{-1}.
LowerTriangular inverse_gram_factor(const LowerTriangular& l);

/// Draw from N(mean, (L L^T)^{-1}).
Vector sample_gaussian(const Vector& mean, const LowerTriangular& precision_chol, Rng& rng);

/// Deterministic variant taking the standard-normal draw explicitly.
Vector sample_gaussian(const Vector& mean, const LowerTriangular& precision_chol,
                       const Vector& standard_normal);

Vector standard_normal_vector(Eigen::Index n, Rng& rng);

}  // namespace vbllbo
