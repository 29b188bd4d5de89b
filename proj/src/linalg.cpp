#include "vbllbo/linalg.hpp"

#include <cmath>

#include <Eigen/QR>
#include <sstream>

namespace vbllbo {

LowerTriangular::LowerTriangular(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw std::invalid_argument("LowerTriangular: matrix must be square and non-empty");
  }
  m_ = m.triangularView<Eigen::Lower>();
  for (Eigen::Index i = 0; i < m_.rows(); ++i) {
    if (!(m_(i, i) > 0.0) || !std::isfinite(m_(i, i))) {
      std::ostringstream os;
      os << "LowerTriangular: diagonal entry " << i << " is " << m_(i, i);
      throw std::invalid_argument(os.str());
    }
  }
}

LowerTriangular LowerTriangular::identity(Eigen::Index dim) {
  return LowerTriangular(Matrix::Identity(dim, dim));
}

LowerTriangular LowerTriangular::diagonal(const Vector& d) {
  return LowerTriangular(Matrix(d.asDiagonal()));
}

Matrix LowerTriangular::product() const {
  Matrix out = Matrix::Zero(dim(), dim());
  out.selfadjointView<Eigen::Lower>().rankUpdate(m_);
  return out.selfadjointView<Eigen::Lower>();
}

LowerTriangular cholesky(const Matrix& a) {
  const Eigen::Index n = a.rows();
  if (n < 1 || a.cols() != n) {
    throw std::invalid_argument("cholesky: matrix must be square and non-empty");
  }
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > 0.0) || !std::isfinite(pivot)) {
      std::ostringstream os;
      os << "cholesky: non-positive pivot " << pivot << " at column " << j;
      throw NotPositiveDefinite(os.str());
    }
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / d;
    }
  }
  return LowerTriangular(l);
}

LowerTriangular cholesky_with_jitter(const Matrix& a, double* applied, double initial,
                                     double max) {
  try {
    auto l = cholesky(a);
    if (applied) *applied = 0.0;
    return l;
  } catch (const NotPositiveDefinite&) {
  }
  const Matrix eye = Matrix::Identity(a.rows(), a.cols());
  for (double jitter = initial; jitter <= max; jitter *= 2.0) {
    try {
      auto l = cholesky(a + jitter * eye);
      if (applied) *applied = jitter;
      return l;
    } catch (const NotPositiveDefinite&) {
    }
  }
  throw NotPositiveDefinite("cholesky_with_jitter: jitter limit exceeded");
}

LowerTriangular chol_rank1_update(const LowerTriangular& l, const Vector& v) {
  if (v.size() != l.dim()) {
    throw std::invalid_argument("chol_rank1_update: dimension mismatch");
  }
  LowerTriangular out = l;
  Matrix& m = out.m_;
  Vector w = v;
  const Eigen::Index n = m.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (w(k) == 0.0) continue;
    const double lkk = m(k, k);
    const double r = std::hypot(lkk, w(k));
    const double c = r / lkk;
    const double s = w(k) / lkk;
    m(k, k) = r;
    const Eigen::Index tail = n - k - 1;
    if (tail > 0) {
      auto col = m.col(k).tail(tail);
      auto rest = w.tail(tail);
      col = (col + s * rest) / c;
      rest = c * rest - s * col;
    }
  }
  return out;
}

Vector tri_solve(const LowerTriangular& l, const Vector& b, bool transpose) {
  if (b.size() != l.dim()) throw std::invalid_argument("tri_solve: dimension mismatch");
  if (transpose) return l.matrix().triangularView<Eigen::Lower>().transpose().solve(b);
  return l.matrix().triangularView<Eigen::Lower>().solve(b);
}

Matrix tri_solve(const LowerTriangular& l, const Matrix& b, bool transpose) {
  if (b.rows() != l.dim()) throw std::invalid_argument("tri_solve: dimension mismatch");
  if (transpose) return l.matrix().triangularView<Eigen::Lower>().transpose().solve(b);
  return l.matrix().triangularView<Eigen::Lower>().solve(b);
}

double logdet_precision(const LowerTriangular& l) {
  return 2.0 * l.matrix().diagonal().array().log().sum();
}

double inv_trace_from_chol(const LowerTriangular& l) {
  const Matrix inv = tri_solve(l, Matrix(Matrix::Identity(l.dim(), l.dim())), false);
  return inv.squaredNorm();
}

LowerTriangular inverse_gram_factor(const LowerTriangular& l) {
  const Matrix inv = tri_solve(l, Matrix(Matrix::Identity(l.dim(), l.dim())), false);
  // inv = Q R  =>  R^T R = inv^T inv = (L L^T)^{-1}.
  Eigen::HouseholderQR<Matrix> qr(inv);
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    if (r(i, i) < 0.0) r.row(i) *= -1.0;
  }
  return LowerTriangular(r.transpose());
}

Vector standard_normal_vector(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

Vector sample_gaussian(const Vector& mean, const LowerTriangular& precision_chol, Rng& rng) {
  return sample_gaussian(mean, precision_chol, standard_normal_vector(mean.size(), rng));
}

Vector sample_gaussian(const Vector& mean, const LowerTriangular& precision_chol,
                       const Vector& standard_normal) {
  if (mean.size() != precision_chol.dim() || standard_normal.size() != mean.size()) {
    throw std::invalid_argument("sample_gaussian: dimension mismatch");
  }
  return mean + tri_solve(precision_chol, standard_normal, true);
}

}  // namespace vbllbo
