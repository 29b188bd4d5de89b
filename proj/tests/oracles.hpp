// Test-side reference computations, kept independent of the library code.
#pragma once

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Dense>

#include "vbllbo/types.hpp"

namespace oracle {

using vbllbo::Matrix;
using vbllbo::Rng;
using vbllbo::Vector;

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline Vector random_vector(Eigen::Index n, Rng& rng) { return random_matrix(n, 1, rng).col(0); }

/// A A^T / n + I: well conditioned SPD.
inline Matrix random_spd(Eigen::Index n, Rng& rng) {
  const Matrix a = random_matrix(n, n, rng);
  return a * a.transpose() / static_cast<double>(n) + Matrix::Identity(n, n);
}

inline Matrix llt_factor(const Matrix& a) { return Eigen::LLT<Matrix>(a).matrixL(); }

inline double rel_frobenius(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-300);
}

/// log det via symmetric eigenvalues.
inline double logdet_eig(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  return es.eigenvalues().array().log().sum();
}

/// Central difference of f at x along coordinate i.
inline double central_difference(const std::function<double(const Vector&)>& f, Vector x, Eigen::Index i,
                                 double h = 1e-5) {
  const double xi = x(i);
  x(i) = xi + h;
  const double fp = f(x);
  x(i) = xi - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

/// |a - b| / max(|a|, |b|, floor).
inline double rel_err(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Dense Bayesian linear regression posterior N(mean, cov) for prior N(0, s0 I)
/// and noise variance sigma2.
struct DensePosterior {
  Vector mean;
  Matrix cov;
};

inline DensePosterior blr_posterior(const Matrix& phi, const Vector& y, double s0, double sigma2) {
  const Eigen::Index m = phi.cols();
  const Matrix precision = Matrix::Identity(m, m) / s0 + phi.transpose() * phi / sigma2;
  const Matrix cov = precision.inverse();
  return {cov * phi.transpose() * y / sigma2, cov};
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

}  // namespace oracle
