#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vbllbo/vbll_head.hpp"

using namespace vbllbo;

namespace {

NoiseModel unit_noise(Eigen::Index outputs, double sigma2 = 1.0, double wishart = 0.0) {
  NoiseModel n;
  n.log_sigma2 = Vector::Constant(outputs, std::log(sigma2));
  n.wishart_scale = wishart;
  return n;
}

// Random head with dense posteriors, for gradient and KL checks.
VbllHead random_head(Eigen::Index m, Eigen::Index k, Rng& rng) {
  NoiseModel noise = unit_noise(k, 0.7, 0.05);
  noise.log_sigma2 = oracle::random_vector(k, rng) * 0.3;
  VbllHead head = make_prior_head(m, k, LastLayerPrior{1.3}, noise);
  for (auto& post : head.posteriors) {
    post = VariationalPosterior::from_mean(oracle::random_vector(m, rng),
                                           cholesky(oracle::random_spd(m, rng)));
  }
  return head;
}

double dense_kl(const Vector& mean, const Matrix& cov, double s0) {
  const Eigen::Index m = mean.size();
  return 0.5 * (cov.trace() / s0 + mean.squaredNorm() / s0 - static_cast<double>(m) +
                static_cast<double>(m) * std::log(s0) - oracle::logdet_eig(cov));
}

// Dense transcription of the minibatch bound, independent of the library.
double dense_loss(const std::vector<Vector>& means, const std::vector<Matrix>& covs, const Vector& log_s2,
                  double s0, double wishart, double dof, const Matrix& phi, const Matrix& y, double total) {
  const double b = static_cast<double>(phi.rows());
  double elbo = 0.0;
  for (std::size_t k = 0; k < means.size(); ++k) {
    const double s2 = std::exp(log_s2(static_cast<Eigen::Index>(k)));
    double data = 0.0;
    for (Eigen::Index i = 0; i < phi.rows(); ++i) {
      const Vector f = phi.row(i).transpose();
      const double r = y(i, static_cast<Eigen::Index>(k)) - f.dot(means[k]);
      data += -0.5 * std::log(2 * M_PI * s2) - 0.5 * r * r / s2 - 0.5 * f.dot(covs[k] * f) / s2;
    }
    const double log_prior = -(dof / 2 + 1) * std::log(s2) - wishart / (2 * s2);
    elbo += total / b * data - dense_kl(means[k], covs[k], s0) + log_prior;
  }
  return -elbo / total;
}

}  // namespace

TEST_CASE("KL to prior") {
  const LastLayerPrior prior{1.0};
  CHECK(kl_to_prior(VariationalPosterior::from_mean(Vector::Zero(3), LowerTriangular::identity(3)), prior) ==
        doctest::Approx(0.0));
  CHECK(kl_to_prior(VariationalPosterior::from_mean(Vector{{1, 0}}, LowerTriangular::identity(2)), prior) ==
        doctest::Approx(0.5));

  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix cov = oracle::random_spd(6, rng);
    const Vector mean = oracle::random_vector(6, rng);
    const auto post = VariationalPosterior::from_mean(mean, cholesky(Matrix(cov.inverse())));
    CHECK(std::abs(kl_to_prior(post, LastLayerPrior{2.5}) - dense_kl(mean, cov, 2.5)) <= 1e-9);
  }
}

TEST_CASE("predictive distribution") {
  VbllHead head = make_prior_head(2, 1, LastLayerPrior{1.0}, unit_noise(1));
  const Predictive p = predictive(head, Vector{{1, 0}});
  CHECK(p.mean(0) == 0.0);
  CHECK(p.variance(0) == doctest::Approx(2.0));

  head = recursive_update(head, Vector{{1, 0}}, Vector{{2.0}});
  const Predictive after = predictive(head, Vector{{1, 0}});
  CHECK(after.mean(0) == doctest::Approx(1.0));
  CHECK(after.variance(0) == doctest::Approx(1.5));
  CHECK(epistemic_variance(head, Vector{{1, 0}})(0) == doctest::Approx(0.5));
}

TEST_CASE("recursive update against closed-form regression") {
  VbllHead head = make_prior_head(3, 1, LastLayerPrior{1.0}, unit_noise(1));
  const VbllHead after = recursive_update(head, Vector{{1, 0, 0}}, Vector{{2.0}});
  const auto& post = after.posteriors[0];
  CHECK((post.precision_chol.product() - Vector{{2, 1, 1}}.asDiagonal().toDenseMatrix()).norm() < 1e-14);
  CHECK((post.natural_mean - Vector{{2, 0, 0}}).norm() < 1e-14);
  CHECK((post.mean - Vector{{1, 0, 0}}).norm() < 1e-14);

  const VbllHead same = recursive_update(head, Vector::Zero(3), Vector{{5.0}});
  CHECK(same.posteriors[0].precision_chol.matrix() == head.posteriors[0].precision_chol.matrix());
  CHECK(same.posteriors[0].mean == head.posteriors[0].mean);
}

TEST_CASE("sequential conditioning equals dense batch posterior and is order invariant") {
  Rng rng(8);
  const Eigen::Index m = 5;
  const double sigma2 = 0.3;
  const double s0 = 2.0;
  const Matrix phi = oracle::random_matrix(12, m, rng);
  const Matrix y = oracle::random_matrix(12, 2, rng);
  VbllHead head = make_prior_head(m, 2, LastLayerPrior{s0}, unit_noise(2, sigma2));
  VbllHead reversed = head;
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    head = recursive_update(head, phi.row(i).transpose(), y.row(i).transpose());
    const Eigen::Index j = phi.rows() - 1 - i;
    reversed = recursive_update(reversed, phi.row(j).transpose(), y.row(j).transpose());
  }
  for (Eigen::Index k = 0; k < 2; ++k) {
    const auto dense = oracle::blr_posterior(phi, y.col(k), s0, sigma2);
    const auto& post = head.posteriors[static_cast<std::size_t>(k)];
    CHECK(oracle::rel_frobenius(post.mean, dense.mean) < 1e-8);
    CHECK(oracle::rel_frobenius(post.covariance(), dense.cov) < 1e-8);
    CHECK(oracle::rel_frobenius(reversed.posteriors[static_cast<std::size_t>(k)].mean, post.mean) < 1e-8);
    // Natural-mean invariant.
    const Vector recovered = tri_solve(post.precision_chol, tri_solve(post.precision_chol, post.natural_mean, false), true);
    CHECK((recovered - post.mean).norm() <= 1e-8 * std::max(1.0, post.mean.norm()));
  }
}

TEST_CASE("exact fit") {
  const NoiseModel noise = unit_noise(1, 0.5);
  const VbllHead empty = fit_last_layer_exact(Matrix(0, 4), Matrix(0, 1), LastLayerPrior{1.5}, noise);
  CHECK(empty.posteriors[0].mean.norm() == 0.0);
  CHECK((empty.posteriors[0].covariance() - 1.5 * Matrix::Identity(4, 4)).norm() < 1e-14);

  const Vector f{{0.3, -1.0, 2.0, 0.5}};
  const VbllHead one = fit_last_layer_exact(Matrix(f.transpose()), Matrix::Constant(1, 1, 0.7), LastLayerPrior{1.5}, noise);
  const VbllHead rec = recursive_update(make_prior_head(4, 1, LastLayerPrior{1.5}, noise), f, Vector{{0.7}});
  CHECK((one.posteriors[0].mean - rec.posteriors[0].mean).norm() < 1e-12);
  CHECK((one.posteriors[0].covariance() - rec.posteriors[0].covariance()).norm() < 1e-12);
}

TEST_CASE("posterior contraction under conditioning") {
  Rng rng(13);
  VbllHead head = make_prior_head(6, 1, LastLayerPrior{1.0}, unit_noise(1, 0.2));
  const Vector probe = oracle::random_vector(6, rng);
  double prev = epistemic_variance(head, probe)(0);
  for (int t = 0; t < 100; ++t) {
    head = recursive_update(head, oracle::random_vector(6, rng), oracle::random_vector(1, rng));
    const double cur = epistemic_variance(head, probe)(0);
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("log predictive density") {
  VbllHead head = make_prior_head(1, 1, LastLayerPrior{0.5}, unit_noise(1, 0.5));
  const Vector f{{1.0}};  // predictive variance 0.5 + 0.5 = 1
  CHECK(log_predictive_density(head, f, Vector{{0.0}}) == doctest::Approx(-0.5 * std::log(2 * M_PI)));
  CHECK(log_predictive_density(head, f, Vector{{2.0}}) == doctest::Approx(-0.5 * std::log(2 * M_PI) - 2.0));
  CHECK(log_predictive_density(head, f, Vector{{2.0}}) == doctest::Approx(-2.9189).epsilon(1e-4));

  // Trapezoid quadrature of the density over y.
  Rng rng(3);
  VbllHead random = random_head(3, 1, rng);
  const Vector g = oracle::random_vector(3, rng);
  const Predictive p = predictive(random, g);
  const double sd = std::sqrt(p.variance(0));
  const int n = 20000;
  const double lo = p.mean(0) - 12 * sd;
  const double hi = p.mean(0) + 12 * sd;
  const double h = (hi - lo) / n;
  double integral = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    integral += w * std::exp(log_predictive_density(random, g, Vector{{lo + i * h}}));
  }
  CHECK(integral * h == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("weight samples") {
  Rng rng(6);
  VbllHead head = random_head(3, 2, rng);
  Rng a(1);
  Rng b(1);
  const auto s1 = sample_head_weights(head, a);
  const auto s2 = sample_head_weights(head, b);
  CHECK(s1[0] == s2[0]);
  CHECK(s1[1] == s2[1]);
  CHECK(sample_gaussian(head.posteriors[0].mean, head.posteriors[0].precision_chol, Vector(Vector::Zero(3))) ==
        head.posteriors[0].mean);

  const int n = 100000;
  Matrix draws(3, n);
  Rng c(9);
  for (int i = 0; i < n; ++i) draws.col(i) = sample_head_weights(head, c)[0];
  const Vector mu = draws.rowwise().mean();
  const Matrix centered = draws.colwise() - mu;
  const Matrix cov = centered * centered.transpose() / (n - 1);
  const Matrix expect = head.posteriors[0].covariance();
  CHECK((cov - expect).cwiseAbs().maxCoeff() < 5e-2 * std::max(1.0, expect.cwiseAbs().maxCoeff()));
}

TEST_CASE("ELBO hand-evaluated example") {
  VbllHead head = make_prior_head(1, 1, LastLayerPrior{1.0}, unit_noise(1, 1.0, 0.0));
  const ElboResult r = elbo_loss(head, Matrix::Ones(1, 1), Matrix::Zero(1, 1), 1.0);
  // log N(0 | 0, 1) - 1/2 phi S phi / sigma2, KL = 0, noise prior = 0.
  CHECK(r.loss == doctest::Approx(0.5 * std::log(2 * M_PI) + 0.5));
  CHECK(r.loss == doctest::Approx(1.4189).epsilon(1e-4));
  CHECK(kl_to_prior(head.posteriors[0], head.prior) == 0.0);

  const CovarianceElboResult rc = elbo_loss(to_covariance_form(head), Matrix::Ones(1, 1), Matrix::Zero(1, 1), 1.0);
  CHECK(rc.loss == doctest::Approx(r.loss));

  CHECK_THROWS_AS(elbo_loss(head, Matrix::Ones(2, 1), Matrix::Zero(2, 1), 1.0), std::invalid_argument);
  head.noise.log_sigma2(0) = -1e6;
  CHECK_THROWS_AS(elbo_loss(head, Matrix::Ones(1, 1), Matrix::Ones(1, 1), 1.0), NonFiniteLoss);
}

TEST_CASE("ELBO matches a dense transcription in both parameterizations") {
  Rng rng(44);
  for (int trial = 0; trial < 10; ++trial) {
    const VbllHead head = random_head(4, 2, rng);
    const Matrix phi = oracle::random_matrix(5, 4, rng);
    const Matrix y = oracle::random_matrix(5, 2, rng);
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (const auto& p : head.posteriors) {
      means.push_back(p.mean);
      covs.push_back(p.covariance());
    }
    const double expect = dense_loss(means, covs, head.noise.log_sigma2, head.prior.scale, head.noise.wishart_scale,
                                     head.noise.dof, phi, y, 17.0);
    CHECK(elbo_loss(head, phi, y, 17.0).loss == doctest::Approx(expect).epsilon(1e-10));
    CHECK(elbo_loss(to_covariance_form(head), phi, y, 17.0).loss == doctest::Approx(expect).epsilon(1e-10));
  }
}

TEST_CASE("covariance form round trip") {
  Rng rng(5);
  const VbllHead head = random_head(6, 2, rng);
  const CovarianceHead cov = to_covariance_form(head);
  for (std::size_t k = 0; k < 2; ++k) {
    const Matrix c = cov.cov_chol[k];
    CHECK(oracle::rel_frobenius(Matrix(c * c.transpose()), head.posteriors[k].covariance()) < 1e-10);
  }
  const VbllHead back = from_covariance_form(cov);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(oracle::rel_frobenius(back.posteriors[k].precision_chol.matrix(), head.posteriors[k].precision_chol.matrix()) <
          1e-10);
  }
}

TEST_CASE("ELBO gradients match central finite differences") {
  Rng rng(71);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const VbllHead head = random_head(4, 2, rng);
    const Matrix phi = oracle::random_matrix(3, 4, rng);
    const Matrix y = oracle::random_matrix(3, 2, rng);
    const double total = 7.0;
    const ElboResult r = elbo_loss(head, phi, y, total);
    double worst = 0.0;

    for (std::size_t k = 0; k < 2; ++k) {
      for (Eigen::Index i = 0; i < 4; ++i) {
        const auto f = [&](double delta) {
          VbllHead p = head;
          Vector mean = p.posteriors[k].mean;
          mean(i) += delta;
          p.posteriors[k] = VariationalPosterior::from_mean(mean, p.posteriors[k].precision_chol);
          return elbo_loss(p, phi, y, total).loss;
        };
        worst = std::max(worst, oracle::rel_err(r.grad_mean[k](i), (f(h) - f(-h)) / (2 * h)));
      }
      for (Eigen::Index j = 0; j < 4; ++j) {
        for (Eigen::Index i = j; i < 4; ++i) {
          const auto f = [&](double delta) {
            VbllHead p = head;
            Matrix l = p.posteriors[k].precision_chol.matrix();
            l(i, j) += delta;
            p.posteriors[k] = VariationalPosterior::from_mean(p.posteriors[k].mean, LowerTriangular(l));
            return elbo_loss(p, phi, y, total).loss;
          };
          worst = std::max(worst, oracle::rel_err(r.grad_precision_chol[k](i, j), (f(h) - f(-h)) / (2 * h)));
        }
      }
      const auto fs = [&](double delta) {
        VbllHead p = head;
        p.noise.log_sigma2(static_cast<Eigen::Index>(k)) += delta;
        return elbo_loss(p, phi, y, total).loss;
      };
      worst = std::max(worst, oracle::rel_err(r.grad_log_sigma2(static_cast<Eigen::Index>(k)), (fs(h) - fs(-h)) / (2 * h)));
    }
    for (Eigen::Index b = 0; b < phi.rows(); ++b) {
      for (Eigen::Index j = 0; j < phi.cols(); ++j) {
        Matrix pp = phi;
        Matrix pm = phi;
        pp(b, j) += h;
        pm(b, j) -= h;
        const double fd = (elbo_loss(head, pp, y, total).loss - elbo_loss(head, pm, y, total).loss) / (2 * h);
        worst = std::max(worst, oracle::rel_err(r.grad_features(b, j), fd));
      }
    }
    CHECK(worst <= 1e-4);

    // Covariance-factor gradients.
    const CovarianceHead cov = to_covariance_form(head);
    const CovarianceElboResult rc = elbo_loss(cov, phi, y, total);
    double worst_c = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      for (Eigen::Index j = 0; j < 4; ++j) {
        for (Eigen::Index i = j; i < 4; ++i) {
          const auto f = [&](double delta) {
            CovarianceHead p = cov;
            p.cov_chol[k](i, j) += delta;
            return elbo_loss(p, phi, y, total).loss;
          };
          worst_c = std::max(worst_c, oracle::rel_err(rc.grad_cov_chol[k](i, j), (f(h) - f(-h)) / (2 * h)));
        }
      }
    }
    CHECK(worst_c <= 1e-4);
    CHECK((rc.grad_features - r.grad_features).norm() < 1e-8 * std::max(1.0, r.grad_features.norm()));
    CHECK((rc.grad_mean[0] - r.grad_mean[0]).norm() < 1e-8 * std::max(1.0, r.grad_mean[0].norm()));
  }
}

TEST_CASE("the exact posterior beats perturbed variational parameters") {
  Rng rng(90);
  const Matrix phi = oracle::random_matrix(20, 4, rng);
  const Matrix y = oracle::random_matrix(20, 1, rng);
  const NoiseModel noise = unit_noise(1, 0.25);
  const VbllHead exact = fit_last_layer_exact(phi, y, LastLayerPrior{1.0}, noise);
  const double best = elbo_loss(exact, phi, y, 20.0).loss;
  for (int trial = 0; trial < 20; ++trial) {
    VbllHead p = exact;
    const Vector mean = p.posteriors[0].mean + 0.01 * oracle::random_vector(4, rng);
    Matrix l = p.posteriors[0].precision_chol.matrix();
    l.diagonal() *= 1.0 + 0.01 * std::abs(oracle::random_vector(1, rng)(0));
    p.posteriors[0] = VariationalPosterior::from_mean(mean, LowerTriangular(l));
    CHECK(elbo_loss(p, phi, y, 20.0).loss > best);
  }
}
