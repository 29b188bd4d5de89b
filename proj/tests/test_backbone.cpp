#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "vbllbo/backbone.hpp"

using namespace vbllbo;

namespace {

// sum_b <features_b, weights_b> as a function of one flattened parameter array.
double contraction(const BackboneNet& net, const Matrix& x, const Matrix& w) {
  return forward_batch(net, x).cwiseProduct(w).sum();
}

}  // namespace

TEST_CASE("ELU definition") {
  CHECK(elu(1.0) == 1.0);
  CHECK(elu(-1.0) == doctest::Approx(std::exp(-1.0) - 1.0));
  CHECK(elu(-1.0) == doctest::Approx(-0.63212).epsilon(1e-5));
  CHECK(elu(0.0) == 0.0);
}

TEST_CASE("initialization shapes and seeding") {
  const BackboneNet a = init_backbone({2, 128, 128, 128}, 7);
  REQUIRE(a.num_layers() == 3);
  CHECK(a.weights[0].rows() == 128);
  CHECK(a.weights[0].cols() == 2);
  CHECK(a.weights[1].rows() == 128);
  CHECK(a.weights[1].cols() == 128);
  CHECK(a.weights[2].rows() == 128);
  CHECK(a.biases[2].size() == 128);
  CHECK(a.feature_dim() == 128);
  CHECK(a.num_parameters() == 2 * 128 + 128 + 2 * (128 * 128 + 128));

  const BackboneNet same = init_backbone({2, 128, 128, 128}, 7);
  const BackboneNet other = init_backbone({2, 128, 128, 128}, 8);
  for (std::size_t l = 0; l < 3; ++l) CHECK(a.weights[l] == same.weights[l]);
  CHECK(a.weights[0] != other.weights[0]);

  const double bound = 1.0 / std::sqrt(128.0);
  CHECK(a.weights[1].cwiseAbs().maxCoeff() <= bound);
  CHECK(a.biases[1].cwiseAbs().maxCoeff() <= bound);
}

TEST_CASE("forward pass") {
  BackboneNet net = init_backbone({3, 4, 2}, 1);
  for (auto& w : net.weights) w.setZero();
  net.biases[1] = Vector{{0.5, -1.0}};
  const Vector f = forward(net, Vector{{0.2, 0.3, 0.4}});
  CHECK(f(0) == doctest::Approx(0.5));
  CHECK(f(1) == doctest::Approx(std::exp(-1.0) - 1.0));

  const BackboneNet big = init_backbone({5, 64, 64, 32}, 3);
  Rng rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix x(1000, 5);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = u(rng);
  const Matrix feats = forward_batch(big, x);
  CHECK(feats.rows() == 1000);
  CHECK(feats.allFinite());
  CHECK((feats.row(17).transpose() - forward(big, x.row(17).transpose())).norm() < 1e-14);
}

TEST_CASE("backward pass simple cases") {
  const BackboneNet net = init_backbone({3, 4, 4, 2}, 9);
  ForwardTape tape;
  forward(net, Vector{{0.1, 0.2, 0.3}}, &tape);
  const GradientSet zero = backward(net, tape, Vector(Vector::Zero(2)));
  CHECK(zero.squared_norm() == 0.0);

  // One layer with a positive pre-activation: d(w . x)/dw = x.
  BackboneNet lin;
  lin.layer_dims = {3, 1};
  lin.weights = {Matrix{{0.5, 0.5, 0.5}}};
  lin.biases = {Vector{{1.0}}};
  const Vector x{{0.2, 0.4, 0.6}};
  ForwardTape t;
  forward(lin, x, &t);
  const GradientSet g = backward(lin, t, Vector{{1.0}});
  CHECK((g.weights[0].row(0).transpose() - x).norm() < 1e-15);
  CHECK(g.biases[0](0) == 1.0);
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(31);
  std::uniform_int_distribution<int> d_dist(1, 5);
  std::uniform_int_distribution<int> w_dist(1, 8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<int> dims = {d_dist(rng), w_dist(rng), w_dist(rng), w_dist(rng)};
    BackboneNet net = init_backbone(dims, rng());
    Matrix x(4, dims[0]);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = u(rng);
    const Matrix w = oracle::random_matrix(4, dims.back(), rng);
    ForwardTape tape;
    forward_batch(net, x, &tape);
    const GradientSet g = backward(net, tape, w);

    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      for (Eigen::Index i = 0; i < net.weights[l].size(); ++i) {
        const double keep = net.weights[l](i);
        net.weights[l](i) = keep + h;
        const double fp = contraction(net, x, w);
        net.weights[l](i) = keep - h;
        const double fm = contraction(net, x, w);
        net.weights[l](i) = keep;
        worst = std::max(worst, oracle::rel_err(g.weights[l](i), (fp - fm) / (2 * h)));
      }
      for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) {
        const double keep = net.biases[l](i);
        net.biases[l](i) = keep + h;
        const double fp = contraction(net, x, w);
        net.biases[l](i) = keep - h;
        const double fm = contraction(net, x, w);
        net.biases[l](i) = keep;
        worst = std::max(worst, oracle::rel_err(g.biases[l](i), (fp - fm) / (2 * h)));
      }
    }
    CHECK(worst <= 1e-4);

    const Matrix gx = backward_input(net, tape, w);
    for (Eigen::Index b = 0; b < x.rows(); ++b) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        Matrix xp = x;
        Matrix xm = x;
        xp(b, j) += h;
        xm(b, j) -= h;
        const double fd = (contraction(net, xp, w) - contraction(net, xm, w)) / (2 * h);
        CHECK(oracle::rel_err(gx(b, j), fd) <= 1e-4);
      }
    }
  }
}

TEST_CASE("gradient clipping") {
  GradientSet g;
  g.weights = {Matrix{{0.3, 0.4}}};
  g.biases = {Vector::Zero(1)};
  const GradientSet same = clip_gradients(g, 1.0);
  CHECK(same.weights[0] == g.weights[0]);

  GradientSet single;
  single.weights = {Matrix{{2.0}}};
  single.biases = {Vector::Zero(1)};
  CHECK(clip_gradients(single, 1.0).weights[0](0, 0) == doctest::Approx(1.0));

  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    GradientSet r;
    r.weights = {oracle::random_matrix(5, 3, rng), oracle::random_matrix(2, 5, rng)};
    r.biases = {oracle::random_vector(5, rng), oracle::random_vector(2, rng)};
    const double max_norm = 0.5 + 0.2 * trial;
    const double before = std::sqrt(r.squared_norm());
    const GradientSet c = clip_gradients(r, max_norm);
    CHECK(std::abs(std::sqrt(c.squared_norm()) - std::min(before, max_norm)) <= 1e-12);
    for (std::size_t l = 0; l < 2; ++l) {
      CHECK((c.weights[l].cwiseAbs().array() <= r.weights[l].cwiseAbs().array()).all());
    }
  }
}

TEST_CASE("AdamW step") {
  const AdamWConfig cfg;  // lr 1e-3, weight decay 1e-4
  std::vector<double> theta = {1.0, -2.0};
  std::vector<double> zero = {0.0, 0.0};
  std::vector<std::span<double>> p = {std::span<double>(theta)};
  std::vector<std::span<const double>> g = {std::span<const double>(zero)};

  AdamW no_decay(cfg, {2}, {false});
  no_decay.step(p, g);
  CHECK(theta[0] == 1.0);
  CHECK(theta[1] == -2.0);

  AdamW decay(cfg, {2}, {true});
  decay.step(p, g);
  CHECK(theta[0] == doctest::Approx(1.0 * (1.0 - 1e-3 * 1e-4)).epsilon(1e-15));
  CHECK(theta[1] == doctest::Approx(-2.0 * (1.0 - 1e-3 * 1e-4)).epsilon(1e-15));

  // f = theta^2 / 2 from theta = 1: the first bias-corrected step is lr * sign(g).
  std::vector<double> x = {1.0};
  std::vector<double> grad = {1.0};
  std::vector<std::span<double>> px = {std::span<double>(x)};
  std::vector<std::span<const double>> gx = {std::span<const double>(grad)};
  AdamW opt(AdamWConfig{.weight_decay = 0.0}, {1}, {true});
  opt.step(px, gx);
  CHECK(x[0] < 1.0);
  CHECK(x[0] == doctest::Approx(1.0 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("identical seeds give bitwise-identical training trajectories") {
  const auto run = [](std::uint64_t seed) {
    BackboneNet net = init_backbone({2, 6, 3}, seed);
    AdamW opt(AdamWConfig{}, parameter_sizes(net), std::vector<bool>(2 * net.num_layers(), true));
    Rng rng(seed);
    for (int step = 0; step < 25; ++step) {
      const Matrix x = oracle::random_matrix(4, 2, rng);
      ForwardTape tape;
      const Matrix f = forward_batch(net, x, &tape);
      GradientSet grad = clip_gradients(backward(net, tape, Matrix(f)), 1.0);
      auto params = parameter_views(net);
      auto grads = gradient_views(grad);
      opt.step(params, grads);
    }
    return net;
  };
  const BackboneNet a = run(12);
  const BackboneNet b = run(12);
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    CHECK(a.weights[l] == b.weights[l]);
    CHECK(a.biases[l] == b.biases[l]);
  }
}
