#pragma once

#include <random>

#include <Eigen/Dense>

namespace vbllbo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Every stochastic component takes one of these by reference; seeding it is
// the only source of run-to-run variation.
using Rng = std::mt19937_64;

}  // namespace vbllbo
