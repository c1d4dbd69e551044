#include <doctest.h>

#include <random>

#include "rampmerge/state_space.hpp"

using namespace rampmerge;

TEST_CASE("continuous and output structure of the two-vehicle string") {
  auto [Ac, Bc] = continuous_matrices(2);
  Eigen::MatrixXd expected_A = Eigen::MatrixXd::Zero(4, 4);
  expected_A(0, 2) = 1.0;
  expected_A(1, 3) = 1.0;
  CHECK(Ac.isApprox(expected_A));
  CHECK(Bc.bottomRows(2).isIdentity());
  const LtiModel m = build_model({1, 2}, 0.1);
  Eigen::MatrixXd C(3, 4);
  C << 1, -1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1;
  CHECK(m.C == C);
}

TEST_CASE("single vehicle zero-order hold at dt = 0.1") {
  const LtiModel m = build_model({7}, 0.1);
  Eigen::Matrix2d A;
  A << 1, 0.1, 0, 1;
  Eigen::Vector2d B(0.005, 0.1);
  CHECK(m.A.isApprox(A));
  CHECK(m.B.isApprox(B));
  CHECK(m.C.rows() == 1);
}

TEST_CASE("three vehicles give a 5 x 6 output map") {
  const LtiModel m = build_model({1, 2, 3}, 0.1);
  CHECK(m.C.rows() == 5);
  CHECK(m.C.cols() == 6);
}

TEST_CASE("step applies the discrete dynamics") {
  const LtiModel m = build_model({1}, 0.1);
  Eigen::Vector2d x(0.0, 10.0);
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(1);
  Eigen::VectorXd u2 = Eigen::VectorXd::Constant(1, 2.0);
  CHECK(step(m, x, u0).isApprox(Eigen::Vector2d(1.0, 10.0)));
  CHECK(step(m, x, u2).isApprox(Eigen::Vector2d(1.01, 10.2)));
  CHECK_THROWS_AS(step(m, Eigen::VectorXd::Zero(3), u0), std::invalid_argument);
}

TEST_CASE("zero input keeps speeds constant and positions affine") {
  const LtiModel m = build_model({1, 2, 3}, 0.1);
  Eigen::VectorXd x(6);
  x << 0, -30, -70, 30, 28, 31;
  const Eigen::VectorXd x0 = x;
  for (int k = 1; k <= 50; ++k) {
    x = step(m, x, Eigen::VectorXd::Zero(3));
    CHECK(x.tail(3).isApprox(x0.tail(3)));
    CHECK(x.head(3).isApprox(x0.head(3) + k * 0.1 * x0.tail(3), 1e-12));
  }
}

TEST_CASE("observe reads consecutive gaps then speeds") {
  const LtiModel m2 = build_model({1, 2}, 0.1);
  Eigen::Vector4d x(100, 60, 30, 28);
  CHECK(observe(m2, x).isApprox(Eigen::Vector3d(40, 30, 28)));
  Eigen::Vector4d same(50, 50, 1, 2);
  CHECK(observe(m2, same)(0) == 0.0);
  const LtiModel m1 = build_model({1}, 0.1);
  CHECK(observe(m1, Eigen::Vector2d(5, 12)).size() == 1);
  CHECK(observe(m1, Eigen::Vector2d(5, 12))(0) == 12.0);
}

TEST_CASE("discrete model matches the sampled continuous solution") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> ud(-3.0, 3.0);
  const double dt = 0.1;
  const LtiModel m = build_model({1, 2}, dt);
  Eigen::VectorXd x(4);
  x << 10, 0, 20, 25;
  // Continuous solution under piecewise-constant input, integrated piecewise
  // in closed form with independent bookkeeping.
  double p1 = 10, p2 = 0, v1 = 20, v2 = 25;
  for (int k = 0; k < 200; ++k) {
    Eigen::Vector2d u(ud(rng), ud(rng));
    x = step(m, x, u);
    p1 += v1 * dt + 0.5 * u(0) * dt * dt;
    v1 += u(0) * dt;
    p2 += v2 * dt + 0.5 * u(1) * dt * dt;
    v2 += u(1) * dt;
  }
  CHECK(x(0) == doctest::Approx(p1).epsilon(1e-12));
  CHECK(x(1) == doctest::Approx(p2).epsilon(1e-12));
  CHECK(x(2) == doctest::Approx(v1).epsilon(1e-12));
  CHECK(x(3) == doctest::Approx(v2).epsilon(1e-12));
}

TEST_CASE("build_model preconditions") {
  CHECK_THROWS_AS(build_model({}, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(build_model({1}, 0.0), std::invalid_argument);
}
