#pragma once

#include <vector>

#include <Eigen/Dense>

#include "rampmerge/vehicle_model.hpp"

namespace rampmerge {

/// Discrete double-integrator string for n vehicles in merge order.
///
/// State x = (p_1..p_n, v_1..v_n), input u = (a_1..a_n), output
/// y = (p_1 - p_2, ..., p_{n-1} - p_n, v_1..v_n). A and B are the exact
/// zero-order-hold discretization at step dt.
struct LtiModel {
  int n = 0;
  double dt = 0.0;
  Eigen::MatrixXd A;  // 2n x 2n
  Eigen::MatrixXd B;  // 2n x n
  Eigen::MatrixXd C;  // (2n-1) x 2n
  std::vector<VehicleId> ordering;

  int state_dim() const { return 2 * n; }
  int input_dim() const { return n; }
  int output_dim() const { return 2 * n - 1; }
};

/// Continuous-time (A, B) of the same string, for reference and tests.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> continuous_matrices(int n);

LtiModel build_model(const std::vector<VehicleId>& sequence, double dt);

Eigen::VectorXd step(const LtiModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& u);

Eigen::VectorXd observe(const LtiModel& model, const Eigen::VectorXd& x);

}  // namespace rampmerge
