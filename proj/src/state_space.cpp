#include "rampmerge/state_space.hpp"

#include <stdexcept>
#include <string>

namespace rampmerge {

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> continuous_matrices(int n) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(2 * n, n);
  A.topRightCorner(n, n).setIdentity();
  B.bottomRows(n).setIdentity();
  return {A, B};
}

LtiModel build_model(const std::vector<VehicleId>& sequence, double dt) {
  if (sequence.empty()) throw std::invalid_argument("build_model: empty sequence");
  if (!(dt > 0.0)) throw std::invalid_argument("build_model: dt must be > 0");

  const int n = static_cast<int>(sequence.size());
  LtiModel model;
  model.n = n;
  model.dt = dt;
  model.ordering = sequence;

  model.A = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  model.A.topRightCorner(n, n) = dt * Eigen::MatrixXd::Identity(n, n);

  model.B = Eigen::MatrixXd::Zero(2 * n, n);
  model.B.topRows(n) = 0.5 * dt * dt * Eigen::MatrixXd::Identity(n, n);
  model.B.bottomRows(n) = dt * Eigen::MatrixXd::Identity(n, n);

  model.C = Eigen::MatrixXd::Zero(2 * n - 1, 2 * n);
  for (int i = 0; i + 1 < n; ++i) {
    model.C(i, i) = 1.0;
    model.C(i, i + 1) = -1.0;
  }
  model.C.bottomRightCorner(n, n).setIdentity();
  return model;
}

namespace {
void require_dim(long got, long want, const char* what) {
  if (got != want) {
    throw std::invalid_argument(std::string(what) + " has dimension " + std::to_string(got) +
                                ", expected " + std::to_string(want));
  }
}
}  // namespace

Eigen::VectorXd step(const LtiModel& model, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  require_dim(x.size(), model.state_dim(), "state");
  require_dim(u.size(), model.input_dim(), "input");
  return model.A * x + model.B * u;
}

Eigen::VectorXd observe(const LtiModel& model, const Eigen::VectorXd& x) {
  require_dim(x.size(), model.state_dim(), "state");
  return model.C * x;
}

}  // namespace rampmerge
