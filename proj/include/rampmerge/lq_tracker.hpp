#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "rampmerge/state_space.hpp"
#include "rampmerge/vehicle_model.hpp"

namespace rampmerge {

/// Scalar weights per lane; expanded into the output-weight diagonal by
/// make_weights. Gap rows take the weight of the following vehicle's lane.
struct WeightConfig {
  double gap_weight_mainline = 1.0;
  double gap_weight_ramp = 2.0;
  double speed_weight_mainline = 0.5;
  double speed_weight_ramp = 1.0;
  double input_weight = 1.0;
  double terminal_scale = 10.0;  // Q_N = terminal_scale * Q

  void validate() const;
};

struct TrackerWeights {
  Eigen::MatrixXd Q;           // (2n-1) x (2n-1), symmetric PSD
  Eigen::MatrixXd R;           // n x n, symmetric PD
  Eigen::MatrixXd Q_terminal;  // (2n-1) x (2n-1), symmetric PSD

  /// Throws std::invalid_argument on shape or definiteness violations.
  void validate(const LtiModel& model) const;
  TrackerWeights scaled(double alpha) const;
};

TrackerWeights make_weights(const std::vector<Lane>& lanes, const WeightConfig& config);

/// Output-space references r_0..r_N (gaps in m, then speeds in m/s).
struct ReferenceTrajectory {
  std::vector<Eigen::VectorXd> r;

  static ReferenceTrajectory constant(const Eigen::VectorXd& value, int horizon);
  int horizon() const { return static_cast<int>(r.size()) - 1; }
  /// Repeats the final reference until the trajectory spans `horizon` steps.
  ReferenceTrajectory extended(int horizon) const;
};

/// Backward-recursion products for a finite horizon N. Index i runs 0..N-1
/// for the gains and 0..N for S and V.
struct LqSolution {
  std::vector<Eigen::MatrixXd> K;   // n x 2n feedback
  std::vector<Eigen::MatrixXd> Ky;  // n x 2n feed-forward
  std::vector<Eigen::MatrixXd> S;   // 2n x 2n
  std::vector<Eigen::VectorXd> V;   // 2n
  std::optional<Eigen::MatrixXd> converged_K;
  std::optional<Eigen::MatrixXd> converged_Ky;

  int horizon() const { return static_cast<int>(K.size()); }
  /// u_i = -K_i x + Ky_i V_{i+1}
  Eigen::VectorXd control(int i, const Eigen::VectorXd& x) const;
};

LqSolution solve_finite_horizon(const LtiModel& model, const TrackerWeights& weights,
                                const ReferenceTrajectory& ref, int horizon);

struct Rollout {
  std::vector<Eigen::VectorXd> states;      // N+1
  std::vector<Eigen::VectorXd> inputs;      // N, as applied (clipped)
  std::vector<Eigen::VectorXd> raw_inputs;  // N, before clipping
  std::vector<Eigen::VectorXd> outputs;     // N+1
  int clipped_steps = 0;

  int steps() const { return static_cast<int>(inputs.size()); }
};

/// Closed-loop simulation under the time-varying gains of `solution`. When
/// `limits` is given, inputs are clipped to [acc_min, acc_max] and every
/// clipped step is counted.
Rollout rollout(const LtiModel& model, const LqSolution& solution, const Eigen::VectorXd& x0,
                const std::optional<ControlLimits>& limits = std::nullopt);

/// Minimum net-gap requirement between sequence neighbours `leader` and
/// `leader + 1`.
struct GapRequirement {
  int leader = 0;
  double gap_min = 0.0;
  bool cross_lane = false;
};

struct ConstraintOptions {
  double merge_zone_entry = 0.0;
  double activation_margin = 50.0;
};

struct Violation {
  enum class Kind { Gap, InputBound } kind = Kind::Gap;
  int step = 0;
  int index = 0;       // leader index for gaps, vehicle index for inputs
  double value = 0.0;  // observed gap or input
  double bound = 0.0;
};

struct ViolationReport {
  std::vector<Violation> violations;

  bool empty() const { return violations.empty(); }
  std::size_t size() const { return violations.size(); }
  std::size_t count(Violation::Kind kind) const;
  /// Sum of |value - bound| over all violations.
  double magnitude() const;
};

ViolationReport check_constraints(const Rollout& trajectory, const ControlLimits& limits,
                                  const std::vector<GapRequirement>& gaps,
                                  const ConstraintOptions& options = {});

struct RepairOptions {
  double growth_factor = 1.5;
  int max_horizon = 1200;
  ConstraintOptions constraints;
};

struct RepairedSolution {
  LqSolution solution;
  Rollout trajectory;
  ViolationReport violations;
  int horizon_used = 0;
  int attempts = 0;
  bool degraded = false;
};

/// Solve, roll out with clipping and check; while violations remain, enlarge
/// the horizon by `growth_factor` and re-solve with an extended reference.
RepairedSolution solve_with_repair(const LtiModel& model, const TrackerWeights& weights,
                                   const ReferenceTrajectory& ref, int horizon,
                                   const ControlLimits& limits,
                                   const std::vector<GapRequirement>& gaps,
                                   const Eigen::VectorXd& x0, const RepairOptions& options = {});

struct ConvergedGains {
  Eigen::MatrixXd K;
  Eigen::MatrixXd Ky;
  Eigen::MatrixXd S;
  int iterations = 0;
  double residual = 0.0;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Iterates the backward recursion until successive gains differ by at most
/// `tolerance` in the infinity norm. Throws ConvergenceError otherwise.
ConvergedGains converged_gains(const LtiModel& model, const TrackerWeights& weights,
                               double tolerance = 1e-10, int max_iterations = 10000);

/// Steady feed-forward state for a constant reference under converged gains:
/// the fixed point of V = (A - B K)^T V + C^T Q r, started from C^T Q_N r.
Eigen::VectorXd steady_feedforward(const LtiModel& model, const TrackerWeights& weights,
                                   const ConvergedGains& gains, const Eigen::VectorXd& reference,
                                   double tolerance = 1e-9, int max_iterations = 100000);

/// Receding-horizon controller with constant gains: u = -K x + Ky V.
struct SteadyTracker {
  Eigen::MatrixXd K;
  Eigen::MatrixXd Ky;
  Eigen::VectorXd V;

  Eigen::VectorXd control(const Eigen::VectorXd& x) const { return -K * x + Ky * V; }
};

SteadyTracker make_steady_tracker(const LtiModel& model, const TrackerWeights& weights,
                                  const Eigen::VectorXd& reference);

/// First-step gains of a finite-horizon solution, used as a constant tracker.
SteadyTracker first_step_tracker(const LqSolution& solution);

}  // namespace rampmerge
