#include "rampmerge/lq_tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace rampmerge {

void WeightConfig::validate() const {
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string("weights.") + name + " must be >= 0");
    }
  };
  non_negative(gap_weight_mainline, "gap_weight_mainline");
  non_negative(gap_weight_ramp, "gap_weight_ramp");
  non_negative(speed_weight_mainline, "speed_weight_mainline");
  non_negative(speed_weight_ramp, "speed_weight_ramp");
  non_negative(terminal_scale, "terminal_scale");
  if (!(input_weight > 0.0)) throw std::invalid_argument("weights.input_weight must be > 0");
}

namespace {

void require_symmetric(const Eigen::MatrixXd& M, const char* name) {
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, M.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument(std::string(name) + " must be symmetric");
  }
}

void require_psd(const Eigen::MatrixXd& M, const char* name) {
  require_symmetric(M, name);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument(std::string(name) + " must be positive semidefinite");
  }
}

}  // namespace

void TrackerWeights::validate(const LtiModel& model) const {
  const int ny = model.output_dim();
  const int nu = model.input_dim();
  if (Q.rows() != ny || Q.cols() != ny) throw std::invalid_argument("Q has wrong shape");
  if (Q_terminal.rows() != ny || Q_terminal.cols() != ny) {
    throw std::invalid_argument("Q_terminal has wrong shape");
  }
  if (R.rows() != nu || R.cols() != nu) throw std::invalid_argument("R has wrong shape");
  require_psd(Q, "Q");
  require_psd(Q_terminal, "Q_terminal");
  require_symmetric(R, "R");
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("R must be positive definite");
}

TrackerWeights TrackerWeights::scaled(double alpha) const {
  return {alpha * Q, alpha * R, alpha * Q_terminal};
}

TrackerWeights make_weights(const std::vector<Lane>& lanes, const WeightConfig& config) {
  config.validate();
  const int n = static_cast<int>(lanes.size());
  if (n == 0) throw std::invalid_argument("make_weights: no vehicles");
  Eigen::VectorXd diag(2 * n - 1);
  for (int i = 0; i + 1 < n; ++i) {
    diag(i) = lanes[i + 1] == Lane::Ramp ? config.gap_weight_ramp : config.gap_weight_mainline;
  }
  for (int i = 0; i < n; ++i) {
    diag(n - 1 + i) =
        lanes[i] == Lane::Ramp ? config.speed_weight_ramp : config.speed_weight_mainline;
  }
  TrackerWeights w;
  w.Q = diag.asDiagonal();
  w.Q_terminal = config.terminal_scale * w.Q;
  w.R = config.input_weight * Eigen::MatrixXd::Identity(n, n);
  return w;
}

ReferenceTrajectory ReferenceTrajectory::constant(const Eigen::VectorXd& value, int horizon) {
  if (horizon < 0) throw std::invalid_argument("reference horizon must be >= 0");
  return {std::vector<Eigen::VectorXd>(static_cast<std::size_t>(horizon) + 1, value)};
}

ReferenceTrajectory ReferenceTrajectory::extended(int new_horizon) const {
  if (r.empty()) throw std::invalid_argument("cannot extend an empty reference");
  ReferenceTrajectory out = *this;
  out.r.resize(static_cast<std::size_t>(std::max(new_horizon, horizon())) + 1, r.back());
  return out;
}

Eigen::VectorXd LqSolution::control(int i, const Eigen::VectorXd& x) const {
  return -K[i] * x + Ky[i] * V[i + 1];
}

namespace {

// One backward step of the Riccati recursion. Writes the gains for stage i
// and returns S_i; V is handled by the caller.
struct RiccatiStep {
  Eigen::MatrixXd K;
  Eigen::MatrixXd Ky;
  Eigen::MatrixXd S;
};

RiccatiStep riccati_step(const LtiModel& m, const Eigen::MatrixXd& CtQC, const Eigen::MatrixXd& R,
                         const Eigen::MatrixXd& S_next) {
  const Eigen::MatrixXd BtS = m.B.transpose() * S_next;
  const Eigen::MatrixXd G = R + BtS * m.B;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(G);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw std::runtime_error("Riccati step: R + B'SB is not positive definite");
  }
  const Eigen::MatrixXd BtSA = BtS * m.A;
  RiccatiStep out;
  out.K = ldlt.solve(BtSA);
  out.Ky = ldlt.solve(m.B.transpose());
  Eigen::MatrixXd S = CtQC + m.A.transpose() * S_next * m.A - BtSA.transpose() * out.K;
  out.S = 0.5 * (S + S.transpose());
  return out;
}

}  // namespace

LqSolution solve_finite_horizon(const LtiModel& model, const TrackerWeights& weights,
                                const ReferenceTrajectory& ref, int horizon) {
  if (horizon < 1) throw std::invalid_argument("solve_finite_horizon: horizon must be >= 1");
  weights.validate(model);
  if (ref.horizon() < horizon) {
    throw std::invalid_argument("reference shorter than horizon");
  }
  for (int k = 0; k <= horizon; ++k) {
    if (ref.r[k].size() != model.output_dim()) {
      throw std::invalid_argument("reference entry has wrong dimension");
    }
  }

  const Eigen::MatrixXd Ct = model.C.transpose();
  const Eigen::MatrixXd CtQ = Ct * weights.Q;
  const Eigen::MatrixXd CtQC = CtQ * model.C;
  const Eigen::MatrixXd CtQN = Ct * weights.Q_terminal;

  LqSolution sol;
  const auto N = static_cast<std::size_t>(horizon);
  sol.K.resize(N);
  sol.Ky.resize(N);
  sol.S.resize(N + 1);
  sol.V.resize(N + 1);

  sol.S[N] = CtQN * model.C;
  sol.V[N] = CtQN * ref.r[N];
  // Once S stops changing to rounding level the remaining stages reuse the
  // same gains and only the feed-forward recursion has to run.
  bool frozen = false;
  Eigen::MatrixXd closed_t;
  for (int i = horizon - 1; i >= 0; --i) {
    if (frozen) {
      sol.K[i] = sol.K[i + 1];
      sol.Ky[i] = sol.Ky[i + 1];
      sol.S[i] = sol.S[i + 1];
    } else {
      RiccatiStep st = riccati_step(model, CtQC, weights.R, sol.S[i + 1]);
      const double change = (st.S - sol.S[i + 1]).cwiseAbs().maxCoeff();
      frozen = change <= 1e-14 * std::max(1.0, st.S.cwiseAbs().maxCoeff());
      closed_t = (model.A - model.B * st.K).transpose();
      sol.K[i] = std::move(st.K);
      sol.Ky[i] = std::move(st.Ky);
      sol.S[i] = std::move(st.S);
      if (frozen) {
        sol.converged_K = sol.K[i];
        sol.converged_Ky = sol.Ky[i];
      }
    }
    sol.V[i] = closed_t * sol.V[i + 1] + CtQ * ref.r[i];
  }
  return sol;
}

namespace {

// Trailing `horizon` stages of a longer solution. For a time-invariant model
// and a constant reference these equal the solution at that horizon.
LqSolution tail(const LqSolution& full, int horizon) {
  const auto off = static_cast<std::ptrdiff_t>(full.horizon() - horizon);
  LqSolution out;
  out.K.assign(full.K.begin() + off, full.K.end());
  out.Ky.assign(full.Ky.begin() + off, full.Ky.end());
  out.S.assign(full.S.begin() + off, full.S.end());
  out.V.assign(full.V.begin() + off, full.V.end());
  out.converged_K = full.converged_K;
  out.converged_Ky = full.converged_Ky;
  return out;
}

bool is_constant(const ReferenceTrajectory& ref) {
  return std::all_of(ref.r.begin(), ref.r.end(),
                     [&](const Eigen::VectorXd& v) { return v == ref.r.front(); });
}

}  // namespace

Rollout rollout(const LtiModel& model, const LqSolution& solution, const Eigen::VectorXd& x0,
                const std::optional<ControlLimits>& limits) {
  if (x0.size() != model.state_dim()) throw std::invalid_argument("rollout: x0 has wrong dimension");
  const int N = solution.horizon();
  Rollout out;
  out.states.reserve(N + 1);
  out.inputs.reserve(N);
  out.raw_inputs.reserve(N);
  out.outputs.reserve(N + 1);

  Eigen::VectorXd x = x0;
  out.states.push_back(x);
  out.outputs.push_back(model.C * x);
  for (int i = 0; i < N; ++i) {
    Eigen::VectorXd raw = solution.control(i, x);
    Eigen::VectorXd u = raw;
    if (limits) {
      u = raw.cwiseMax(limits->acc_min).cwiseMin(limits->acc_max);
      if ((u - raw).cwiseAbs().maxCoeff() > 0.0) ++out.clipped_steps;
    }
    x = model.A * x + model.B * u;
    out.raw_inputs.push_back(std::move(raw));
    out.inputs.push_back(std::move(u));
    out.states.push_back(x);
    out.outputs.push_back(model.C * x);
  }
  return out;
}

std::size_t ViolationReport::count(Violation::Kind kind) const {
  return static_cast<std::size_t>(std::count_if(violations.begin(), violations.end(),
                                                [kind](const Violation& v) { return v.kind == kind; }));
}

double ViolationReport::magnitude() const {
  double total = 0.0;
  for (const auto& v : violations) total += std::abs(v.value - v.bound);
  return total;
}

ViolationReport check_constraints(const Rollout& trajectory, const ControlLimits& limits,
                                  const std::vector<GapRequirement>& gaps,
                                  const ConstraintOptions& options) {
  ViolationReport report;
  if (trajectory.states.empty()) return report;
  const int n = static_cast<int>(trajectory.states.front().size() / 2);
  constexpr double kTol = 1e-9;

  for (int k = 0; k < static_cast<int>(trajectory.states.size()); ++k) {
    const Eigen::VectorXd& x = trajectory.states[k];
    for (const auto& g : gaps) {
      if (g.leader < 0 || g.leader + 1 >= n) {
        throw std::invalid_argument("gap requirement index out of range");
      }
      const double follower_pos = x(g.leader + 1);
      if (g.cross_lane &&
          follower_pos < options.merge_zone_entry - options.activation_margin) {
        continue;
      }
      const double gap = net_gap(x(g.leader), follower_pos);
      if (gap < g.gap_min - kTol) {
        report.violations.push_back({Violation::Kind::Gap, k, g.leader, gap, g.gap_min});
      }
    }
  }
  for (int k = 0; k < trajectory.steps(); ++k) {
    const Eigen::VectorXd& u = trajectory.inputs[k];
    for (int j = 0; j < u.size(); ++j) {
      if (u(j) > limits.acc_max + kTol) {
        report.violations.push_back({Violation::Kind::InputBound, k, j, u(j), limits.acc_max});
      } else if (u(j) < limits.acc_min - kTol) {
        report.violations.push_back({Violation::Kind::InputBound, k, j, u(j), limits.acc_min});
      }
    }
  }
  return report;
}

RepairedSolution solve_with_repair(const LtiModel& model, const TrackerWeights& weights,
                                   const ReferenceTrajectory& ref, int horizon,
                                   const ControlLimits& limits,
                                   const std::vector<GapRequirement>& gaps,
                                   const Eigen::VectorXd& x0, const RepairOptions& options) {
  if (horizon < 1) throw std::invalid_argument("solve_with_repair: horizon must be >= 1");
  if (!(options.growth_factor > 1.0)) {
    throw std::invalid_argument("solve_with_repair: growth_factor must be > 1");
  }
  const int max_horizon = std::max(horizon, options.max_horizon);

  const bool sliceable = is_constant(ref);
  std::optional<LqSolution> longest;

  RepairedSolution best;
  int N = horizon;
  while (true) {
    RepairedSolution attempt;
    if (sliceable && longest) {
      attempt.solution = tail(*longest, N);
    } else {
      attempt.solution = solve_finite_horizon(model, weights, ref.extended(N), N);
    }
    attempt.trajectory = rollout(model, attempt.solution, x0, limits);
    attempt.violations = check_constraints(attempt.trajectory, limits, gaps, options.constraints);
    attempt.horizon_used = N;
    attempt.attempts = best.attempts + 1;
    best = std::move(attempt);
    if (best.violations.empty()) return best;
    if (N >= max_horizon) break;
    N = std::min(max_horizon, static_cast<int>(std::ceil(N * options.growth_factor)));
    if (sliceable && !longest) {
      longest = solve_finite_horizon(model, weights, ref.extended(max_horizon), max_horizon);
    }
  }
  best.degraded = true;
  return best;
}

ConvergedGains converged_gains(const LtiModel& model, const TrackerWeights& weights,
                               double tolerance, int max_iterations) {
  weights.validate(model);
  const Eigen::MatrixXd CtQC = model.C.transpose() * weights.Q * model.C;
  Eigen::MatrixXd S = model.C.transpose() * weights.Q_terminal * model.C;

  ConvergedGains out;
  RiccatiStep prev = riccati_step(model, CtQC, weights.R, S);
  S = prev.S;
  double residual = 0.0;
  for (int i = 1; i <= max_iterations; ++i) {
    RiccatiStep next = riccati_step(model, CtQC, weights.R, S);
    residual = (next.K - prev.K).cwiseAbs().rowwise().sum().maxCoeff();
    S = next.S;
    prev = std::move(next);
    if (residual <= tolerance) {
      out.K = prev.K;
      out.Ky = prev.Ky;
      out.S = S;
      out.iterations = i;
      out.residual = residual;
      return out;
    }
  }
  throw ConvergenceError("converged_gains: no convergence after " +
                             std::to_string(max_iterations) +
                             " iterations, residual " + std::to_string(residual),
                         residual);
}

Eigen::VectorXd steady_feedforward(const LtiModel& model, const TrackerWeights& weights,
                                   const ConvergedGains& gains, const Eigen::VectorXd& reference,
                                   double tolerance, int max_iterations) {
  if (reference.size() != model.output_dim()) {
    throw std::invalid_argument("steady_feedforward: reference has wrong dimension");
  }
  const Eigen::MatrixXd closed_t = (model.A - model.B * gains.K).transpose();
  const Eigen::VectorXd forcing = model.C.transpose() * weights.Q * reference;
  Eigen::VectorXd V = model.C.transpose() * weights.Q_terminal * reference;
  const double scale = std::max(1.0, forcing.cwiseAbs().maxCoeff());
  for (int i = 0; i < max_iterations; ++i) {
    Eigen::VectorXd next = closed_t * V + forcing;
    const double delta = (next - V).cwiseAbs().maxCoeff();
    V = std::move(next);
    if (delta <= tolerance * scale) return V;
  }
  throw ConvergenceError("steady_feedforward: no convergence", 0.0);
}

SteadyTracker make_steady_tracker(const LtiModel& model, const TrackerWeights& weights,
                                  const Eigen::VectorXd& reference) {
  ConvergedGains g = converged_gains(model, weights);
  Eigen::VectorXd V = steady_feedforward(model, weights, g, reference);
  return {std::move(g.K), std::move(g.Ky), std::move(V)};
}

SteadyTracker first_step_tracker(const LqSolution& solution) {
  if (solution.horizon() < 1) throw std::invalid_argument("first_step_tracker: empty solution");
  return {solution.K[0], solution.Ky[0], solution.V[1]};
}

}  // namespace rampmerge
