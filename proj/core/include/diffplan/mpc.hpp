#pragma once

#include <vector>

#include <Eigen/Core>

#include "diffplan/error.hpp"
#include "diffplan/grid_planner.hpp"
#include "diffplan/scene.hpp"
#include "diffplan/vehicle.hpp"

namespace diffplan::datagen {

struct MpcConfig {
  int horizon = 20;     // N_p
  double ts = 0.05;     // prediction interval T_s
  double v_ref = 0.4;   // projection velocity
  Eigen::Matrix3d q1 = Eigen::Vector3d(40.0, 40.0, 4.0).asDiagonal();
  Eigen::Matrix3d q2 = Eigen::Vector3d(400.0, 400.0, 40.0).asDiagonal();
  Eigen::Matrix2d r1 = Eigen::Vector2d(10.0, 10.0).asDiagonal();
  Eigen::Matrix2d r2 = Eigen::Vector2d(1.0, 1.0).asDiagonal();
  double alpha = 0.5;
  /// Blend between tracking (0) and dynamic-obstacle avoidance (1).
  double gamma = 0.0;
  double grad_tol = 1e-6;
  int max_iterations = 200;
  double fd_step = 1e-6;
  /// Floor on the obstacle distance inside the avoidance penalty.
  double obstacle_floor = 1e-3;

  void validate() const;
};

/// s_k = s_{k-1} + dt v_ref with s_0 = s_cur, clamped to total_length.
std::vector<double> project_schedule(double s_cur, double v_ref, double dt, int horizon, double total_length);

struct MpcProblem {
  VehicleState state;
  /// Reference [x, y, phi] for predicted steps k = 1..N_p.
  std::vector<ReferencePath::Sample> refs;
  std::vector<sim::DynamicObstacle> obstacles;
  /// Scene time of `state`, used to place the dynamic obstacles.
  double t0 = 0.0;
  /// Optional initial guess, N_p controls.
  std::vector<Control> warm_start;
};

struct MpcSolution {
  std::vector<Control> controls;
  double cost = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
};

class MpcNotConverged : public Error {
 public:
  explicit MpcNotConverged(MpcSolution best)
      : Error(ErrorCode::kSolverNotConverged,
              "MPC solver did not converge (residual " + std::to_string(best.grad_norm) + ")"),
        best_(std::move(best)) {}

  const MpcSolution& best() const { return best_; }
  double residual() const { return best_.grad_norm; }

 private:
  MpcSolution best_;
};

/// Direct single shooting over the N_p control sequence. Controls are
/// parameterized as bound * tanh(z); gradients come from central finite
/// differences and steps from BFGS with a backtracking line search.
/// Not thread-safe; use one instance per worker.
class MpcSolver {
 public:
  MpcSolver(MpcConfig cfg, VehicleParams params);

  /// Throws MpcNotConverged (carrying the best iterate) when the gradient
  /// tolerance is not met.
  MpcSolution solve(const MpcProblem& problem);

  /// Objective for an explicit control sequence.
  double cost(const MpcProblem& problem, const std::vector<Control>& controls) const;

  /// Predicted states zeta_1..zeta_{N_p}.
  std::vector<VehicleState> predict(const VehicleState& state, const std::vector<Control>& controls) const;

  const MpcConfig& config() const { return cfg_; }
  const VehicleParams& params() const { return params_; }

 private:
  double cost_z(const MpcProblem& problem, const Eigen::VectorXd& z);
  std::vector<Control> to_controls(const Eigen::VectorXd& z) const;
  Eigen::VectorXd to_z(const std::vector<Control>& u) const;
  Eigen::VectorXd gradient(const MpcProblem& problem, const Eigen::VectorXd& z);

  MpcConfig cfg_;
  VehicleParams params_;
  std::vector<Control> scratch_;
};

/// Convenience wrapper: projects the schedule on a reference path and solves one step.
MpcSolution solve_mpc_step(const VehicleState& state, const ReferencePath& ref, double s_cur,
                           const std::vector<sim::DynamicObstacle>& obstacles, double t0, const MpcConfig& cfg,
                           const VehicleParams& params);

}  // namespace diffplan::datagen
